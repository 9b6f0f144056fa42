import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ptwell.errors import NewtonError
from ptwell.linalg import eigvals_general, multiset_distance
from ptwell.model import SystemParams, currents, gauge_fix, hamiltonian, parity, phase_distance
from ptwell.nonlinear import solve_stationary
from ptwell.perturbation import kato_series, unperturbed_basis
from ptwell.model import build_h0, build_hp
from ptwell.spectrum import linear_states, pt_defect
from ptwell.stability import bdg_spectrum

couplings = st.floats(0.0, 1.0)
rates = st.floats(0.0, 2.0)
SETTINGS = settings(max_examples=60, deadline=None)


@SETTINGS
@given(couplings, rates)
def test_pseudo_hermitian(J, g):
    h, p = hamiltonian(SystemParams(J, g)), parity()
    assert np.allclose(p @ h, h.conj().T @ p, atol=1e-14)


@SETTINGS
@given(couplings, rates)
def test_conjugate_closure(J, g):
    w = eigvals_general(hamiltonian(SystemParams(J, g)))
    assert multiset_distance(w, w.conj()) <= 1e-10


@SETTINGS
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6), st.floats(0, 6.2))
def test_gauge_fix_idempotent(parts, phase):
    psi = np.array(parts[:3]) + 1j * np.array(parts[3:])
    assume(np.linalg.norm(psi) > 1e-3)
    a = gauge_fix(psi)
    assert np.allclose(gauge_fix(a), a)
    assert phase_distance(a, np.exp(1j * phase) * psi) < 1e-12


@SETTINGS
@given(couplings.filter(lambda J: abs(J - 1) > 1e-3), st.floats(0.0, 0.999))
def test_linear_pt_states(J, g):
    for s in linear_states(SystemParams(J, g)):
        if abs(s.mu.imag) <= 1e-10 and pt_defect(s.psi) < 1e-8:
            c = currents(s)
            assert c.balance_defect <= 1e-9
            assert c.j_ext >= 0


@SETTINGS
@given(couplings, rates)
def test_bdg_u0_verdict_equals_linear_reality(J, g):
    states = linear_states(SystemParams(J, g))
    real = all(abs(s.mu.imag) <= 1e-10 for s in states)
    for s in states:
        if s.meta.get("defective"):
            continue
        assert bdg_spectrum(s).stable == real


@SETTINGS
@given(couplings, st.floats(0, 0.5), st.floats(0.1, 4))
def test_bdg_symmetry_nonlinear(J, g, U):
    seed = linear_states(SystemParams(J, 0.0))[0]
    try:
        s = solve_stationary(SystemParams(J, g, U), seed.psi)
    except NewtonError:
        assume(False)
    rep = bdg_spectrum(s)
    assert rep.symmetry_defect <= 1e-9
    if s.is_real:
        assert rep.zero_mode_defect <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.9))
def test_kato_odd_orders_vanish(J):
    basis = unperturbed_basis(build_h0(J), parity())
    for n in range(3):
        terms = kato_series(basis, build_hp(), n, 7)
        for t in terms:
            if t.order % 2:
                assert abs(t.value) <= 1e-12
            else:
                assert abs(t.value.imag) <= 1e-12
