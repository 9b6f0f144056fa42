import math
from math import comb

import numpy as np
import pytest

from ptwell.errors import DegenerateLevelError, OrthonormalityError
from ptwell.model import build_h0, build_hp, parity
from ptwell.perturbation import (
    degenerate_coupling_matrix,
    first_order_splitting,
    kato_correction,
    kato_series,
    leading_entry_basis,
    partial_sum_errors,
    reduced_resolvent,
    unperturbed_basis,
    weak_compositions,
)


def closed_form(J):
    r = math.sqrt(2 * J * J + 0.25)
    return sorted([-r - 0.5, r - 0.5, 1.0])


def taylor_oracle(J, level, orders, radius=0.2, points=64):
    """Taylor coefficients of mu_level(gamma) by a discrete Cauchy integral
    over complex gamma on a circle; independent of the resolvent algebra."""
    mu0 = closed_form(J)[level]
    theta = 2 * np.pi * np.arange(points) / points
    vals = []
    for t in theta:
        w = np.linalg.eigvals(build_h0(J) + radius * np.exp(1j * t) * build_hp())
        vals.append(w[np.argmin(np.abs(w - mu0))])
    vals = np.array(vals)
    return [np.mean(vals * np.exp(-1j * s * theta)) / radius**s for s in orders]


@pytest.mark.parametrize("J", [0.0, 0.25, 0.5, 0.75, 1.0, 1.7])
def test_unperturbed_closed_form(J):
    basis = unperturbed_basis(build_h0(J), parity())
    assert np.allclose(basis.eigenvalues, closed_form(J), atol=1e-12)


def test_parity_labels():
    basis = unperturbed_basis(build_h0(0.5), parity())
    assert list(basis.parity_labels) == [1, 1, -1]
    p = parity()
    for m in range(3):
        v = basis.vector(m)
        assert np.allclose(p @ v, basis.parity_labels[m] * v)


def test_parity_adapted_degenerate_cluster():
    basis = unperturbed_basis(build_h0(1.0), parity())
    assert basis.degenerate_clusters() == [(1, 2)]
    assert list(basis.parity_labels) == [1, 1, -1]


@pytest.mark.parametrize("s", range(1, 9))
def test_weak_composition_count(s):
    comps = list(weak_compositions(s - 1, s + 1))
    assert len(comps) == comb(2 * s - 1, s)
    assert len(set(comps)) == len(comps)
    assert all(sum(c) == s - 1 and min(c) >= 0 for c in comps)
    assert comps == sorted(comps)


def test_kato_j0_ground_exact():
    # -sqrt(1 - g^2) = -1 + g^2/2 + g^4/8 + g^6/16 + 5 g^8/128 + ...
    basis = unperturbed_basis(build_h0(0.0), parity())
    exact = [0, 0.5, 0, 0.125, 0, 0.0625, 0, 5 / 128]
    got = [t.value for t in kato_series(basis, build_hp(), 0, 8)]
    assert np.allclose(got, exact, atol=1e-12)


@pytest.mark.parametrize("J", [0.1, 0.4, 0.8])
@pytest.mark.parametrize("level", [0, 1, 2])
def test_kato_against_cauchy_oracle(J, level):
    basis = unperturbed_basis(build_h0(J), parity())
    got = [t.value for t in kato_series(basis, build_hp(), level, 8)]
    ref = taylor_oracle(J, level, range(1, 9))
    assert np.allclose(got, ref, atol=1e-8)


def test_literal_projector_sign_differs_from_fourth_order():
    basis = unperturbed_basis(build_h0(0.0), parity())
    hp = build_hp()
    for s in (1, 2, 3):
        assert kato_correction(basis, hp, 0, s, projector_sign=1).value == pytest.approx(
            kato_correction(basis, hp, 0, s).value, abs=1e-14)
    assert kato_correction(basis, hp, 0, 4, projector_sign=1).value == pytest.approx(-0.375, abs=1e-12)


def test_kato_term_counts():
    basis = unperturbed_basis(build_h0(0.3), parity())
    for s in range(1, 9):
        assert kato_correction(basis, build_hp(), 0, s).composition_count == comb(2 * s - 1, s)


def test_kato_order_range():
    basis = unperturbed_basis(build_h0(0.3), parity())
    with pytest.raises(ValueError):
        kato_correction(basis, build_hp(), 0, 9)
    with pytest.raises(IndexError):
        kato_correction(basis, build_hp(), 3, 2)


def test_kato_refuses_degenerate_level():
    basis = unperturbed_basis(build_h0(1.0), parity())
    with pytest.raises(DegenerateLevelError):
        kato_correction(basis, build_hp(), 1, 2)
    with pytest.raises(DegenerateLevelError):
        kato_correction(basis, build_hp(), 1, 2, allow_degenerate=True)
    # the simple ground level is fine at the degenerate J
    assert abs(kato_correction(basis, build_hp(), 0, 1).value) < 1e-14


def test_reduced_resolvent_annihilates_level():
    basis = unperturbed_basis(build_h0(0.4), parity())
    s = reduced_resolvent(basis, 1)
    assert np.allclose(s @ basis.vector(1), 0, atol=1e-14)
    h0 = build_h0(0.4)
    q = np.eye(3) - np.outer(basis.vector(1), basis.vector(1).conj())
    assert np.allclose(s @ (h0 - basis.eigenvalues[1] * np.eye(3)), q, atol=1e-12)


def test_coupling_matrix_j1():
    basis = unperturbed_basis(build_h0(1.0), parity())
    cluster = basis.eigenvectors[:, [1, 2]]
    s = degenerate_coupling_matrix(cluster, build_hp())
    assert np.allclose(np.diag(s), 0, atol=1e-14)
    assert np.allclose(np.abs(s[0, 1]), 1 / math.sqrt(3), atol=1e-12)
    assert np.allclose(s.real, 0, atol=1e-14)
    verdict = first_order_splitting(cluster, build_hp())
    assert not verdict.pt_survives
    assert np.allclose(verdict.splitting_eigenvalues, [-1j / math.sqrt(3), 1j / math.sqrt(3)], atol=1e-12)


def test_coupling_matrix_needs_orthonormal_basis():
    cluster = np.array([[1, 1], [-2, 0], [1, -1]], dtype=complex)
    with pytest.raises(OrthonormalityError) as info:
        degenerate_coupling_matrix(cluster, build_hp())
    assert info.value.defect > 1
    s = degenerate_coupling_matrix(cluster, build_hp(), enforce_orthonormal=False)
    assert np.array_equal(s, np.array([[0, 2j], [2j, 0]]))


def test_leading_entry_basis_integer_vectors():
    basis = unperturbed_basis(build_h0(1.0), parity())
    c = leading_entry_basis(basis.eigenvectors[:, [1, 2]])
    assert np.array_equal(c, np.array([[1, 1], [-2, 0], [1, -1]], dtype=complex))


def test_splitting_survives_for_uncoupled_cluster():
    # two decoupled wells without gain/loss: HP vanishes on the cluster
    cluster = np.array([[0, 0], [1, 0], [0, 1]], dtype=complex)
    hp = np.diag([1j, 0, 0])
    assert first_order_splitting(cluster, hp).pt_survives


def test_partial_sum_errors_decrease():
    h0, hp = build_h0(0.4), build_hp()
    basis = unperturbed_basis(h0, parity())
    terms = kato_series(basis, hp, 2, 8)
    err = partial_sum_errors(h0, hp, basis, 2, terms, 0.1)
    assert err[-1] < err[1] < err[0]
    assert err[-1] < 1e-6
