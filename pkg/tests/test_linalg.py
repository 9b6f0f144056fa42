import numpy as np
import pytest

from ptwell.errors import InvalidMatrixError, SingularMatrixError
from ptwell.linalg import eig_general, eigvals_general, multiset_distance, solve_linear


def random_complex(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@pytest.mark.parametrize("n", [1, 2, 3, 6, 12])
def test_residuals_small(rng, n):
    a = random_complex(rng, n)
    spec = eig_general(a)
    scale = np.max(np.sum(np.abs(a), axis=1))
    assert np.all(spec.residuals <= 1e-12 * scale)
    assert np.allclose(np.linalg.norm(spec.eigenvectors, axis=0), 1)


def test_matches_characteristic_roots(rng):
    # independent oracle: roots of det(a - z) from numpy.poly
    a = random_complex(rng, 4)
    ours = np.sort_complex(eigvals_general(a))
    ref = np.sort_complex(np.roots(np.poly(a)))
    assert np.allclose(ours, ref, atol=1e-9)


def test_order_real_then_imag():
    a = np.diag([1 + 2j, -1, 1 - 2j, 0.5j])
    w = eigvals_general(a)
    assert np.allclose(w, [-1, 0.5j, 1 - 2j, 1 + 2j])


def test_deterministic():
    a = np.array([[0, -1], [-1, 0]]) + 0.3 * np.diag([1j, -1j])
    s1, s2 = eig_general(a), eig_general(a)
    assert np.array_equal(s1.eigenvalues, s2.eigenvalues)
    assert np.array_equal(s1.eigenvectors, s2.eigenvectors)


def test_degenerate_cluster_orthonormal():
    a = np.diag([2.0, 2.0, -1.0]).astype(complex)
    spec = eig_general(a)
    assert spec.clusters == ((1, 2),)
    block = spec.eigenvectors[:, [1, 2]]
    assert np.allclose(block.conj().T @ block, np.eye(2), atol=1e-12)
    assert not spec.defective.any()


def test_jordan_block_flagged_defective():
    a = np.array([[1.0, 1.0], [0.0, 1.0]])
    spec = eig_general(a)
    assert spec.defective.all()
    assert np.allclose(spec.eigenvalues, 1.0)


def test_exceptional_point_collapsed():
    # PT dimer at its EP: [[i, -1], [-1, -i]] is a nilpotent Jordan block
    a = np.array([[1j, -1], [-1, -1j]])
    spec = eig_general(a)
    assert spec.defective.all()
    assert np.max(np.abs(spec.eigenvalues)) < 1e-7


@pytest.mark.parametrize(
    "bad",
    [np.zeros((2, 3)), np.zeros((0, 0)), np.array([[np.nan]]), np.eye(65), np.ones(3)],
)
def test_invalid_input(bad):
    with pytest.raises(InvalidMatrixError):
        eig_general(bad)


def test_solve_linear_accuracy(rng):
    a = random_complex(rng, 8)
    x = rng.normal(size=8) + 1j * rng.normal(size=8)
    assert np.allclose(solve_linear(a, a @ x), x, atol=1e-12)


def test_solve_linear_real_stays_real(rng):
    a = rng.normal(size=(5, 5))
    out = solve_linear(a, np.ones(5))
    assert out.dtype == float


def test_solve_linear_singular():
    with pytest.raises(SingularMatrixError) as info:
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
    assert info.value.pivot < 1e-14


def test_solve_linear_shape_mismatch():
    with pytest.raises(InvalidMatrixError):
        solve_linear(np.eye(3), np.ones(2))


def test_multiset_distance_ignores_order():
    a = np.array([1 + 1j, 1 - 1j, -2.0])
    assert multiset_distance(a, a[::-1]) == 0.0
    assert multiset_distance(a, a + 1e-3) == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        multiset_distance(a, a[:2])
