"""Dense complex linear algebra for small non-Hermitian matrices.

The eigen decomposition itself is delegated to LAPACK (``numpy.linalg.eig``);
this module adds what the rest of the package relies on: input validation,
a deterministic eigenvalue order, per-pair residuals, detection of degenerate
and numerically defective clusters, and a pivot-checked linear solver.

All tolerances are relative to the max row-sum norm of the input matrix.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import EigenConvergenceError, InvalidMatrixError, SingularMatrixError

MAX_DIM = 64
CLUSTER_GAP = 1e-9          # relative eigenvalue gap below which pairs are degenerate
DEFECT_GAP = 1e-5           # relative gap within which near-parallel pairs count as one Jordan block
DEFECT_PARALLEL = 1e-8      # 1 - |<v_i, v_j>| below which two eigenvectors are "the same"
DEFECT_RANK = 1e-4          # relative singular value below which a cluster basis is rank deficient


def as_matrix(a, max_dim=None) -> np.ndarray:
    """Validate ``a`` as a finite square matrix and return it as a complex array."""
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidMatrixError(f"expected a non-empty square matrix, got shape {m.shape}")
    if max_dim is not None and m.shape[0] > max_dim:
        raise InvalidMatrixError(f"dimension {m.shape[0]} exceeds the supported maximum {max_dim}")
    m = m.astype(complex)
    if not np.all(np.isfinite(m)):
        raise InvalidMatrixError("matrix contains NaN or Inf entries")
    return m


def spectral_scale(a) -> float:
    """Max row-sum norm, the reference scale for every relative tolerance."""
    return float(np.max(np.sum(np.abs(np.asarray(a)), axis=1)))


def _tol_scale(a) -> float:
    s = spectral_scale(a)
    return s if s > 0 else 1.0


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with paired unit-norm right eigenvectors (stored as columns).

    ``clusters`` lists index groups of (numerically) coinciding eigenvalues;
    ``defective`` marks indices whose cluster has no complete eigenbasis. For
    those the reported eigenvalue is the cluster centroid and the residual may
    exceed the usual bound.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    clusters: tuple = ()
    defective: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    scale: float = 1.0

    def __len__(self):
        return len(self.eigenvalues)

    def vector(self, k: int) -> np.ndarray:
        return self.eigenvectors[:, k]

    def cluster_of(self, k: int) -> tuple:
        for c in self.clusters:
            if k in c:
                return c
        return (k,)


def _deterministic_order(w: np.ndarray, tol: float) -> np.ndarray:
    """Sort by real part, then imaginary part among real parts equal within ``tol``."""
    idx = np.argsort(w.real, kind="stable")
    out = []
    group = [idx[0]]
    for k in idx[1:]:
        if w.real[k] - w.real[group[0]] <= tol:
            group.append(k)
        else:
            out.extend(sorted(group, key=lambda i: w.imag[i]))
            group = [k]
    out.extend(sorted(group, key=lambda i: w.imag[i]))
    return np.array(out, dtype=int)


def _clusters(w: np.ndarray, v: np.ndarray, scale: float) -> list:
    n = len(w)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            gap = abs(w[i] - w[j])
            close = gap <= CLUSTER_GAP * scale
            if not close and gap <= DEFECT_GAP * scale:
                close = 1.0 - abs(np.vdot(v[:, i], v[:, j])) <= DEFECT_PARALLEL
            if close:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in groups.values() if len(g) > 1]


def _mgs(vectors: np.ndarray) -> np.ndarray:
    q = np.array(vectors, dtype=complex)
    for j in range(q.shape[1]):
        for i in range(j):
            q[:, j] -= np.vdot(q[:, i], q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    return q


def eig_general(a) -> Spectrum:
    """All eigenvalues and right eigenvectors of a general complex matrix.

    Eigenvalues come sorted by (Re, Im) ascending. Degenerate clusters with a
    full eigenbasis are re-orthonormalized (modified Gram-Schmidt); clusters
    without one are flagged defective and collapsed onto their centroid, which
    is the well-conditioned quantity for a split Jordan block.

    Raises
    ------
    InvalidMatrixError
        Non-square, empty, larger than 64x64, or non-finite input.
    EigenConvergenceError
        LAPACK's QR iteration failed to converge.
    """
    m = as_matrix(a, MAX_DIM)
    scale = _tol_scale(m)
    try:
        w, v = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc
    v = v / np.linalg.norm(v, axis=0)

    defective = np.zeros(len(w), dtype=bool)
    groups = _clusters(w, v, scale)
    for g in groups:
        block = v[:, g]
        sv = np.linalg.svd(block, compute_uv=False)
        if sv[-1] <= DEFECT_RANK * sv[0]:
            w[g] = np.mean(w[g])
            defective[g] = True
        else:
            v[:, g] = _mgs(block)

    order = _deterministic_order(w, CLUSTER_GAP * scale)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(len(order))
    w, v, defective = w[order], v[:, order], defective[order]
    clusters = tuple(tuple(sorted(int(inverse[i]) for i in g)) for g in groups)
    clusters = tuple(sorted(clusters))

    residuals = np.linalg.norm(m @ v - v * w, axis=0)
    return Spectrum(w, v, residuals, clusters, defective, scale)


def eigvals_general(a) -> np.ndarray:
    return eig_general(a).eigenvalues


def multiset_distance(a, b) -> float:
    """Smallest max-norm distance between ``a`` and any permutation of ``b``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("multisets must be 1-D arrays of equal length")
    if len(a) > 8:
        raise ValueError("multiset_distance enumerates permutations; at most 8 entries")
    if len(a) == 0:
        return 0.0
    return float(min(np.max(np.abs(a - b[list(p)])) for p in itertools.permutations(range(len(a)))))


def solve_linear(a, b) -> np.ndarray:
    """Solve ``a x = b`` by LU with partial pivoting plus one refinement step.

    Raises SingularMatrixError (carrying the smallest pivot) when the
    factorization has a pivot below ``dim * eps * ||a||``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidMatrixError(f"expected a non-empty square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise InvalidMatrixError(f"right-hand side has length {b.shape[0]}, expected {a.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidMatrixError("linear system contains NaN or Inf entries")
    scale = _tol_scale(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivot = float(np.min(np.abs(np.diag(lu))))
    threshold = a.shape[0] * np.finfo(float).eps * scale
    if pivot <= threshold:
        raise SingularMatrixError(
            f"matrix is singular to working precision (smallest pivot {pivot:.3e})", pivot=pivot
        )
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    x = x + scipy.linalg.lu_solve((lu, piv), b - a @ x, check_finite=False)
    return x
