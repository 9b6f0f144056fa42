"""Kato perturbation series and the first-order degenerate PT criterion.

For ``H = H0 + gamma * HP`` with Hermitian, parity-symmetric ``H0`` and an
anti-Hermitian, parity-odd ``HP``, the order-``s`` energy correction of a
simple level ``n`` is

    mu_{n,s} = (-1)^(s-1) Tr sum_k S^k1 HP S^k2 ... HP S^k(s+1),

summed over weak compositions ``k1 + ... + k(s+1) = s - 1`` with ``S`` the
reduced resolvent of level ``n``. The zeroth power is Kato's ``S^0 = -|n><n|``;
the sign matters from fourth order on (with ``+|n><n|`` the J=0 ground state
would get -3/8 instead of the exact +1/8 at s=4). For a degenerate level the
first-order shifts are the eigenvalues of ``<phi_i|HP|phi_j>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .errors import DegenerateLevelError, OrthonormalityError, ParityAdaptationError
from .linalg import CLUSTER_GAP, as_matrix, eig_general, spectral_scale

MAX_ORDER = 8
ORTHO_TOL = 1e-10
PARITY_TOL = 1e-8
SURVIVAL_TOL = 1e-10


@dataclass(frozen=True)
class UnperturbedBasis:
    """Real spectrum of H0 with orthonormal eigenvectors (columns) and parity labels."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    parity_labels: np.ndarray
    scale: float = 1.0

    def __len__(self):
        return len(self.eigenvalues)

    def vector(self, m: int) -> np.ndarray:
        return self.eigenvectors[:, m]

    def clusters(self) -> list:
        """Index groups of degenerate levels, including singletons."""
        groups = [[0]]
        for m in range(1, len(self)):
            if self.eigenvalues[m] - self.eigenvalues[groups[-1][0]] < CLUSTER_GAP * self.scale:
                groups[-1].append(m)
            else:
                groups.append([m])
        return [tuple(g) for g in groups]

    def degenerate_clusters(self) -> list:
        return [c for c in self.clusters() if len(c) > 1]

    def is_degenerate(self, n: int) -> bool:
        return any(n in c for c in self.degenerate_clusters())


@dataclass(frozen=True)
class KatoTerm:
    order: int
    value: complex
    composition_count: int


@dataclass(frozen=True)
class SplittingVerdict:
    coupling: np.ndarray
    splitting_eigenvalues: np.ndarray
    pt_survives: bool


def _phase_fix(v: np.ndarray) -> np.ndarray:
    a = np.abs(v)
    k = int(np.flatnonzero(a >= a.max() * (1 - 1e-9))[0])
    return v * (abs(v[k]) / v[k])


def parity_adapt(basis: UnperturbedBasis, p) -> UnperturbedBasis:
    """Rotate each degenerate cluster onto parity eigenvectors and relabel.

    Within a cluster the +1 vectors come first. Raises ParityAdaptationError
    when ``p`` restricted to a cluster has eigenvalues other than +-1.
    """
    p = as_matrix(p)
    vecs = np.array(basis.eigenvectors, dtype=complex)
    labels = np.zeros(len(basis), dtype=int)
    for cluster in basis.clusters():
        idx = list(cluster)
        block = vecs[:, idx]
        restricted = block.conj().T @ p @ block
        restricted = 0.5 * (restricted + restricted.conj().T)
        lam, w = np.linalg.eigh(restricted)
        if np.max(np.abs(np.abs(lam) - 1)) > PARITY_TOL:
            raise ParityAdaptationError(
                f"parity is not +-1 on cluster {cluster}: eigenvalues {np.round(lam, 10)}"
            )
        order = np.argsort(-lam, kind="stable")
        rotated = block @ w[:, order]
        for j, m in enumerate(idx):
            lab = int(round(lam[order[j]]))
            # exact projection: mirrored entries then agree bitwise, so parity-forbidden
            # matrix elements come out as exact zeros instead of roundoff
            v = 0.5 * (rotated[:, j] + lab * (p @ rotated[:, j]))
            vecs[:, m] = _phase_fix(v / np.linalg.norm(v))
            labels[m] = lab
    for m in range(len(basis)):
        defect = np.linalg.norm(p @ vecs[:, m] - labels[m] * vecs[:, m])
        if defect > PARITY_TOL:
            raise ParityAdaptationError(f"vector {m} is not a parity eigenvector (defect {defect:.2e})")
    return UnperturbedBasis(np.array(basis.eigenvalues, dtype=float), vecs, labels, basis.scale)


def unperturbed_basis(h0, p) -> UnperturbedBasis:
    """Diagonalize Hermitian ``h0`` and parity-adapt the result."""
    h0 = as_matrix(h0)
    spec = eig_general(h0)
    basis = UnperturbedBasis(spec.eigenvalues.real.copy(), spec.eigenvectors, np.zeros(len(spec), dtype=int),
                             spectral_scale(h0) or 1.0)
    return parity_adapt(basis, p)


def _check_simple(basis: UnperturbedBasis, n: int):
    if not 0 <= n < len(basis):
        raise IndexError(f"level {n} out of range for a {len(basis)}-level basis")
    if basis.is_degenerate(n):
        raise DegenerateLevelError(
            f"level {n} (mu={basis.eigenvalues[n]:.6g}) is degenerate; use degenerate_coupling_matrix"
        )


def reduced_resolvent(basis: UnperturbedBasis, n: int, exclude=None) -> np.ndarray:
    """``S = sum_{m != n} |m><m| / (mu_m - mu_n)``.

    ``exclude`` widens the excluded set beyond ``n`` (used for the degenerate
    fallback, where the whole cluster is left out).
    """
    if exclude is None:
        _check_simple(basis, n)
        exclude = (n,)
    dim = basis.eigenvectors.shape[0]
    s = np.zeros((dim, dim), dtype=complex)
    for m in range(len(basis)):
        if m in exclude:
            continue
        v = basis.vector(m)
        s += np.outer(v, v.conj()) / (basis.eigenvalues[m] - basis.eigenvalues[n])
    return s


def weak_compositions(total: int, parts: int):
    """Yield tuples of ``parts`` non-negative ints summing to ``total``, lexicographically."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in weak_compositions(total - first, parts - 1):
            yield (first,) + rest


def kato_correction(
    basis: UnperturbedBasis, hp, n: int, s: int, allow_degenerate: bool = False, projector_sign: int = -1
) -> KatoTerm:
    """Order-``s`` Kato energy correction of level ``n``.

    With ``allow_degenerate`` a degenerate level whose first-order coupling
    matrix vanishes is treated as simple, leaving its whole cluster out of the
    reduced resolvent. That is an approximation, exact only while the cluster
    stays uncoupled at first order. ``projector_sign=+1`` evaluates the sum
    with ``S^0 = +|n><n|``, which is only correct up to third order.
    """
    if not 1 <= s <= MAX_ORDER:
        raise ValueError(f"order must lie in 1..{MAX_ORDER}, got {s}")
    hp = as_matrix(hp)
    exclude = None
    if not (allow_degenerate and 0 <= n < len(basis) and basis.is_degenerate(n)):
        _check_simple(basis, n)
    elif allow_degenerate:
        cluster = next(c for c in basis.degenerate_clusters() if n in c)
        verdict = first_order_splitting(basis.eigenvectors[:, list(cluster)], hp)
        if not verdict.pt_survives:
            raise DegenerateLevelError(f"cluster {cluster} couples at first order; no simple-level series exists")
        exclude = cluster
    # work in the unperturbed eigenbasis: S is diagonal there and HP keeps the
    # parity selection rule exactly
    v = basis.eigenvectors
    hp_e = v.conj().T @ hp @ v
    flip = np.fliplr(np.eye(len(basis)))
    if np.linalg.norm(flip @ hp @ flip + hp) <= 1e-14 * max(1.0, np.linalg.norm(hp)):
        # parity-odd HP cannot connect equal-parity states; zero the rounding residue
        same = np.equal.outer(basis.parity_labels, basis.parity_labels)
        hp_e[same] = 0.0
    excluded = set(exclude if exclude is not None else (n,))
    s_diag = np.array([0.0 if m in excluded else 1.0 / (basis.eigenvalues[m] - basis.eigenvalues[n])
                       for m in range(len(basis))])
    proj = np.zeros(len(basis))
    proj[n] = projector_sign
    powers = [np.diag(proj).astype(complex)]
    for k in range(1, s):
        powers.append(np.diag(s_diag**k).astype(complex))

    terms = []
    for ks in weak_compositions(s - 1, s + 1):
        prod = powers[ks[0]]
        for k in ks[1:]:
            prod = prod @ hp_e @ powers[k]
        terms.append(np.trace(prod))
    # np.sum uses pairwise summation: deterministic and well conditioned
    value = (-1) ** (s - 1) * np.sum(np.array(terms, dtype=complex))
    count = len(terms)
    assert count == comb(2 * s - 1, s)
    return KatoTerm(s, complex(value), count)


def kato_series(basis: UnperturbedBasis, hp, n: int, max_order: int) -> list:
    return [kato_correction(basis, hp, n, s) for s in range(1, max_order + 1)]


def _as_columns(cluster) -> np.ndarray:
    c = np.asarray(cluster, dtype=complex)
    if c.ndim == 1:
        c = c[:, None]
    return c


def orthonormality_defect(cluster) -> float:
    c = _as_columns(cluster)
    return float(np.max(np.abs(c.conj().T @ c - np.eye(c.shape[1]))))


def degenerate_coupling_matrix(cluster, hp, enforce_orthonormal: bool = True) -> np.ndarray:
    """``S_ij = <phi_i|HP|phi_j>`` for cluster vectors given as columns.

    ``enforce_orthonormal=False`` skips the orthonormality check; that is only
    meant for reproducing hand calculations done in an unnormalized basis,
    whose entries are not first-order energy shifts.
    """
    c = _as_columns(cluster)
    hp = as_matrix(hp)
    if enforce_orthonormal:
        defect = orthonormality_defect(c)
        if defect > ORTHO_TOL:
            raise OrthonormalityError(f"cluster basis is not orthonormal (defect {defect:.2e})", defect)
    return c.conj().T @ hp @ c


def first_order_splitting(cluster, hp, enforce_orthonormal: bool = True) -> SplittingVerdict:
    """Eigenvalues of the coupling matrix; PT survives iff they all vanish."""
    coupling = degenerate_coupling_matrix(cluster, hp, enforce_orthonormal)
    ev = eig_general(coupling).eigenvalues
    ev = ev[np.argsort(ev.imag, kind="stable")]
    survives = bool(np.max(np.abs(ev)) <= SURVIVAL_TOL)
    return SplittingVerdict(coupling, ev, survives)


def leading_entry_basis(cluster, max_denominator: int = 12) -> np.ndarray:
    """Rescale each column so its first non-negligible entry is 1.

    Entries that sit within 1e-9 of a small-denominator rational are snapped
    to it, recovering integer hand-calculation bases such as (1, -2, 1).
    """
    c = np.array(_as_columns(cluster), dtype=complex)
    for j in range(c.shape[1]):
        col = c[:, j]
        lead = col[np.flatnonzero(np.abs(col) > 1e-8)[0]]
        col = col / lead
        for i, z in enumerate(col):
            snapped = []
            for part in (z.real, z.imag):
                f = Fraction(part).limit_denominator(max_denominator)
                snapped.append(float(f) if abs(float(f) - part) <= 1e-9 else part)
            col[i] = complex(*snapped)
        c[:, j] = col
    return c


def partial_sum_errors(h0, hp, basis: UnperturbedBasis, n: int, terms, gamma: float) -> np.ndarray:
    """``|mu_n + sum_{s<=S} gamma^s mu_{n,s} - mu_exact(gamma)|`` for S = 1..len(terms).

    ``mu_exact`` is the eigenvalue of ``h0 + gamma*hp`` closest to the
    second-order estimate, which identifies the level unambiguously for small
    gamma.
    """
    values = np.array([t.value for t in terms], dtype=complex)
    powers = gamma ** np.arange(1, len(values) + 1)
    partial = basis.eigenvalues[n] + np.cumsum(powers * values)
    exact_all = eig_general(as_matrix(h0) + gamma * as_matrix(hp)).eigenvalues
    guess = partial[min(1, len(partial) - 1)]
    exact = exact_all[np.argmin(np.abs(exact_all - guess))]
    return np.abs(partial - exact)
