"""Linear (U=0) spectra over gamma: branches, PT classification and EP2 search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .errors import NoBracketError
from .linalg import eig_general
from .model import SystemParams, build_h0, build_hp, hamiltonian, make_state, phase_distance
from .perturbation import first_order_splitting

IM_TOL = 1e-10
AMBIGUITY_TOL = 1e-6
CONTINUITY_FACTOR = 10.0
CONTINUITY_FLOOR = 1e-3
DEFAULT_GRID = np.round(np.arange(0, 301) * 0.005, 10)


@dataclass
class Branch:
    """States ordered along a strictly increasing parameter.

    ``labels`` always carries ``id`` and ``parameter`` (what ``param_values``
    holds: ``"gamma"`` for grid sweeps, ``"arclength"`` for continuation) and
    may carry ``pt_defect``, ``breaks`` (indices where the continuity bound
    failed and a new segment starts), ``unresolved`` (indices where the
    overlap matching was ambiguous) and continuation bookkeeping.
    """

    param_values: np.ndarray
    states: list
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.param_values = np.asarray(self.param_values, dtype=float)
        if len(self.param_values) != len(self.states):
            raise ValueError("param_values and states differ in length")
        if np.any(np.diff(self.param_values) <= 0):
            raise ValueError("param_values must be strictly increasing")

    def __len__(self):
        return len(self.states)

    @property
    def id(self):
        return self.labels.get("id")

    @property
    def gammas(self) -> np.ndarray:
        return np.array([s.params.gamma for s in self.states])

    @property
    def mus(self) -> np.ndarray:
        return np.array([s.mu for s in self.states])

    def segments(self) -> list:
        """Split at recorded continuity breaks."""
        cuts = [0] + sorted(self.labels.get("breaks", [])) + [len(self)]
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b > a:
                lab = dict(self.labels, segment=len(out), breaks=[])
                out.append(Branch(self.param_values[a:b], self.states[a:b], lab))
        return out


def pt_defect(psi) -> float:
    """``min_theta ||P psi* - exp(i theta) psi||`` for a unit vector."""
    psi = np.asarray(psi, dtype=complex)
    image = psi[::-1].conj()
    ov = np.vdot(psi, image)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(image - phase * psi))


def has_complex_eigenvalues(J: float, gamma: float, tol: float = IM_TOL) -> bool:
    ev = eig_general(hamiltonian(SystemParams(J, gamma))).eigenvalues
    return bool(np.max(np.abs(ev.imag)) > tol)


def linear_states(params: SystemParams, next_gamma=None) -> list:
    """Eigenstates of the linear Hamiltonian as gauge-fixed StationaryStates.

    Degenerate clusters are rotated onto the eigenvectors of the first-order
    coupling ``<v_i|HP|v_j>``, the combinations that continue smoothly once
    ``gamma`` moves away (``next_gamma`` only decides whether that is needed).
    """
    spec = eig_general(hamiltonian(params))
    vecs = spec.eigenvectors.copy()
    if next_gamma is not None and next_gamma != params.gamma:
        for cluster in spec.clusters:
            if spec.defective[list(cluster)].any():
                continue
            idx = list(cluster)
            split = first_order_splitting(vecs[:, idx], build_hp())
            w = eig_general(split.coupling).eigenvectors
            vecs[:, idx] = vecs[:, idx] @ w
    return [
        make_state(vecs[:, k], spec.eigenvalues[k], params, defective=bool(spec.defective[k]))
        for k in range(len(spec))
    ]


def _best_assignment(prev: list, cur: list):
    """Permutation maximizing total |overlap|, plus the margin to the runner-up."""
    n = len(prev)
    ov = np.abs(np.array([[np.vdot(p.psi, c.psi) for c in cur] for p in prev]))
    scores = sorted(
        ((sum(ov[i, perm[i]] for i in range(n)), perm) for perm in itertools.permutations(range(n))),
        key=lambda t: -t[0],
    )
    margin = scores[0][0] - scores[1][0] if len(scores) > 1 else np.inf
    return scores[0][1], margin


def sweep_gamma(J: float, grid=None, U: float = 0.0, workers=None) -> list:
    """Linear eigenvalue branches over an ascending gamma grid in [0, 2].

    Branches are matched between neighbouring grid points by maximal total
    eigenvector overlap; ids follow the eigenvalue order at the first point.
    """
    if U != 0:
        raise ValueError("sweep_gamma covers the linear problem only; use the nonlinear module for U != 0")
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    if grid[0] < 0 or grid[-1] > 2:
        raise ValueError("grid must lie within [0, 2]")

    nxt = list(grid[1:]) + [None]
    points = pmap(lambda gn: linear_states(SystemParams(J, gn[0]), gn[1]), zip(grid, nxt), workers)

    n = len(points[0])
    tracks = [[points[0][b]] for b in range(n)]
    unresolved = [[] for _ in range(n)]
    for k in range(1, len(grid)):
        prev = [t[-1] for t in tracks]
        perm, margin = _best_assignment(prev, points[k])
        for b in range(n):
            tracks[b].append(points[k][perm[b]])
            if margin <= AMBIGUITY_TOL:
                unresolved[b].append(k)

    branches = []
    for b in range(n):
        states = tracks[b]
        breaks = []
        for k in range(1, len(states) - 1):
            rate = phase_distance(states[k].psi, states[k - 1].psi) / (grid[k] - grid[k - 1])
            step = phase_distance(states[k + 1].psi, states[k].psi)
            if step > CONTINUITY_FLOOR and step > CONTINUITY_FACTOR * (grid[k + 1] - grid[k]) * rate:
                breaks.append(k + 1)
        labels = {
            "id": b,
            "parameter": "gamma",
            "J": J,
            "pt_defect": [pt_defect(s.psi) for s in states],
            "breaks": breaks,
            "unresolved": unresolved[b],
        }
        branches.append(Branch(grid.copy(), states, labels))
    return branches


@dataclass(frozen=True)
class EP2Result:
    J: float
    gamma_ep: float
    pair: tuple
    bracket: tuple
    degenerate_at_zero: bool = False


def find_ep2(J: float, bracket=(0.0, 2.0), tol: float = 1e-8) -> EP2Result:
    """Locate the EP2 where complex eigenvalues first appear, by bisection.

    The predicate is ``max_k |Im mu_k(gamma)| > 1e-10``. When ``H0(J)`` is
    already degenerate, PT breaks at any gamma > 0 and the result is reported
    as degenerate at zero instead.

    Raises NoBracketError when both ends are real, or both complex without a
    degeneracy at gamma = 0.
    """
    lo, hi = map(float, bracket)
    if not 0 <= lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    h0_spec = eig_general(build_h0(J))
    degenerate = [c for c in h0_spec.clusters]

    def at_zero():
        return EP2Result(J, 0.0, tuple(degenerate[0]), (lo, hi), True)

    if has_complex_eigenvalues(J, lo):
        if degenerate:
            return at_zero()
        raise NoBracketError(f"spectrum is already complex at gamma={lo} (J={J})")
    if not has_complex_eigenvalues(J, hi):
        raise NoBracketError(f"spectrum stays real on [{lo}, {hi}] (J={J})")

    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if has_complex_eigenvalues(J, mid):
            b = mid
        else:
            a = mid
    if degenerate and lo == 0 and b <= 2 * tol:
        return at_zero()

    # the coalescing pair has nearly parallel eigenvectors just below the EP;
    # step back a little so an exactly defective point does not scramble the order
    spec = eig_general(hamiltonian(SystemParams(J, max(lo, a - 10 * tol))))
    v = spec.eigenvectors
    pairs = itertools.combinations(range(len(spec)), 2)
    pair = max(pairs, key=lambda ij: abs(np.vdot(v[:, ij[0]], v[:, ij[1]])))
    return EP2Result(J, 0.5 * (a + b), tuple(int(i) for i in pair), (lo, hi))
