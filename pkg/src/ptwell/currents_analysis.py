"""Particle currents along stationary branches and their stable maximum over gamma."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NewtonError
from .model import SystemParams, currents
from .nonlinear import SeedCensus, is_pt_symmetric, solve_stationary, track_states
from .spectrum import DEFAULT_GRID, has_complex_eigenvalues, sweep_gamma
from .stability import bdg_spectrum

BROKEN_TOL = 1e-10
CURRENT_FLOOR = 1e-12


@dataclass(frozen=True)
class CurrentRow:
    gamma: float
    branch_id: int
    mu: complex
    j_ext: float
    j12: float
    j13: float
    ratio: float | None
    pt_symmetric: bool
    stable: bool
    max_im: float
    any_broken: bool


def _branches(J: float, U: float, grid, census=None, workers=None) -> list:
    if U == 0:
        return sweep_gamma(J, grid, workers=workers)
    return track_states(J, U, grid, census, workers)


def rows_from_branches(branches) -> list:
    """One row per state per gamma, ordered by (gamma, branch id)."""
    broken_at = {}
    for br in branches:
        for s in br.states:
            g = s.params.gamma
            broken_at[g] = broken_at.get(g, False) or abs(s.mu.imag) > BROKEN_TOL
    rows = []
    for br in branches:
        for s in br.states:
            c = currents(s)
            rep = bdg_spectrum(s)
            rows.append(CurrentRow(s.params.gamma, br.id, s.mu, c.j_ext, c.j12, c.j13, c.ratio,
                                   is_pt_symmetric(s), rep.stable, rep.max_im, broken_at[s.params.gamma]))
    rows.sort(key=lambda r: (r.gamma, r.branch_id))
    return rows


def current_sweep(J: float, U: float = 0.0, grid=None, census: SeedCensus | None = None, workers=None) -> list:
    """Currents of every stationary state on the gamma grid.

    ``any_broken`` marks grid points where some coexisting state has
    ``|Im mu| > 1e-10``; ``ratio`` is None when ``|j13| <= 1e-12``.
    """
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    return rows_from_branches(_branches(J, U, grid, census, workers))


@dataclass(frozen=True)
class MaxCurrent:
    J: float
    U: float
    gamma: float | None
    branch_id: int | None
    j_max: float | None
    stable_at_max: bool
    at_ep: bool = False

    @property
    def found(self) -> bool:
        return self.j_max is not None


def _refine(J: float, U: float, start, gamma: float, step: float, refine: int):
    """Follow one state over ``gamma +- step`` on a grid ``refine`` times finer.

    Returns ``(best_state, best_j, hit_edge)``; ``hit_edge`` is True when the
    best point is the last one the branch reaches before it ceases to exist
    or loses PT symmetry.
    """
    fine = step / refine
    best, best_j, hit_edge = start, currents(start).j_ext, False
    for direction in (-1, 1):
        prev = start
        for k in range(1, refine + 1):
            g = gamma + direction * k * fine
            if g < 0:
                break
            if U == 0 and has_complex_eigenvalues(J, g):
                if prev is best:
                    hit_edge = True
                break
            try:
                s = solve_stationary(SystemParams(J, g, U), prev.psi, prev.mu)
            except NewtonError:
                if prev is best:
                    hit_edge = True
                break
            if not is_pt_symmetric(s):
                if prev is best:
                    hit_edge = True
                break
            prev = s
            if not bdg_spectrum(s).stable:
                continue
            j = currents(s).j_ext
            if j > best_j:
                best, best_j, hit_edge = s, j, False
    return best, best_j, hit_edge


def max_current(J: float, U: float = 0.0, grid=None, refine: int = 10, census: SeedCensus | None = None,
                workers=None) -> MaxCurrent:
    """Largest ``j_ext`` carried by a BdG-stable PT-symmetric state.

    The coarse argmax over the grid is refined ``refine``-fold within one grid
    step on either side. ``at_ep`` flags a maximum sitting at the end of its
    branch (EP or fold), where the current is only marginally realizable.
    A result with ``found == False`` means no stable current exists.
    """
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    branches = _branches(J, U, grid, census, workers)
    best = None
    for br in branches:
        for s in br.states:
            if not is_pt_symmetric(s) or s.params.gamma <= 0:
                continue
            j = currents(s).j_ext
            if j <= CURRENT_FLOOR or (best is not None and j <= best[1]):
                continue
            if bdg_spectrum(s).stable:
                best = (s, j, br.id)
    if best is None:
        return MaxCurrent(J, U, None, None, None, False)
    state, _, bid = best
    step = float(np.min(np.diff(grid))) if len(grid) > 1 else 0.0
    if step > 0 and refine > 1:
        state, j, at_ep = _refine(J, U, state, state.params.gamma, step, refine)
    else:
        j, at_ep = currents(state).j_ext, False
    return MaxCurrent(J, U, float(state.params.gamma), bid, float(j), bdg_spectrum(state).stable, at_ep)
