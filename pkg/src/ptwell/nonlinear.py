"""Stationary states of the three-mode GPE with on-site interaction.

Unknowns are packed as the real 8-vector ``(Re psi, Im psi, Re mu, Im mu)``.
The eight equations are the real and imaginary parts of the GPE residual,
the normalization ``||psi||^2 = 1`` and the phase condition
``Im <ref, psi> = 0`` against a reference vector, which removes the global
U(1) freedom without singling out a component that might vanish.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .errors import ContinuationError, NewtonError, SingularMatrixError
from .linalg import eig_general, solve_linear
from .model import (
    StationaryState,
    SystemParams,
    build_h0,
    build_hp,
    hamiltonian,
    make_state,
    normalize,
    phase_distance,
)
from .spectrum import Branch, linear_states, pt_defect

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
MAX_ITER = 200
MAX_HALVINGS = 8
PT_TOL = 1e-8


def pack(psi, mu) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.concatenate([psi.real, psi.imag, [complex(mu).real, complex(mu).imag]])


def unpack(x):
    x = np.asarray(x, dtype=float)
    return x[0:3] + 1j * x[3:6], complex(x[6], x[7])


def _split(z) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=0)


@dataclass(frozen=True)
class NewtonProblem:
    """GPE root problem at fixed parameters with a phase reference."""

    params: SystemParams
    ref: np.ndarray

    def residual(self, x) -> np.ndarray:
        psi, mu = unpack(x)
        p = self.params
        r = hamiltonian(p) @ psi + p.U * np.abs(psi) ** 2 * psi - mu * psi
        return np.concatenate([r.real, r.imag, [np.vdot(psi, psi).real - 1.0, np.vdot(self.ref, psi).imag]])

    def jacobian(self, x) -> np.ndarray:
        psi, mu = unpack(x)
        p = self.params
        a = hamiltonian(p) + np.diag(2 * p.U * np.abs(psi) ** 2) - mu * np.eye(3)
        b = np.diag(p.U * psi**2)
        jac = np.zeros((8, 8))
        jac[:6, 0:3] = _split(a + b)
        jac[:6, 3:6] = _split(1j * (a - b))
        jac[:6, 6] = _split(-psi)
        jac[:6, 7] = _split(-1j * psi)
        jac[6, 0:3] = 2 * psi.real
        jac[6, 3:6] = 2 * psi.imag
        jac[7, 0:3] = -self.ref.imag
        jac[7, 3:6] = self.ref.real
        return jac

    def gamma_derivative(self, x) -> np.ndarray:
        psi, _ = unpack(x)
        return np.concatenate([_split(build_hp() @ psi), [0.0, 0.0]])

    def condition(self, x) -> float:
        return float(np.linalg.cond(self.jacobian(x)))


def rayleigh_mu(psi, params: SystemParams) -> complex:
    psi = np.asarray(psi, dtype=complex)
    h = hamiltonian(params) + np.diag(params.U * np.abs(psi) ** 2)
    return complex(np.vdot(psi, h @ psi) / np.vdot(psi, psi))


def newton(problem: NewtonProblem, x0, tol: float = NEWTON_TOL, max_iter: int = MAX_ITER):
    """Damped Newton iteration; returns ``(x, iterations)``."""
    x = np.array(x0, dtype=float)
    f = problem.residual(x)
    fn = np.linalg.norm(f)
    for it in range(max_iter):
        if fn <= tol:
            return x, it
        jac = problem.jacobian(x)
        try:
            dx = solve_linear(jac, -f)
        except SingularMatrixError as exc:
            raise NewtonError(f"singular Jacobian: {exc}", condition=float(np.linalg.cond(jac)), last=x) from exc
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            x_new = x + lam * dx
            f_new = problem.residual(x_new)
            if np.linalg.norm(f_new) < fn:
                break
            lam *= 0.5
        x, f = x_new, f_new
        fn = np.linalg.norm(f)
    if fn <= tol:
        return x, max_iter
    raise NewtonError(f"no convergence after {max_iter} iterations (residual {fn:.2e})",
                      condition=problem.condition(x), last=x)


def solve_stationary(params: SystemParams, seed, mu_seed=None, tol: float = NEWTON_TOL,
                     max_iter: int = MAX_ITER) -> StationaryState:
    """Newton solve of the stationary GPE from a seed vector.

    ``mu_seed`` defaults to the Rayleigh quotient of the seed under
    ``H + U diag|seed|^2``. The result is normalized and gauge fixed; its
    ``meta`` records iterations and the Jacobian condition number.
    """
    seed = np.asarray(seed, dtype=complex)
    if not np.all(np.isfinite(seed)) or np.linalg.norm(seed) == 0:
        raise ValueError("seed must be a finite nonzero vector")
    seed = normalize(seed)
    if mu_seed is None:
        mu_seed = rayleigh_mu(seed, params)
    problem = NewtonProblem(params, seed)
    x, iters = newton(problem, pack(seed, mu_seed), tol, max_iter)
    psi, mu = unpack(x)
    state = make_state(psi, mu, params, iterations=iters, condition=problem.condition(x))
    if state.residual_norm > 1e-10:
        raise NewtonError(f"gauge-fixed state fails residual check ({state.residual_norm:.2e})")
    return state


def same_state(a: StationaryState, b: StationaryState, radius: float = 1e-6, mu_tol: float = 1e-8) -> bool:
    return abs(a.mu - b.mu) <= mu_tol and phase_distance(a.psi, b.psi) <= radius


def is_pt_symmetric(state: StationaryState, tol: float = PT_TOL) -> bool:
    return abs(state.mu.imag) <= 1e-10 and pt_defect(state.psi) <= tol


def _sort_key(s: StationaryState):
    return (round(s.mu.real, 10), round(s.mu.imag, 10)) + tuple(
        v for z in s.psi for v in (round(z.real, 10), round(z.imag, 10))
    )


@dataclass(frozen=True)
class SeedCensus:
    """Seed families for the multistart search.

    ``amplitudes`` and ``phases`` span the PT-symmetric ansatz
    ``(a e^{i phi}, b, a e^{-i phi})`` with ``b`` fixed by normalization;
    ``signed`` adds the mirrored amplitudes ``-a`` (phases beyond +-pi/2).
    """

    linear: bool = True
    amplitudes: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    phases: tuple = tuple(k * math.pi / 8 for k in range(-4, 5))
    signed: bool = False
    n_random: int = 64
    rng_seed: int = 1234
    dedup_radius: float = 1e-6
    mu_tol: float = 1e-8

    def seeds(self, J: float) -> list:
        out = []
        if self.linear:
            out.extend(s.psi for s in linear_states(SystemParams(J, 0.0)))
        amps = list(self.amplitudes) + ([-a for a in self.amplitudes] if self.signed else [])
        for a in amps:
            b = math.sqrt(max(0.0, 1.0 - 2.0 * a * a))
            for phi in self.phases:
                out.append(np.array([a * np.exp(1j * phi), b, a * np.exp(-1j * phi)]))
        rng = np.random.default_rng(self.rng_seed)
        for _ in range(self.n_random):
            out.append(rng.normal(size=3) + 1j * rng.normal(size=3))
        return out


def dedup(states, radius: float = 1e-6, mu_tol: float = 1e-8) -> list:
    unique = []
    for s in states:
        if not any(same_state(s, u, radius, mu_tol) for u in unique):
            unique.append(s)
    return sorted(unique, key=_sort_key)


def discover_states(params: SystemParams, census: SeedCensus | None = None, workers=None) -> list:
    """All distinct stationary states reached from the seed census.

    States are tagged with ``meta['pt_defect']`` and sorted by
    ``(Re mu, Im mu, psi)``.
    """
    census = census or SeedCensus()

    def attempt(seed):
        try:
            return solve_stationary(params, seed)
        except (NewtonError, ValueError):
            return None

    found = [s for s in pmap(attempt, census.seeds(params.J), workers) if s is not None]
    # broken states come in pairs (psi, mu) <-> (P psi*, mu*); seed the partner explicitly
    images = [s.psi[::-1].conj() for s in found if pt_defect(s.psi) > PT_TOL]
    found += [s for s in pmap(attempt, images, workers) if s is not None]
    out = dedup(found, census.dedup_radius, census.mu_tol)
    for s in out:
        s.meta["pt_defect"] = pt_defect(s.psi)
    return out


def continue_in_u(params: SystemParams, steps: int = 40) -> list:
    """Follow the linear eigenstates at ``(J, gamma)`` from U=0 to ``params.U``.

    Returns one entry per linear state, ``None`` where the natural
    continuation in U failed.
    """
    out = []
    for lin in linear_states(params.with_(U=0.0)):
        state = lin
        try:
            for k in range(1, steps + 1):
                p = params.with_(U=params.U * k / steps)
                state = solve_stationary(p, state.psi, state.mu)
        except NewtonError:
            state = None
        out.append(state)
    return out


def classify_states(params: SystemParams, states: list, steps: int = 40) -> list:
    """Label each state ``'continued'`` (U-continuation of a linear state),
    ``'new'`` (PT-symmetric, not continued) or ``'broken'``."""
    continued = [c for c in continue_in_u(params, steps) if c is not None]
    labels = []
    for s in states:
        if any(same_state(s, c, 1e-6, 1e-8) for c in continued):
            labels.append("continued")
        elif is_pt_symmetric(s):
            labels.append("new")
        else:
            labels.append("broken")
    return labels


def track_states(J: float, U: float, grid, census: SeedCensus | None = None, workers=None,
                 classify: bool = True) -> list:
    """Natural-parameter tracking over an ascending gamma grid.

    Every state found by the census at ``grid[0]`` starts a branch; each
    branch is followed with a secant predictor until Newton fails, jumps away
    or lands on a state already claimed by a closer branch (the usual fate at
    a fold). Branch labels carry ``kind`` from :func:`classify_states`,
    evaluated at the first positive grid value.
    """
    grid = np.asarray(grid, dtype=float)
    start = discover_states(SystemParams(J, grid[0], U), census, workers)
    tracks = [[s] for s in start]
    alive = [True] * len(tracks)
    for k in range(1, len(grid)):
        params = SystemParams(J, grid[k], U)
        proposals = {}
        for b, tr in enumerate(tracks):
            if not alive[b]:
                continue
            prev = tr[-1]
            if len(tr) > 1:
                older = tr[-2]
                ph = np.vdot(older.psi, prev.psi)
                ph = ph / abs(ph) if abs(ph) > 0 else 1.0
                pred_psi = 2 * prev.psi - ph * older.psi
                pred_mu = 2 * prev.mu - older.mu
            else:
                pred_psi, pred_mu = prev.psi, prev.mu
            try:
                s = solve_stationary(params, pred_psi, pred_mu)
            except NewtonError:
                alive[b] = False
                continue
            jump = phase_distance(s.psi, prev.psi)
            if jump > max(0.1, 20 * (grid[k] - grid[k - 1])):
                alive[b] = False
                continue
            proposals[b] = (s, jump)
        taken = []
        for b in sorted(proposals, key=lambda b: proposals[b][1]):
            s = proposals[b][0]
            if any(same_state(s, t) for t in taken):
                alive[b] = False
                continue
            taken.append(s)
            tracks[b].append(s)
        if not any(alive):
            break

    kinds = None
    if classify and U != 0:
        positive = [g for g in grid if g > 0]
        if positive:
            g_ref = positive[0]
            ref_states = [next((s for s in tr if s.params.gamma == g_ref), None) for tr in tracks]
            present = [s for s in ref_states if s is not None]
            labels = iter(classify_states(SystemParams(J, g_ref, U), present))
            kinds = [next(labels) if s is not None else None for s in ref_states]

    branches = []
    for b, tr in enumerate(tracks):
        lab = {
            "id": b,
            "parameter": "gamma",
            "J": J,
            "U": U,
            "kind": kinds[b] if kinds else None,
            "pt_defect": [pt_defect(s.psi) for s in tr],
        }
        branches.append(Branch(np.array([s.params.gamma for s in tr]), tr, lab))
    return branches


@dataclass(frozen=True)
class ContinuationConfig:
    ds0: float = 0.01
    ds_min: float = 1e-6
    ds_max: float = 0.02
    grow: float = 1.3
    shrink: float = 0.5
    grow_after: int = 3
    gamma_min: float = 0.0
    gamma_max: float = 2.0
    max_arclength: float = 10.0
    max_steps: int = 20000
    corrector_iter: int = 12
    tol: float = NEWTON_TOL


def _tangent(problem: NewtonProblem, x, gamma_dir_prev) -> np.ndarray:
    jac = np.zeros((9, 9))
    jac[:8, :8] = problem.jacobian(x)
    jac[:8, 8] = problem.gamma_derivative(x)
    jac[8, :] = gamma_dir_prev
    rhs = np.zeros(9)
    rhs[8] = 1.0
    t = solve_linear(jac, rhs)
    t /= np.linalg.norm(t)
    if np.dot(t, gamma_dir_prev) < 0:
        t = -t
    return t


def _corrector(J, U, ref, xg_pred, t, cfg: ContinuationConfig):
    xg = xg_pred.copy()
    for _ in range(cfg.corrector_iter):
        problem = NewtonProblem(SystemParams(J, xg[8], U), ref)
        f = np.concatenate([problem.residual(xg[:8]), [np.dot(t, xg - xg_pred)]])
        if np.linalg.norm(f) <= cfg.tol:
            return xg
        jac = np.zeros((9, 9))
        jac[:8, :8] = problem.jacobian(xg[:8])
        jac[:8, 8] = problem.gamma_derivative(xg[:8])
        jac[8, :] = t
        xg = xg + solve_linear(jac, -f)
    problem = NewtonProblem(SystemParams(J, xg[8], U), ref)
    f = np.concatenate([problem.residual(xg[:8]), [np.dot(t, xg - xg_pred)]])
    if np.linalg.norm(f) <= cfg.tol:
        return xg
    raise NewtonError(f"corrector did not converge (residual {np.linalg.norm(f):.2e})")


def continue_branch(start: StationaryState, direction: int = 1, config: ContinuationConfig | None = None,
                    branch_id=None) -> Branch:
    """Pseudo-arclength continuation in ``(psi, mu, gamma)`` from a converged state.

    ``direction`` (+1/-1) sets the initial sense of gamma. Folds are passed
    (gamma reverses along arclength). Stops when gamma leaves
    ``[gamma_min, gamma_max]`` (the last point is pinned to the bound), when
    the arclength budget is spent, or after ``max_steps``.

    Raises ContinuationError carrying the partial branch on step underflow.
    """
    cfg = config or ContinuationConfig()
    J, U = start.params.J, start.params.U
    x = pack(start.psi, start.mu)
    xg = np.concatenate([x, [start.params.gamma]])
    guess = np.zeros(9)
    guess[8] = float(np.sign(direction) or 1)
    t = _tangent(NewtonProblem(start.params, start.psi), x, guess)

    s_vals = [0.0]
    states = [start]
    dgds = [t[8]]
    arclength = 0.0
    ds = cfg.ds0
    streak = 0
    termination = "max_steps"

    def build(term):
        lab = {
            "id": branch_id,
            "parameter": "arclength",
            "J": J,
            "U": U,
            "direction": direction,
            "dgamma_ds": list(dgds),
            "pt_defect": [pt_defect(st.psi) for st in states],
            "termination": term,
        }
        return Branch(np.array(s_vals), list(states), lab)

    for _ in range(cfg.max_steps):
        ref = unpack(xg[:8])[0]
        pred = xg + ds * t
        try:
            new = _corrector(J, U, ref, pred, t, cfg)
            chord = np.linalg.norm(new - xg)
            if chord > 2.0 * ds:
                raise NewtonError("corrector jumped away from the predictor")
            t_new = _tangent(NewtonProblem(SystemParams(J, new[8], U), ref), new[:8], t)
        except (NewtonError, SingularMatrixError):
            ds *= cfg.shrink
            streak = 0
            if ds < cfg.ds_min:
                raise ContinuationError("step size underflow", build("step_underflow"))
            continue

        gamma = new[8]
        if gamma < cfg.gamma_min or gamma > cfg.gamma_max:
            bound = cfg.gamma_min if gamma < cfg.gamma_min else cfg.gamma_max
            w = (bound - xg[8]) / (gamma - xg[8])
            guess_x = (1 - w) * xg[:8] + w * new[:8]
            psi_b, mu_b = unpack(guess_x)
            try:
                end = solve_stationary(SystemParams(J, bound, U), psi_b, mu_b)
                seg = w * chord
                if seg > 0:
                    arclength += seg
                    s_vals.append(arclength)
                    states.append(end)
                    dgds.append(t_new[8])
            except NewtonError:
                pass
            termination = "gamma_bound"
            break

        arclength += chord
        xg, t = new, t_new
        psi, mu = unpack(xg[:8])
        states.append(make_state(psi, mu, SystemParams(J, gamma, U)))
        s_vals.append(arclength)
        dgds.append(t[8])
        streak += 1
        if streak >= cfg.grow_after:
            ds = min(cfg.ds_max, ds * cfg.grow)
            streak = 0
        if arclength >= cfg.max_arclength:
            termination = "arclength"
            break
    return build(termination)


@dataclass(frozen=True)
class FoldRecord:
    gamma_fold: float
    colliding_state_pair: tuple
    estimator: str = "arclength-turning"
    index: int = -1
    mu_fold: complex = 0j
    branch_id: object = None


def detect_folds(branch: Branch) -> list:
    """Turning points of gamma along an arclength-ordered branch.

    A fold sits where ``dgamma/ds`` changes sign; its position is the vertex
    of the parabola ``gamma(s)`` through the three points around the extremal
    gamma.
    """
    dg = branch.labels.get("dgamma_ds")
    if dg is None:
        raise ValueError("branch has no tangent data; use continue_branch output")
    gam = branch.gammas
    s = branch.param_values
    folds = []
    for k in range(1, len(branch)):
        if dg[k - 1] == 0 or dg[k] == 0 or np.sign(dg[k - 1]) == np.sign(dg[k]):
            continue
        peak = dg[k - 1] > 0
        m = k - 1 if (gam[k - 1] >= gam[k]) == peak else k
        m = min(max(m, 1), len(branch) - 2)
        local = s[m - 1:m + 2] - s[m]
        coeffs = np.polyfit(local, gam[m - 1:m + 2], 2)
        s_star = 0.0
        if coeffs[0] != 0:
            s_star = -coeffs[1] / (2 * coeffs[0])
            if abs(s_star) > max(local[2], -local[0]):
                s_star = 0.0
        g_fold = float(np.polyval(coeffs, s_star))
        mus = np.array([st.mu for st in branch.states[m - 1:m + 2]])
        mu_fold = complex(np.polyval(np.polyfit(local, mus.real, 2), s_star),
                          np.polyval(np.polyfit(local, mus.imag, 2), s_star))
        folds.append(FoldRecord(g_fold, (branch.states[k - 1], branch.states[k]), "arclength-turning", k,
                                mu_fold, branch.id))
    return folds


def trace_folds(states, config: ContinuationConfig | None = None, branch_ids=None, gamma_tol: float = 1e-4,
                mu_tol: float = 1e-3) -> tuple:
    """Continue each state towards larger gamma and collect distinct folds.

    A fold shared by two partner branches is reported once. Returns
    ``(folds, branches, failures)``; ``failures`` lists the ids whose
    continuation stopped on step underflow (their partial branches are kept).
    """
    ids = list(range(len(states))) if branch_ids is None else list(branch_ids)
    folds, branches, failures = [], [], []
    for bid, st in zip(ids, states):
        try:
            br = continue_branch(st, +1, config, branch_id=bid)
        except ContinuationError as exc:
            log.warning("continuation of branch %s stopped early: %s", bid, exc)
            br = exc.branch
            failures.append(bid)
        branches.append(br)
        for f in detect_folds(br):
            if not any(abs(f.gamma_fold - g.gamma_fold) <= gamma_tol and abs(f.mu_fold - g.mu_fold) <= mu_tol
                       for g in folds):
                folds.append(f)
    folds.sort(key=lambda f: (f.gamma_fold, f.mu_fold.real))
    return folds, branches, failures


def linear_reference(J: float, gamma: float) -> np.ndarray:
    """Eigenvalues of the linear Hamiltonian, for cross-checks against U=0 branches."""
    return eig_general(build_h0(J) + gamma * build_hp()).eigenvalues
