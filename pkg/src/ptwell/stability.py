"""Bogoliubov-de Gennes stability of stationary states, with a time-domain cross-check.

Linearizing ``psi(t) = exp(-i mu t) (psi + u e^{-i w t} + v* e^{i w* t})``
gives ``M (u, v) = w (u, v)`` with

    M = [[ A,   B ],
         [-B*, -A*]],   A = H + 2U diag|psi|^2 - mu,  B = U diag(psi^2).

The spectrum is closed under ``w -> -w*`` and always holds the phase mode
``w = 0`` with eigenvector ``(psi, -psi*)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DivergenceError, PtwellError
from .linalg import eig_general
from .model import StationaryState, hamiltonian

STABILITY_TOL = 1e-8
RESIDUAL_TOL = 1e-10
MAX_KICK = 1e-4
MAX_DT = 1e-3
BLOWUP_NORM = 1e6


class UnconvergedStateError(PtwellError, ValueError):
    """BdG analysis requested for a state that does not solve the GPE."""


@dataclass(frozen=True)
class BdgReport:
    omegas: np.ndarray
    max_im: float
    stable: bool
    state_ref: StationaryState
    informational: bool = False

    @property
    def zero_mode_defect(self) -> float:
        return float(np.min(np.abs(self.omegas)))

    @property
    def symmetry_defect(self) -> float:
        """Largest distance from some ``-w*`` to its nearest ``w``."""
        mirrored = -self.omegas.conj()
        return float(max(np.min(np.abs(self.omegas - m)) for m in mirrored))


def bdg_matrix(state: StationaryState) -> np.ndarray:
    if state.residual_norm > RESIDUAL_TOL:
        raise UnconvergedStateError(f"state residual {state.residual_norm:.2e} exceeds {RESIDUAL_TOL:g}")
    psi, mu, p = state.psi, state.mu, state.params
    a = hamiltonian(p) + np.diag(2 * p.U * np.abs(psi) ** 2) - mu * np.eye(3)
    b = np.diag(p.U * psi**2)
    return np.block([[a, b], [-b.conj(), -a.conj()]])


def bdg_spectrum(state: StationaryState, tol: float = STABILITY_TOL) -> BdgReport:
    """Diagonalize the BdG matrix; stable iff every ``|Im w| <= tol``.

    For complex ``mu`` the verdict is flagged informational: such a state is
    not stationary in the first place.
    """
    omegas = eig_general(bdg_matrix(state)).eigenvalues
    max_im = float(np.max(np.abs(omegas.imag)))
    return BdgReport(omegas, max_im, max_im <= tol, state, informational=not state.is_real)


@numba.njit(cache=True)
def _rhs(psi, h, u):
    return -1j * (h @ psi + u * np.abs(psi) ** 2 * psi)


@numba.njit(cache=True)
def _rk4(psi0, h, u, dt, n_steps, every, blowup):
    n_out = n_steps // every + 1
    out = np.empty((n_out, psi0.shape[0]), dtype=np.complex128)
    psi = psi0.copy()
    out[0] = psi
    j = 1
    for k in range(1, n_steps + 1):
        k1 = _rhs(psi, h, u)
        k2 = _rhs(psi + 0.5 * dt * k1, h, u)
        k3 = _rhs(psi + 0.5 * dt * k2, h, u)
        k4 = _rhs(psi + dt * k3, h, u)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nrm = np.sqrt(np.sum(np.abs(psi) ** 2))
        if not nrm < blowup:
            return out[:j], k
        if k % every == 0:
            out[j] = psi
            j += 1
    return out[:j], -1


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    psi: np.ndarray
    norm: np.ndarray
    deviation: np.ndarray | None


def propagate(state: StationaryState, kick=None, t_end: float = 50.0, dt: float = MAX_DT,
              sample_every: int = 100, renormalize: bool = False) -> Trajectory:
    """RK4 integration of ``i dpsi/dt = H psi + U |psi|^2 psi`` from ``state.psi + kick``.

    ``deviation`` is ``||psi(t) - exp(-i mu t) state.psi||`` for real ``mu``
    and None otherwise. ``renormalize`` rescales the kicked start vector to
    unit norm, so the kick does not shift ``mu`` at first order.

    Raises DivergenceError once the norm exceeds 1e6.
    """
    kick = np.zeros(3, dtype=complex) if kick is None else np.asarray(kick, dtype=complex)
    if np.linalg.norm(kick) > MAX_KICK:
        raise ValueError(f"kick norm must not exceed {MAX_KICK:g}")
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"dt must lie in (0, {MAX_DT:g}]")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    psi0 = state.psi + kick
    if renormalize:
        psi0 = psi0 / np.linalg.norm(psi0)
    n_steps = int(round(t_end / dt))
    every = max(1, int(sample_every))
    h = np.ascontiguousarray(hamiltonian(state.params))
    samples, blown = _rk4(np.ascontiguousarray(psi0), h, float(state.params.U), float(dt), n_steps, every,
                          BLOWUP_NORM)
    if blown >= 0:
        raise DivergenceError(f"norm exceeded {BLOWUP_NORM:g}", time=blown * dt)
    times = np.arange(len(samples)) * every * dt
    norm = np.linalg.norm(samples, axis=1)
    deviation = None
    if state.is_real:
        ref = np.exp(-1j * state.mu.real * times)[:, None] * state.psi[None, :]
        deviation = np.linalg.norm(samples - ref, axis=1)
    return Trajectory(times, samples, norm, deviation)


@dataclass(frozen=True)
class GrowthReport:
    rate: float
    max_im: float
    window: tuple
    efoldings: float

    @property
    def relative_error(self) -> float:
        return abs(self.rate - self.max_im) / self.max_im


def measure_growth(state: StationaryState, kick_size: float = 1e-5, ceiling: float = 1e-2,
                   dt: float = MAX_DT, seed: int = 7) -> GrowthReport:
    """Exponential growth rate of a small kick, fitted to ``log deviation``.

    The fit window starts once the deviation has grown 20-fold (so the
    kick's projection onto the dominant mode has taken over) and ends at
    ``ceiling``, before nonlinear saturation. Raises PtwellError when the
    window spans fewer than 3 e-foldings.
    """
    report = bdg_spectrum(state)
    if report.stable:
        raise PtwellError("state is BdG-stable; there is no growth rate to measure")
    rng = np.random.default_rng(seed)
    kick = rng.normal(size=3) + 1j * rng.normal(size=3)
    kick *= kick_size / np.linalg.norm(kick)
    t_end = min(2000.0, 15.0 / report.max_im)
    try:
        traj = propagate(state, kick, t_end, dt, sample_every=50, renormalize=True)
    except DivergenceError as exc:
        raise PtwellError(f"propagation diverged at t={exc.time:.3g} before the fit window closed") from exc
    dev = traj.deviation
    start = np.flatnonzero(dev >= 20 * kick_size)
    stop = np.flatnonzero(dev >= ceiling)
    i0 = int(start[0]) if len(start) else len(dev)
    i1 = int(stop[0]) if len(stop) else len(dev) - 1
    if i1 <= i0 + 2:
        raise PtwellError("deviation did not grow through a usable fit window")
    t = traj.times[i0:i1 + 1]
    logd = np.log(dev[i0:i1 + 1])
    rate = float(np.polyfit(t, logd, 1)[0])
    efoldings = float(logd[-1] - logd[0])
    if efoldings < 3:
        raise PtwellError(f"fit window spans only {efoldings:.2f} e-foldings")
    return GrowthReport(rate, report.max_im, (float(t[0]), float(t[-1])), efoldings)
