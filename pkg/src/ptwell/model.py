"""Triple-well model: Hamiltonian pieces, parity, GPE residual and currents.

Well 1 carries the gain ``+i*gamma``, well 3 the loss ``-i*gamma``; wells 1
and 3 are coupled with unit strength and both couple to well 2 with ``J``.
Mode amplitudes are normalized to ``sum |psi_i|^2 = 1`` so that ``U`` is a
pure nonlinearity strength.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMatrixError
from .linalg import as_matrix

GAUGE_FLOOR = 1e-12


@dataclass(frozen=True)
class SystemParams:
    J: float
    gamma: float
    U: float = 0.0

    def __post_init__(self):
        for name in ("J", "gamma", "U"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def out_of_scope(self) -> bool:
        """Negative couplings or rates are computable but outside the modelled regime."""
        return self.J < 0 or self.gamma < 0

    def with_(self, **changes) -> "SystemParams":
        d = {"J": self.J, "gamma": self.gamma, "U": self.U}
        d.update(changes)
        return SystemParams(**d)


@dataclass(frozen=True)
class StationaryState:
    psi: np.ndarray
    mu: complex
    params: SystemParams
    residual_norm: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def is_real(self) -> bool:
        return abs(self.mu.imag) <= 1e-10


@dataclass(frozen=True)
class CurrentReport:
    j_ext: float
    j12: float
    j13: float
    balance_defect: float

    @property
    def ratio(self):
        """j12/j13, or None when the direct channel carries no current."""
        return None if abs(self.j13) <= 1e-12 else self.j12 / self.j13


@dataclass(frozen=True)
class PseudoHermiticityReport:
    h0_ok: bool
    hp_ok: bool
    defects: dict


def build_h0(J: float) -> np.ndarray:
    if not math.isfinite(J):
        raise ValueError("J must be finite")
    return np.array([[0, -J, -1], [-J, 0, -J], [-1, -J, 0]], dtype=complex)


def build_hp() -> np.ndarray:
    return np.diag([1j, 0, -1j])


def parity() -> np.ndarray:
    return np.fliplr(np.eye(3)).astype(complex)


def hamiltonian(params: SystemParams) -> np.ndarray:
    """Full linear Hamiltonian H0(J) + gamma*HP."""
    return build_h0(params.J) + params.gamma * build_hp()


def check_pseudo_hermitian(h0, hp, p, tol: float = 1e-12) -> PseudoHermiticityReport:
    """Check P H0 = H0^+ P = H0 P and P HP = HP^+ P = -HP P."""
    h0, hp, p = (as_matrix(x) for x in (h0, hp, p))
    if not (h0.shape == hp.shape == p.shape):
        raise InvalidMatrixError(f"dimension mismatch: {h0.shape}, {hp.shape}, {p.shape}")

    def nrm(x):
        return float(np.linalg.norm(x))

    d = {
        "h0_pseudo": nrm(p @ h0 - h0.conj().T @ p),
        "h0_commute": nrm(h0.conj().T @ p - h0 @ p),
        "hp_pseudo": nrm(p @ hp - hp.conj().T @ p),
        "hp_anticommute": nrm(hp.conj().T @ p + hp @ p),
    }
    h0_ok = d["h0_pseudo"] <= tol and d["h0_commute"] <= tol
    hp_ok = d["hp_pseudo"] <= tol and d["hp_anticommute"] <= tol
    return PseudoHermiticityReport(h0_ok, hp_ok, d)


def gpe_residual(psi, mu: complex, params: SystemParams) -> np.ndarray:
    """Componentwise ``sum_j H_ij psi_j + U |psi_i|^2 psi_i - mu psi_i``."""
    psi = np.asarray(psi, dtype=complex)
    return hamiltonian(params) @ psi + params.U * np.abs(psi) ** 2 * psi - mu * psi


def gauge_index(psi, floor: float = GAUGE_FLOOR) -> int:
    """Component made real and non-negative by the gauge convention.

    Well 2 when it is populated, otherwise the first component whose modulus
    ties (to 1e-9 relative) with the largest one.
    """
    a = np.abs(psi)
    if a[1] > floor:
        return 1
    return int(np.flatnonzero(a >= a.max() * (1 - 1e-9))[0])


def gauge_fix(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    k = gauge_index(psi)
    if abs(psi[k]) == 0:
        return psi.copy()
    return psi * (abs(psi[k]) / psi[k])


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return psi / np.linalg.norm(psi)


def phase_distance(a, b) -> float:
    """``min_theta ||a - exp(i theta) b||``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


def make_state(psi, mu: complex, params: SystemParams, **meta) -> StationaryState:
    """Normalize and gauge-fix ``psi`` and record its GPE residual."""
    psi = gauge_fix(normalize(psi))
    res = float(np.linalg.norm(gpe_residual(psi, mu, params)))
    return StationaryState(psi, complex(mu), params, res, dict(meta))


def currents(state: StationaryState) -> CurrentReport:
    """External influx and channel currents out of the gain well."""
    if state.residual_norm > 1e-8:
        warnings.warn(
            f"currents of a poorly converged state (residual {state.residual_norm:.2e})",
            RuntimeWarning,
            stacklevel=2,
        )
    psi = state.psi
    p = state.params
    j_ext = 2 * p.gamma * abs(psi[0]) ** 2
    j12 = 2 * p.J * (np.conj(psi[0]) * psi[1]).imag
    j13 = 2 * (np.conj(psi[0]) * psi[2]).imag
    return CurrentReport(float(j_ext), float(j12), float(j13), float(abs(j_ext - j12 - j13)))
