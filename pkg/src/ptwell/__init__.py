"""PT-symmetric currents in a three-well condensate: spectra, perturbation series,
nonlinear stationary states, BdG stability and particle currents."""

from .errors import (
    ContinuationError,
    DegenerateLevelError,
    DivergenceError,
    EigenConvergenceError,
    InvalidMatrixError,
    NewtonError,
    NoBracketError,
    OrthonormalityError,
    ParityAdaptationError,
    PtwellError,
    SingularMatrixError,
)
from .linalg import Spectrum, eig_general, eigvals_general, solve_linear
from .model import (
    CurrentReport,
    StationaryState,
    SystemParams,
    build_h0,
    build_hp,
    check_pseudo_hermitian,
    currents,
    gpe_residual,
    hamiltonian,
    parity,
)
from .perturbation import (
    degenerate_coupling_matrix,
    first_order_splitting,
    kato_correction,
    kato_series,
    unperturbed_basis,
)
from .spectrum import Branch, EP2Result, find_ep2, sweep_gamma
from .nonlinear import (
    FoldRecord,
    continue_branch,
    detect_folds,
    discover_states,
    solve_stationary,
    track_states,
)
from .stability import BdgReport, bdg_matrix, bdg_spectrum, propagate
from .currents_analysis import current_sweep, max_current

__version__ = "0.1.0"
