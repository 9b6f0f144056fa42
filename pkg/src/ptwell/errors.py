"""Exception hierarchy shared by the ptwell modules."""


class PtwellError(Exception):
    """Base class for all library errors."""


class InvalidMatrixError(PtwellError, ValueError):
    """Non-square, empty, oversized or non-finite matrix input."""


class SingularMatrixError(PtwellError):
    """Linear system is singular to working precision."""

    def __init__(self, message, pivot=0.0):
        super().__init__(message)
        self.pivot = pivot


class EigenConvergenceError(PtwellError):
    """Eigenvalue iteration did not converge."""


class DegenerateLevelError(PtwellError):
    """A non-degenerate formula was applied to a degenerate level."""


class OrthonormalityError(PtwellError, ValueError):
    """A basis that must be orthonormal is not."""

    def __init__(self, message, defect=0.0):
        super().__init__(message)
        self.defect = defect


class ParityAdaptationError(PtwellError):
    """A degenerate cluster cannot be split into parity eigenvectors."""


class NoBracketError(PtwellError):
    """The requested parameter bracket does not enclose an exceptional point."""


class NewtonError(PtwellError):
    """Newton iteration failed; ``condition`` holds the last Jacobian condition estimate."""

    def __init__(self, message, condition=float("nan"), last=None):
        super().__init__(message)
        self.condition = condition
        self.last = last


class ContinuationError(PtwellError):
    """Continuation stopped early; ``branch`` holds everything computed so far."""

    def __init__(self, message, branch=None):
        super().__init__(message)
        self.branch = branch


class DivergenceError(PtwellError):
    """Time propagation blew up."""

    def __init__(self, message, time=float("nan")):
        super().__init__(message)
        self.time = time
