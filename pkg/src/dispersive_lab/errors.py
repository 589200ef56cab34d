"""Exception hierarchy shared by every module of the package."""


class DispersiveLabError(Exception):
    """Base class for all package errors."""


class ZeroModeSingular(DispersiveLabError):
    """A negative-order multiplier met a nonzero zero-frequency coefficient."""


class DomainError(DispersiveLabError, ValueError):
    """An argument lies outside the domain of the requested formula."""


class MissingTimeDerivative(DispersiveLabError):
    """A time derivative was requested from a state that does not carry one."""


class GridMismatch(DispersiveLabError, ValueError):
    """Two fields that must share a grid do not."""


class WrongKind(DispersiveLabError, TypeError):
    """An evolution state of the wrong order was supplied."""


class TrajectoryOutOfBox(DispersiveLabError):
    """A sampled trajectory leaves the half period of the spatial box."""


class InsufficientResolution(DispersiveLabError):
    """Too few quadrature nodes to honour the requested accuracy."""


class NoCriticalPoint(DispersiveLabError):
    """The phase has no stationary point (for instance y = 0)."""


class NonConvergent(DispersiveLabError):
    """An adaptive quadrature could not certify its tolerance."""


class PreconditionViolated(DispersiveLabError, ValueError):
    """Parameters violate a stated precondition of an estimate."""


class GridTooNarrow(DispersiveLabError):
    """A sampled profile carries significant mass outside the grid."""


class RangeError(DispersiveLabError, ValueError):
    """A parameter is outside its admissible range."""


class SignChange(DispersiveLabError, ValueError):
    """A function required to be single-signed changes sign."""


class HypothesisViolated(DispersiveLabError, ValueError):
    """Parameters violate the hypotheses of a lower-bound statement."""


class DegenerateInput(DispersiveLabError, ValueError):
    """Input data are insufficient for the requested fit."""


class ConfigError(DispersiveLabError):
    """A configuration file is missing or malformed."""


class EmptyReport(DispersiveLabError):
    """A report was requested with no results."""


class IoError(DispersiveLabError, OSError):
    """Reading or writing an artifact failed."""
