"""Exception hierarchy shared by the numerical modules and the CLI."""


class PufferfishError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PufferfishError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(PufferfishError, ArithmeticError):
    """An iterative routine did not converge; indicates a numerics bug."""


class DegenerateSourceError(DomainError):
    """A Monge map was requested from a point mass onto a spread distribution."""


class InsufficientDataError(PufferfishError, ValueError):
    """Too few samples to fit the requested model."""


class DegenerateFitError(PufferfishError, ArithmeticError):
    """EM could not produce a usable mixture."""


class MarginalMismatchError(PufferfishError, ValueError):
    """A transport plan does not match the marginals of the mixtures it couples."""


class UnresolvedSecretError(PufferfishError, KeyError):
    """A discriminative pair names a secret that a prior belief does not model."""


class StructureError(PufferfishError, ValueError):
    """Priors do not have the structure a calibration rule requires."""


class QuadratureError(PufferfishError, ArithmeticError):
    """Numerical integration failed to reach the requested accuracy."""


class DataError(PufferfishError, ValueError):
    """Malformed or inconsistent input data (CSV, JSON)."""
