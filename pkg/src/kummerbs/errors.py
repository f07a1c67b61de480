"""Exception hierarchy shared by every module."""


class KummerError(Exception):
    """Base class for all library errors."""


class DomainError(KummerError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateInputError(DomainError):
    """A full-rank construction was requested on a rank-deficient matrix."""


class NumericError(KummerError, ArithmeticError):
    """An internal numerical procedure failed (non-convergence, singular pivot)."""


class ConfigError(KummerError, ValueError):
    """A pricing request or run configuration is malformed."""


class PricingUndefinedError(DomainError):
    """The correlation point is indefinite, so no Gaussian law and no price exist."""

    def __init__(self, determinant, min_eigenvalue, message=None):
        self.determinant = float(determinant)
        self.min_eigenvalue = float(min_eigenvalue)
        if message is None:
            message = (
                "pricing undefined: correlation matrix is indefinite "
                f"(det = {self.determinant:.6g}, most negative eigenvalue = "
                f"{self.min_eigenvalue:.6g})"
            )
        super().__init__(message)
