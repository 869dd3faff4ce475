"""Exception types raised across the package."""


class EDGError(Exception):
    """Base class for all package errors."""


class NonFiniteIterate(EDGError, FloatingPointError):
    pass


class ConvergenceFailure(EDGError, RuntimeError):
    pass


class DimensionMismatch(EDGError, ValueError):
    pass


class IndexOutOfRange(EDGError, IndexError):
    pass


class TooLarge(EDGError, ValueError):
    pass


class TooMany(EDGError, ValueError):
    pass


class SingularC(EDGError, ArithmeticError):
    """A reduced-system scaling sigma_i*sigma_j - eps^2 is not positive."""


class NotPSD(EDGError, ValueError):
    pass


class DegenerateCloud(EDGError, ValueError):
    pass


class ParseError(EDGError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyCloud(EDGError, ValueError):
    pass
