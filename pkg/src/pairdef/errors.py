"""Exception hierarchy shared by every module of the package."""


class PairdefError(Exception):
    """Base class for all package errors."""


class ShapeError(PairdefError, ValueError):
    """Operands have incompatible parameter counts, degrees or lengths."""


class ConfigError(PairdefError, ValueError):
    """A model configuration or run specification is invalid."""


class UnsupportedError(PairdefError, NotImplementedError):
    """The request is outside the supported model class."""


class ModelError(PairdefError):
    """A model violates a structural requirement (e.g. a non-definite Gram matrix)."""


class ParseError(PairdefError, ValueError):
    """A serialized payload is malformed.  ``location`` names the offending field."""

    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class DegreeOverflowError(PairdefError, ValueError):
    """An operation would produce a form of antiholomorphic degree above n."""


class BandOverflowError(PairdefError, ArithmeticError):
    """A Fourier product would leave the model's mode box."""

    def __init__(self, message, order=None):
        self.order = order
        super().__init__(message)


class NotFirstOrderDeformation(PairdefError, ValueError):
    """A degree-1 form that is not closed was passed where a class was expected."""


class IncompatibleBasesError(PairdefError, ValueError):
    """Solutions passed to a diagram check use incompatible direction bases."""
