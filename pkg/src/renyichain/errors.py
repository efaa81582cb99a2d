"""Exception types raised by the library.

Errors that the CLI maps to the "dimension error" exit code derive from
:class:`DimensionError`; everything else derives from :class:`RenyiError`.
"""


class RenyiError(ValueError):
    """Base class for all library errors."""


class NotHermitian(RenyiError):
    pass


class NotPSD(RenyiError):
    pass


class ComputeOverflow(RenyiError):
    pass


class ZeroState(RenyiError):
    pass


class RankInvalid(RenyiError):
    pass


class DimTooLarge(RenyiError):
    pass


class OutOfRange(RenyiError):
    """A Rényi order or parameter triple left the admissible set."""


class ClassificationMismatch(RenyiError):
    """An interpolation check was asked for a triple of the wrong class."""


class DimensionError(RenyiError):
    """Base class for shape and label errors."""


class UnknownLabel(DimensionError):
    pass


class LabelPartitionInvalid(DimensionError):
    pass


class DimensionMismatch(DimensionError):
    pass


class MalformedInput(RenyiError):
    """Input file or argument could not be parsed."""
