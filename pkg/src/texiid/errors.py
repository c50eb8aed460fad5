"""Exception types raised by the library.

All of them derive from ``ValueError`` except ``NumericalError`` so callers
that already catch ``ValueError`` for bad input keep working.
"""


class ShapeError(ValueError):
    """Tensor shapes are incompatible for the requested operation."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class FormatError(ValueError):
    """An input file has an unsupported or malformed format."""


class IntegrityError(ValueError):
    """A judgment file is well-formed JSON but internally inconsistent."""


class EvaluationError(ValueError):
    """A metric is undefined for the given input (e.g. zero total weight)."""


class NumericalError(ArithmeticError):
    """A solver produced a non-finite intermediate value."""
