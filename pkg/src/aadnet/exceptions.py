"""Exception hierarchy shared by every subpackage."""


class AADError(Exception):
    """Base class for all errors raised by :mod:`aadnet`."""


class ShapeError(AADError, ValueError):
    """Array dimensions do not compose."""


class ParameterError(AADError, ValueError):
    """A scalar argument is outside its allowed range."""


class DegenerateBatchError(AADError, ValueError):
    """Too few elements to estimate batch statistics."""


class LabelError(AADError, ValueError):
    """Class labels are out of range or degenerate."""


class ConfigError(AADError, ValueError):
    """A configuration object violates its invariants."""


class StateError(AADError, RuntimeError):
    """A cache or model state does not match the parameters it is used with."""


class NonFiniteError(AADError, FloatingPointError):
    """A NaN or Inf appeared in a gradient or a loss."""


class TooShortError(AADError, ValueError):
    """A signal is shorter than an operation requires."""


class FoldError(AADError, ValueError):
    """Not enough samples to build the requested fold plan."""


class EmptyEvaluationError(AADError, ValueError):
    """Metrics were requested for zero evaluated samples."""


class FormatError(AADError, ValueError):
    """A binary or text file does not follow its on-disk format.

    ``offset`` is the byte position where parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset
