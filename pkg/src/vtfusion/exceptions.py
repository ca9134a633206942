"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage errors exit 1, data and
format errors exit 2, numeric failures exit 3.
"""


class ShapeError(ValueError):
    """Tensor/array dimensions do not satisfy an operation's contract."""


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class FormatError(ValueError):
    """A file is corrupt or does not match the expected binary layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class VersionError(FormatError):
    """A file carries an unsupported format version."""


class SplitError(ValueError):
    """A dataset cannot be split as requested (e.g. too few trajectories)."""


class GenerationError(RuntimeError):
    """Sample generation failed repeatedly (e.g. no stable grasp found)."""


class NumericError(ArithmeticError):
    """A numeric quantity left its valid range (NaN/Inf loss, failed check)."""


class NoDetectionError(LookupError):
    """The requested object has no pixels in the segmentation mask."""
