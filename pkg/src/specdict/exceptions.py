"""Exception types raised by specdict."""


class CifarFormatError(ValueError):
    """Raised when a CIFAR-10 binary file does not match the record layout."""


class CorruptRecordError(CifarFormatError):
    """Raised when a record inside a CIFAR-10 binary file is invalid."""


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky factorization hits a non-positive pivot."""


class SingularMatrixError(ValueError):
    """Raised when a normal-equation system cannot be solved without regularization."""


class TrainingDivergedError(FloatingPointError):
    """Raised when the training loss becomes non-finite.

    The message names the first non-finite parameter (or states that all
    parameters are finite and only the loss overflowed) so that gradient
    bugs are surfaced instead of clamped away.
    """


class CheckpointError(RuntimeError):
    """Raised on malformed, truncated, or version-incompatible checkpoints."""


class MissingPriorError(RuntimeError):
    """Raised when sampling is requested from a checkpoint without a fitted prior."""
