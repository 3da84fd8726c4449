"""Exception types shared across the package.

Each CLI-visible failure maps onto one of these so the command layer can
emit a single machine-parsable error category.
"""


class AwsrnError(Exception):
    """Base class for all package errors."""

    category = "error"


class ShapeError(AwsrnError, ValueError):
    """Tensor or kernel shapes are incompatible for an operation."""

    category = "shape-error"


class ConfigError(AwsrnError, ValueError):
    """Invalid model/training configuration or config-file contents."""

    category = "config-error"


class DataError(AwsrnError, ValueError):
    """Image decoding or dataset layout problems."""

    category = "data-error"


class CheckpointError(AwsrnError, ValueError):
    """Base class for checkpoint file problems."""

    category = "checkpoint-error"


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic bytes."""


class VersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class TruncatedError(CheckpointError):
    """File ended in the middle of a parameter blob."""


class RegistryMismatchError(CheckpointError):
    """Stored parameters do not match the registry implied by the config."""


class PruneError(AwsrnError, ValueError):
    """A prune request would remove every reconstruction branch."""

    category = "prune-error"


class TrainingDivergedError(AwsrnError, RuntimeError):
    """Loss became non-finite during training."""

    category = "train-diverged"
