"""Exceptions and warnings raised by the reconstruction toolkit."""


class NasvoxError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class ConfigurationError(NasvoxError, ValueError):
    """Invalid configuration value or command-line argument."""


class GeometryError(NasvoxError, ValueError):
    """Invalid mesh or a voxelization that cannot be used."""


class FormatError(NasvoxError, ValueError):
    """Malformed or unsupported file content."""


class SamplingError(NasvoxError, ValueError):
    """A voxel grid that cannot produce a training set."""


class NumericOverflowError(NasvoxError, ArithmeticError):
    """A network produced a non-finite intermediate value."""


class TrainingDivergedError(NasvoxError, ArithmeticError):
    """Training loss became non-finite.

    ``checkpoint`` holds a copy of the network as it was at the start of
    the epoch that diverged.
    """

    def __init__(self, message, checkpoint=None, epoch=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.epoch = epoch


class MetricError(NasvoxError, ValueError):
    """A metric is undefined for the given inputs."""


class VoxelizationWarning(UserWarning):
    """The three axis votes of the voxelizer disagree on many voxels."""


class SupportWarning(UserWarning):
    """A support set without an outer layer (fully occupied grid)."""
