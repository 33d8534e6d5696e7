"""Exception types shared across the package."""


class TrackerError(Exception):
    """Base class for all package errors."""


class ShapeError(TrackerError):
    """Tensor shapes are incompatible for the requested op."""


class NumericError(TrackerError):
    """A forward op produced NaN/Inf from finite inputs."""


class ConfigError(TrackerError):
    """Invalid or inconsistent configuration."""


class GeometryError(TrackerError):
    """Token-grid metadata inconsistent with the sequence length."""


class DataError(TrackerError):
    """Malformed input data (sequences, files, checkpoints)."""
