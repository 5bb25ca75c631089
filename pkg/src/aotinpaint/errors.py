"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Two arrays that must agree in shape do not."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class UnreachableBucketError(RuntimeError):
    """Mask generation could not hit the requested hole-ratio bucket."""


class DivergenceError(RuntimeError):
    """A training loss became non-finite."""


class CheckpointError(RuntimeError):
    """Checkpoint file missing, corrupt, or incompatible with the config."""


class DataError(RuntimeError):
    """Image corpus could not be read or decoded."""
