class VibrodiagError(Exception):
    """Base class for runtime failures raised by the package."""


class ConfigError(VibrodiagError, ValueError):
    """Invalid or inconsistent configuration."""


class TrainingDiverged(VibrodiagError):
    """Training produced a non-finite loss."""
