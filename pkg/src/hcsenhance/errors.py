"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems exit 2, data problems
exit 3, runtime failures such as training divergence exit 4.
"""


class HcsEnhanceError(Exception):
    """Base class for package-specific failures."""


class ConfigError(HcsEnhanceError):
    """Invalid or inconsistent run configuration."""


class DataError(HcsEnhanceError):
    """Missing, malformed, or mismatched input data."""


class DegenerateImageError(DataError):
    """Image cannot support the requested operation (e.g. constant input)."""


class TrainingDivergedError(HcsEnhanceError):
    """A loss term became non-finite during training."""
