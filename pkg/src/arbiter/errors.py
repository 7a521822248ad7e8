"""Exception types shared across the package."""


class ConfigurationError(Exception):
    """Raised when a config value or a sampled scene cannot be realized."""


class PretrainingError(Exception):
    """Raised when supervised pretraining fails to reach its validation bar."""
