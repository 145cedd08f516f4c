class ConfigError(ValueError):
    """Invalid experiment or radio configuration."""


class PayloadSizeError(ValueError):
    """Payload does not fit the frame limits of the chosen SF."""
