"""Exception types carrying machine-readable error codes."""


class DelayEstError(Exception):
    """Numeric or runtime failure, tagged with a stable code such as
    ``NONPOSITIVE_INFO`` or ``GRID_MISMATCH``."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class ConfigError(DelayEstError):
    """Invalid model or command configuration."""
