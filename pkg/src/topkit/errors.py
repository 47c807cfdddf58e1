"""Exception types shared across the package."""


class TopkitError(Exception):
    """Base class for errors raised by topkit."""


class ConfigError(TopkitError):
    """Bad job configuration: unknown key, bad value, missing required key."""


class DataError(TopkitError):
    """Malformed input data: corpus lines, run files, qrels, index files."""
