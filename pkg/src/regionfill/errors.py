"""Package-level exception types mapped to CLI exit codes."""


class ConfigError(Exception):
    """Invalid configuration or unusable input files (exit code 2)."""


class NumericError(Exception):
    """Non-finite values encountered during training (exit code 3)."""
