"""Shared exception types, mapped onto CLI exit codes by ielab.cli."""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent component wiring."""


class DataValidationError(ValueError):
    """Corpus or record content violates the documented schema."""


class ContractError(RuntimeError):
    """An operation was called outside its documented contract."""


class CheckpointMismatchError(ValueError):
    """Checkpoint contents do not match the requested configuration."""
