"""Exception types shared across the package.

Shape/dimension misuse raises plain ValueError; these classes exist so the
CLI can map failures onto its exit-code contract (2 config, 3 data,
4 checkpoint).
"""


class ConfigError(ValueError):
    """Invalid or unknown configuration key/value."""


class DataError(RuntimeError):
    """Dataset or image-content problem (empty directory, bad dimensions...)."""


class CheckpointError(RuntimeError):
    """Unreadable checkpoint or checkpoint/config mismatch."""
