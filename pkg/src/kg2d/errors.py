"""Exception and warning types shared across the package."""


class GridError(ValueError):
    """Invalid grid parameters or mismatched grids."""


class SnapshotError(ValueError):
    """Malformed or truncated snapshot file."""


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


class ResolutionWarning(UserWarning):
    """A transformed field has meaningful content outside the resolved region."""
