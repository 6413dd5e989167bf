"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the validity domain of a bound or transform.

    ``limit`` carries the boundary of the validity domain when one exists
    (for instance the supremum of admissible deviations), so callers can
    report how far out of range the request was.
    """

    def __init__(self, message, limit=None):
        super().__init__(message)
        self.limit = limit


class ConfigError(ValueError):
    """A run configuration failed validation at load time."""
