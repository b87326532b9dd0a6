"""Exception types shared across the package."""


class DomainError(ValueError):
    """A coordinate left the region where the model metric is positive definite."""


class DegenerateCriticalPointError(ValueError):
    """A critical point with vanishing second derivative was passed to a
    routine that requires a non-degenerate (Morse) critical point."""


class PreconditionError(ValueError):
    """An operation was called with inputs violating its documented preconditions."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
