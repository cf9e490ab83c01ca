"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid system description (reducible shift, bad shapes, bad config)."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class EnumerationCapError(DomainError):
    """Exhaustive enumeration would exceed the word-count cap."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class InvariantViolation(AssertionError):
    """A checked mathematical invariant does not hold numerically."""
