"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was called with arguments violating its contract."""


class ShapeMismatchError(PreconditionError):
    """Two distributions do not share the same variable structure."""


class CapExceededError(RuntimeError):
    """A dense computation would exceed the configured memory cap."""
