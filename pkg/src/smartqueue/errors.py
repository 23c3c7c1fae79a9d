"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not line up."""


class PreconditionError(ValueError):
    """An operation was called with arguments violating its contract."""


class StateError(RuntimeError):
    """An object was used in the wrong lifecycle state."""


class ConfigError(ValueError):
    """A scenario, checkpoint or run configuration is inconsistent."""


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss or parameter."""
