"""Exception hierarchy shared by the library and the CLI."""


class ThetaNormError(Exception):
    pass


class ConfigError(ThetaNormError, ValueError):
    """Bad argument or malformed spec file (CLI exit code 2)."""


class PreconditionError(ThetaNormError, ValueError):
    pass


class ResourceBudgetError(ThetaNormError, MemoryError):
    """A request would exceed the configured memory budget (CLI exit code 3)."""


class NumericError(ThetaNormError, ArithmeticError):
    """Overflow, non-finite result or a pole (CLI exit code 3)."""
