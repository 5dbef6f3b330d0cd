"""Exception types shared by all regbridge modules."""


class RegbridgeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RegbridgeError, ValueError):
    """An input has an empty or mismatched shape."""


class ConfigError(RegbridgeError, ValueError):
    """A hyperparameter or configuration value is out of its legal range."""


class SingularDesignError(RegbridgeError, ValueError):
    """The design matrix is rank deficient; no pseudo-inverse fallback is taken."""


class SolverError(RegbridgeError, RuntimeError):
    """An iterative solver diverged or exhausted its budget without converging."""


class BudgetError(RegbridgeError, ValueError):
    """A brute-force oracle refused a problem that exceeds its evaluation budget."""


class PlotError(RegbridgeError, ValueError):
    """A figure cannot be rendered from the given data."""
