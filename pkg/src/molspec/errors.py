"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration input (bad field, missing key, out-of-range value)."""


class DataError(ValueError):
    """Malformed or inconsistent experimental data file."""


class QuadratureError(RuntimeError):
    """A fixed-grid quadrature failed its self-convergence check."""


class NumericalError(RuntimeError):
    """A numerical contract could not be met (degenerate nullspace,
    tolerance failure, non-finite values)."""
