"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific type that applies.
"""


class ConfigError(ValueError):
    """Invalid configuration: topology, window spec, model plan, run config."""


class DataError(ValueError):
    """Malformed or inconsistent dataset input."""


class ShapeError(ValueError):
    """Operands passed to a numeric primitive have incompatible shapes."""


class NumericError(ArithmeticError):
    """A primitive produced a non-finite value."""
