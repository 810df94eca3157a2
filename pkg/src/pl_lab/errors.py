class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid generation / run configuration."""


class ParseError(ValueError):
    """Malformed dataset or IDX file."""


class NumericalError(ArithmeticError):
    """NaN or otherwise unusable floating point result."""
