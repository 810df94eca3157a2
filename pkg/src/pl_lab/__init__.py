"""Average-based partial-label learning with bounded losses: generators, exact oracle, trainer."""

__version__ = "0.1.0"
