"""Exception hierarchy shared across the engine."""


class ShopQLError(Exception):
    """Base class for all engine errors."""


class CatalogError(ShopQLError):
    """Malformed catalog file or inconsistent rows."""


class ConfigError(ShopQLError):
    """Invalid schema / strategy / engine configuration."""


class FormError(ShopQLError):
    """Logical form violates its structural invariants."""


class GrammarError(ShopQLError):
    """Unusable grammar (bad production file, or no enabled productions)."""


class TrainingError(ShopQLError):
    """Degenerate or unusable training data."""


class SchemaMismatchError(ShopQLError):
    """Components built against different knowledge-base schemas."""
