"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical degeneracy (singular update, non-finite value, failed factorization)."""


class ConfigError(ValueError):
    """A run configuration is unusable (missing key, unparsable value, bad combination)."""


class DataError(ValueError):
    """An input file or array does not match its declared layout."""
