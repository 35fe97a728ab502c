"""Exception types shared across the toolkit."""


class CospikeError(Exception):
    """Base class for all toolkit errors."""


class InvalidOrderError(CospikeError, ValueError):
    """Difference order is negative, non-finite, or otherwise unusable."""


class InvalidOrderSetError(CospikeError, ValueError):
    """Order set is empty or contains duplicates."""


class ShapeError(CospikeError, ValueError):
    """Operands have incompatible shapes or lengths."""


class DegenerateSigmaError(CospikeError, ValueError):
    """Pooled analysis coefficients are all zero; no scale estimate exists."""


class UnderdeterminedFitError(CospikeError, ValueError):
    """Too few (or collinear) points to fit the variance model."""


class ParseError(CospikeError, ValueError):
    """A data file failed to parse; message carries the offending row."""


class ZeroReferenceError(CospikeError, ValueError):
    """Relative error against a zero reference signal is undefined."""


class ClusterCountError(CospikeError, ValueError):
    """Cluster count exceeds what the data or the label matcher supports."""


class ConfigError(CospikeError, ValueError):
    """An experiment configuration value is missing, malformed, or out of range."""
