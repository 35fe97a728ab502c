"""MATLAB spike-recording converter for the cospike toolkit."""

from .convert import (
    CLASS_KEYS,
    TIME_KEYS,
    TRACE_KEYS,
    ConversionJob,
    ConversionSummary,
    MissingVariableError,
    convert,
    extract_frames,
    load_container,
)

__all__ = [
    "CLASS_KEYS",
    "TIME_KEYS",
    "TRACE_KEYS",
    "ConversionJob",
    "ConversionSummary",
    "MissingVariableError",
    "convert",
    "extract_frames",
    "load_container",
]

__version__ = "0.1.0"
