"""Offline screenshot tagging engine."""

from .errors import (
    ConfigError,
    EngineError,
    EntityNotFound,
    FormatError,
    InvalidInputError,
    NoSignalError,
    ParseError,
    SamplingError,
    ScreentagsError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EngineError",
    "EntityNotFound",
    "FormatError",
    "InvalidInputError",
    "NoSignalError",
    "ParseError",
    "SamplingError",
    "ScreentagsError",
    "__version__",
]
