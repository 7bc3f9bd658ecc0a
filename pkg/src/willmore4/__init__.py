"""Conformal Willmore analysis for surfaces in 4-manifolds."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegeneracyError, GeometryError, NumericError,
                     PreconditionError, ResolutionError, WillmoreError)

__all__ = [
    "__version__",
    "ConfigError", "DegeneracyError", "GeometryError", "NumericError",
    "PreconditionError", "ResolutionError", "WillmoreError",
]
