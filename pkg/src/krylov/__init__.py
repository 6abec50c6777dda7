"""Lanczos coefficients of operator dynamics, orthogonal-polynomial tools,
spectral bootstrap, transport extraction and random-matrix universality checks."""

__version__ = "0.1.0"

from .errors import KrylovError, NumericalError, ValidationError  # noqa: E402
from .sequence import LanczosSequence  # noqa: E402

__all__ = ["__version__", "KrylovError", "NumericalError", "ValidationError", "LanczosSequence"]
