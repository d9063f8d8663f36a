"""Numerical laboratory for the PT-symmetric two-state system with balanced gain and loss."""

from .errors import PTLabError
from .operators import ModelParams, Regime

__all__ = ["ModelParams", "Regime", "PTLabError"]
__version__ = "0.1.0"
