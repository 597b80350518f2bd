"""Desk-scale verification of prime-value counts for det and Pff."""

from .spaces import Family, IntMatrix, MatrixSpace, RealMatrix

__all__ = ["Family", "MatrixSpace", "IntMatrix", "RealMatrix"]
__version__ = "0.1.0"
