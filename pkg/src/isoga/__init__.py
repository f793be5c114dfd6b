"""Isogeometric analysis with NURBS: assembly, extended IGA for cracks and
rotation-free Kirchhoff plates."""
from .kernels import BACKEND
from .spline import KnotVector, NurbsPatch

__version__ = "0.1.0"

__all__ = ["BACKEND", "KnotVector", "NurbsPatch", "__version__"]
