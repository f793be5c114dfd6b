"""Backend selection for the hot kernels.

The compiled extension is used when it imports and ``ISOGA_PURE_PYTHON`` is
not set to a true value; otherwise the numpy fallback is used.
"""
import os

from . import _kernels_py

_FORCE_PURE = os.environ.get("ISOGA_PURE_PYTHON", "").lower() in ("1", "true", "yes")

try:
    if _FORCE_PURE:
        raise ImportError("pure-python backend requested")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

basis_ders = _impl.basis_ders
env_cholesky = _impl.env_cholesky
env_solve = _impl.env_solve

__all__ = ["BACKEND", "basis_ders", "env_cholesky", "env_solve"]
