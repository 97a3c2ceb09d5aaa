"""Select the compiled sweep kernels when available.

Set ``CONDTIME_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _sweep_py

try:
    if os.environ.get("CONDTIME_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _sweep as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _sweep_py
    BACKEND = "python"

affine_sweep = _impl.affine_sweep
product_sweep = _impl.product_sweep
