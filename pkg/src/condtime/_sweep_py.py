"""Pure-Python (numpy) implementations of the grid sweeps.

These are the reference versions of the kernels in ``_sweep.pyx`` and are
used whenever the compiled extension is unavailable.
"""
import numpy as np


def affine_sweep(M, c, x0):
    """Run ``x[i+1] = M @ x[i] + c[i]`` from ``x[0] = x0``.

    ``M`` is ``(n, n)``, ``c`` is ``(m, n, r)`` and ``x0`` is ``(n, r)``;
    returns the ``(m+1, n, r)`` stack of iterates.
    """
    M = np.ascontiguousarray(M, dtype=complex)
    c = np.ascontiguousarray(c, dtype=complex)
    out = np.empty((c.shape[0] + 1,) + np.shape(x0), dtype=complex)
    out[0] = x0
    for i in range(c.shape[0]):
        out[i + 1] = M @ out[i] + c[i]
    return out


def product_sweep(S, x0):
    """Run ``x[i+1] = S[i] @ x[i]`` from ``x[0] = x0`` for an ``(m, n, n)`` stack."""
    S = np.ascontiguousarray(S, dtype=complex)
    out = np.empty((S.shape[0] + 1,) + np.shape(x0), dtype=complex)
    out[0] = x0
    for i in range(S.shape[0]):
        out[i + 1] = S[i] @ out[i]
    return out
