"""Time-integration kernels, compiled when available.

The Cython extension ``_kernels`` is used if it was built; otherwise the numpy
implementation in ``_fallback`` is used.  ``use_backend`` switches at runtime
(mainly for tests and benchmarks).
"""

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

__all__ = ["sdof_rk4", "boucwen_newmark", "backend", "use_backend", "available_backends"]

_active = _compiled if _compiled is not None else _fallback


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def backend():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous backend name."""
    global _active
    prev = backend()
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    elif name == "python":
        _active = _fallback
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def sdof_rk4(ag_half, m, c, k, cd, alpha, h):
    ag_half = np.ascontiguousarray(ag_half, dtype=float)
    return _active.sdof_rk4(ag_half, float(m), float(c), float(k), float(cd), float(alpha), float(h))


def boucwen_newmark(ag, mass, k, alpha, A, beta, gamma, nexp, c_diag, c_off,
                    dt, implicit, tol, maxiter):
    arr = lambda a: np.ascontiguousarray(a, dtype=float)
    return _active.boucwen_newmark(arr(ag), arr(mass), arr(k), arr(alpha), arr(A), arr(beta),
                                   arr(gamma), float(nexp), arr(c_diag), arr(c_off),
                                   float(dt), bool(implicit), float(tol), int(maxiter))
