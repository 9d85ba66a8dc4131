"""Kernel selection: the compiled extension when it imports, numpy otherwise.

Set ``HENONLAB_PURE=1`` to force the numpy versions.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("HENONLAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled

        _impl = _compiled
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        pass

CONVERGED = _kernels_py.CONVERGED
CLASSIFIED_ZERO = _kernels_py.CLASSIFIED_ZERO
BUDGET_EXHAUSTED = _kernels_py.BUDGET_EXHAUSTED


def escape(*args):
    return _impl.escape(*args)


def orbit_jacobian(*args):
    return _impl.orbit_jacobian(*args)


def series_eval(*args):
    return _impl.series_eval(*args)


def implementations():
    """Both implementations keyed by name, for cross-checks and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled

        out["cython"] = _compiled
    except ImportError:  # pragma: no cover
        pass
    return out
