"""Hot kernels: compiled Cython module with a numpy fallback.

The backend is chosen once at import.  Set ``AQCLAB_PURE_PYTHON=1`` to force
the numpy path (useful for benchmarking and for parity tests).
"""
import os

from . import _pykernels

BACKEND = "numpy"
if not os.environ.get("AQCLAB_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build environment
        _impl = _pykernels
else:
    _impl = _pykernels

apply_terms = _impl.apply_terms
apply_terms_sector = _impl.apply_terms_sector

__all__ = ["BACKEND", "apply_terms", "apply_terms_sector"]
