"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``SPKBACK_PURE_PYTHON=1`` to force the numpy kernels.
"""
import os

from . import _pykernels

if os.environ.get("SPKBACK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

llr_pairs = _impl.llr_pairs
dot_pairs = _impl.dot_pairs
