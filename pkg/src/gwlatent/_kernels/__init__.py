"""Kernel dispatch: compiled Cython module when available, numpy otherwise.

Set GWLATENT_PURE_PYTHON=1 to force the numpy path (useful for the
benchmark and for debugging).
"""

import os

from . import _ref

if os.environ.get("GWLATENT_PURE_PYTHON"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

tconv2d_k4s2p1 = _impl.tconv2d_k4s2p1
instance_norm2d = _impl.instance_norm2d
flow_band_matrix = _impl.flow_band_matrix


def backend() -> str:
    """Name of the active kernel implementation ('compiled' or 'numpy')."""
    return "numpy" if _impl is _ref else "compiled"
