"""Sweep kernel selection: compiled extension if available, numpy otherwise.

Set HAARFIELD_PURE_PYTHON=1 to force the numpy kernel.  Both kernels are
bit-identical, so the choice only affects speed.
"""

import os

from . import _car_np

if os.environ.get("HAARFIELD_PURE_PYTHON"):
    _impl = _car_np
    BACKEND = "python"
else:
    try:
        from . import _car as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _car_np
        BACKEND = "python"

conclique_update = _impl.conclique_update


def backend():
    """Name of the active kernel backend, 'cython' or 'python'."""
    return BACKEND
