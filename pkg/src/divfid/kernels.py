"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``DIVFID_PURE_PYTHON=1``
to force the NumPy fallback. Both backends return identical results.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("DIVFID_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py


def grid_argmin(y, cand):
    """Index of the nearest candidate row for every observation row.

    ``y`` is ``(N, L)`` and ``cand`` is ``(K, L)``, both complex. Distance is
    the squared Euclidean norm; exact ties resolve to the smallest index.
    """
    y = np.ascontiguousarray(y, dtype=np.complex128)
    cand = np.ascontiguousarray(cand, dtype=np.complex128)
    return _impl.grid_argmin(y, cand)


def box_hash(points, sigma):
    """Grid cell index ``floor(p / sigma)`` per coordinate plus a 64-bit hash."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    return _impl.box_hash(points, float(sigma))
