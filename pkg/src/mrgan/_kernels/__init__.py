"""Hot distance kernels: compiled extension when available, numpy otherwise.

Both backends expose the same two functions; `bench/bench_kernels.py`
compares them. Set MRGAN_FORCE_NUMPY_KERNELS=1 to skip the extension.
"""

import os

import numpy as np

from . import _npkernels

if os.environ.get("MRGAN_FORCE_NUMPY_KERNELS"):
    _impl = _npkernels
    HAVE_COMPILED = False
else:
    try:
        from . import _cykernels as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        _impl = _npkernels
        HAVE_COMPILED = False


def nn_sqdist_sum(a, b) -> float:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return float(_impl.nn_sqdist_sum(a, b))


def min_plane_distance_sum(points, normals, offsets) -> float:
    points = np.ascontiguousarray(points, dtype=np.float64)
    normals = np.ascontiguousarray(normals, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    return float(_impl.min_plane_distance_sum(points, normals, offsets))
