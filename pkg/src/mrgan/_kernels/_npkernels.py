"""Pure-numpy fallback for the compiled kernels."""

import numpy as np


def nn_sqdist_sum(a: np.ndarray, b: np.ndarray) -> float:
    a2 = (a * a).sum(axis=1)[:, None]
    b2 = (b * b).sum(axis=1)[None, :]
    d = a2 + b2 - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return float(d.min(axis=1).sum())


def min_plane_distance_sum(points: np.ndarray, normals: np.ndarray,
                           offsets: np.ndarray) -> float:
    d = offsets[None, :] - points @ normals.T
    return float(d.min(axis=1).sum())
