"""Benchmark the compiled extension kernels against the numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from mrgan import _kernels
from mrgan._kernels import _npkernels


def bench(label, fn, *args, repeat=20):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    dt = (time.perf_counter() - t0) / repeat
    print(f"  {label:<10} {dt * 1e3:8.3f} ms")
    return dt


def main():
    rng = np.random.default_rng(0)
    print(f"compiled extension available: {_kernels.HAVE_COMPILED}")
    if _kernels.HAVE_COMPILED:
        from mrgan._kernels import _cykernels
    for n in (256, 1024, 4096):
        a = np.ascontiguousarray(rng.normal(size=(n, 3)))
        b = np.ascontiguousarray(rng.normal(size=(n, 3)))
        print(f"nn_sqdist_sum, {n} x {n} points:")
        t_np = bench("numpy", _npkernels.nn_sqdist_sum, a, b)
        if _kernels.HAVE_COMPILED:
            t_cy = bench("compiled", _cykernels.nn_sqdist_sum, a, b)
            print(f"  speedup    {t_np / t_cy:8.2f}x")
    for n, f in ((256, 64), (1024, 256), (4096, 512)):
        pts = np.ascontiguousarray(rng.normal(size=(n, 3)))
        normals = rng.normal(size=(f, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        normals = np.ascontiguousarray(normals)
        offsets = np.ascontiguousarray(rng.normal(size=f))
        print(f"min_plane_distance_sum, {n} points x {f} faces:")
        t_np = bench("numpy", _npkernels.min_plane_distance_sum,
                     pts, normals, offsets)
        if _kernels.HAVE_COMPILED:
            t_cy = bench("compiled", _cykernels.min_plane_distance_sum,
                         pts, normals, offsets)
            print(f"  speedup    {t_np / t_cy:8.2f}x")


if __name__ == "__main__":
    main()
