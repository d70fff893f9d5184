#!/usr/bin/env python3
"""Side-by-side benchmark of the hot kernels: numba JIT vs pure numpy.

Also validates agreement: rasterized masks must be bit-identical (both paths
are exact integer arithmetic), rotation spans must agree to ~1e-12 (they
differ only by float summation order).

Run with ROOMSMITH_NUMBA=0 to confirm the numpy fallback is what you are
timing elsewhere; in that mode only the numpy column is produced.
"""

import time

import numpy as np

from roomsmith._kernels import (
    USING_NUMBA,
    raster_triangles_numba,
    raster_triangles_numpy,
    rotation_spans_numba,
    rotation_spans_numpy,
)


def best_of(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def euler_grid(n_yaw=9, n_pitch=9, n_roll=8):
    yaws = np.linspace(0, np.pi / 2, n_yaw)
    pitches = np.linspace(0, np.pi / 2, n_pitch)
    rolls = np.linspace(0, np.pi / 2, n_roll)
    mats = []
    for a in yaws:
        ca, sa = np.cos(a), np.sin(a)
        ry = np.array([[ca, 0, sa], [0, 1, 0], [-sa, 0, ca]])
        for b in pitches:
            cb, sb = np.cos(b), np.sin(b)
            rx = np.array([[1, 0, 0], [0, cb, -sb], [0, sb, cb]])
            for c in rolls:
                cc, sc = np.cos(c), np.sin(c)
                rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
                mats.append(rz @ rx @ ry)
    return np.array(mats)


def random_triangles(rng, count, height, width):
    tris = rng.integers(-20, max(height, width) + 20, size=(count, 3, 2))
    return tris.astype(np.int64)


def main():
    rng = np.random.default_rng(0)
    mats = euler_grid()  # 648 frames, the OBB search sweep size

    if not USING_NUMBA:
        print("numba path disabled or unavailable (ROOMSMITH_NUMBA=0?); timing numpy only\n")
    else:
        print("warming up the JIT (compile time excluded from timings)...")
        t0 = time.perf_counter()
        rotation_spans_numba(rng.normal(size=(8, 3)), mats[:4])
        raster_triangles_numba(16, 16, random_triangles(rng, 2, 16, 16))
        print(f"warm-up: {time.perf_counter() - t0:.1f}s\n")

    print(f"rotation_spans: {mats.shape[0]} rotation matrices per call")
    print(f"{'verts':>6}  {'numpy (ms)':>11}  {'numba (ms)':>11}  {'speedup':>8}  {'agree':>6}")
    print("-" * 52)
    for n in (64, 512, 4096):
        verts = rng.normal(size=(n, 3))
        t_np = best_of(lambda: rotation_spans_numpy(verts, mats))
        if USING_NUMBA:
            t_nb = best_of(lambda: rotation_spans_numba(verts, mats))
            agree = np.allclose(
                rotation_spans_numpy(verts, mats),
                rotation_spans_numba(verts, mats),
                rtol=1e-12, atol=1e-12,
            )
            print(f"{n:>6}  {t_np * 1e3:>11.2f}  {t_nb * 1e3:>11.2f}  "
                  f"{t_np / t_nb:>7.1f}x  {'ok' if agree else 'FAIL':>6}")
            assert agree, "rotation_spans paths disagree beyond 1e-12"
        else:
            print(f"{n:>6}  {t_np * 1e3:>11.2f}  {'-':>11}  {'-':>8}  {'-':>6}")

    height = width = 512
    print(f"\nraster_triangles: {height}x{width} mask")
    print(f"{'tris':>6}  {'numpy (ms)':>11}  {'numba (ms)':>11}  {'speedup':>8}  {'agree':>6}")
    print("-" * 52)
    for count in (50, 200, 800):
        tris = random_triangles(rng, count, height, width)
        t_np = best_of(lambda: raster_triangles_numpy(height, width, tris))
        if USING_NUMBA:
            t_nb = best_of(lambda: raster_triangles_numba(height, width, tris))
            agree = np.array_equal(
                raster_triangles_numpy(height, width, tris),
                raster_triangles_numba(height, width, tris),
            )
            print(f"{count:>6}  {t_np * 1e3:>11.2f}  {t_nb * 1e3:>11.2f}  "
                  f"{t_np / t_nb:>7.1f}x  {'ok' if agree else 'FAIL':>6}")
            assert agree, "raster_triangles masks are not bit-identical"
        else:
            print(f"{count:>6}  {t_np * 1e3:>11.2f}  {'-':>11}  {'-':>8}  {'-':>6}")


if __name__ == "__main__":
    main()
