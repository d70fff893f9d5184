"""Hot numeric kernels with numba-accelerated and pure-numpy implementations.

The numba path is used by default when numba imports cleanly. Set the
environment variable ``ROOMSMITH_NUMBA=0`` before import to force the numpy
fallback (useful for debugging and for the benchmark in ``benchmarks/``).

Both paths of ``raster_triangles`` are exact integer arithmetic and produce
bit-identical masks. ``rotation_spans`` paths differ only by float summation
order (~1e-16 relative).
"""

from __future__ import annotations

import os

import numpy as np

def _env_wants_numba(value: str) -> bool:
    return value.strip().lower() not in ("0", "false", "off", "no")


_WANT_NUMBA = _env_wants_numba(os.environ.get("ROOMSMITH_NUMBA", "1"))

try:  # pragma: no cover - exercised via env-flag parametrization
    if _WANT_NUMBA:
        from numba import njit
    else:
        njit = None
except ImportError:  # pragma: no cover
    njit = None

USING_NUMBA = njit is not None


# --- rotated-extent spans (OBB volume search) --------------------------------

def rotation_spans_numpy(verts: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Extent spans of ``mats[k] @ v`` over all vertices.

    Args:
        verts: (N, 3) float64 vertex positions.
        mats: (K, 3, 3) float64 rotation matrices.

    Returns:
        (K, 3) spans (max - min) of the rotated vertex cloud per axis.
    """
    proj = np.einsum("kij,nj->kni", mats, verts)
    return proj.max(axis=1) - proj.min(axis=1)


def _rotation_spans_loops(verts, mats, out):
    n = verts.shape[0]
    k = mats.shape[0]
    for m in range(k):
        r00 = mats[m, 0, 0]
        r01 = mats[m, 0, 1]
        r02 = mats[m, 0, 2]
        r10 = mats[m, 1, 0]
        r11 = mats[m, 1, 1]
        r12 = mats[m, 1, 2]
        r20 = mats[m, 2, 0]
        r21 = mats[m, 2, 1]
        r22 = mats[m, 2, 2]
        min0 = np.inf
        max0 = -np.inf
        min1 = np.inf
        max1 = -np.inf
        min2 = np.inf
        max2 = -np.inf
        for i in range(n):
            x = verts[i, 0]
            y = verts[i, 1]
            z = verts[i, 2]
            p0 = r00 * x + r01 * y + r02 * z
            p1 = r10 * x + r11 * y + r12 * z
            p2 = r20 * x + r21 * y + r22 * z
            if p0 < min0:
                min0 = p0
            if p0 > max0:
                max0 = p0
            if p1 < min1:
                min1 = p1
            if p1 > max1:
                max1 = p1
            if p2 < min2:
                min2 = p2
            if p2 > max2:
                max2 = p2
        out[m, 0] = max0 - min0
        out[m, 1] = max1 - min1
        out[m, 2] = max2 - min2
    return out


# --- triangle rasterization (silhouette renders) -----------------------------
#
# Vertices are pre-snapped to integer pixel coordinates, doubled so that the
# half-integer pixel-center samples stay integral. Edge functions are int64
# and a CCW top-left fill rule decides boundary pixels, so the result is
# bit-stable across platforms.

def raster_triangles_numpy(height: int, width: int, tris: np.ndarray) -> np.ndarray:
    """Fill triangles into a binary mask.

    Args:
        height, width: mask shape in pixels.
        tris: (T, 3, 2) int64 vertex pixel coords, (x, y) with y down.

    Returns:
        (height, width) uint8 mask, 1 where covered.
    """
    mask = np.zeros((height, width), dtype=np.uint8)
    if len(tris) == 0:
        return mask
    t2 = tris.astype(np.int64) * 2
    for t in range(t2.shape[0]):
        x0, y0 = t2[t, 0]
        x1, y1 = t2[t, 1]
        x2, y2 = t2[t, 2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0:
            continue
        if area < 0:
            x1, y1, x2, y2 = x2, y2, x1, y1
        lo_x = max(min(x0, x1, x2) // 2, 0)
        hi_x = min(max(x0, x1, x2) // 2, width - 1)
        lo_y = max(min(y0, y1, y2) // 2, 0)
        hi_y = min(max(y0, y1, y2) // 2, height - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue
        sx = 2 * np.arange(lo_x, hi_x + 1, dtype=np.int64) + 1
        sy = 2 * np.arange(lo_y, hi_y + 1, dtype=np.int64) + 1
        gx, gy = np.meshgrid(sx, sy)
        inside = np.ones(gx.shape, dtype=bool)
        for ax, ay, bx, by in ((x0, y0, x1, y1), (x1, y1, x2, y2), (x2, y2, x0, y0)):
            e = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
            topleft = (by - ay < 0) or (by == ay and bx > ax)
            inside &= (e > 0) | ((e == 0) & topleft)
        sub = mask[lo_y:hi_y + 1, lo_x:hi_x + 1]
        sub[inside] = 1
    return mask


def _raster_triangles_loops(height, width, tris, mask):
    for t in range(tris.shape[0]):
        x0 = tris[t, 0, 0] * 2
        y0 = tris[t, 0, 1] * 2
        x1 = tris[t, 1, 0] * 2
        y1 = tris[t, 1, 1] * 2
        x2 = tris[t, 2, 0] * 2
        y2 = tris[t, 2, 1] * 2
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0:
            continue
        if area < 0:
            tx, ty = x1, y1
            x1, y1 = x2, y2
            x2, y2 = tx, ty
        lo_x = min(x0, min(x1, x2)) // 2
        hi_x = max(x0, max(x1, x2)) // 2
        lo_y = min(y0, min(y1, y2)) // 2
        hi_y = max(y0, max(y1, y2)) // 2
        if lo_x < 0:
            lo_x = 0
        if lo_y < 0:
            lo_y = 0
        if hi_x > width - 1:
            hi_x = width - 1
        if hi_y > height - 1:
            hi_y = height - 1
        tl0 = (y1 - y0 < 0) or (y1 == y0 and x1 > x0)
        tl1 = (y2 - y1 < 0) or (y2 == y1 and x2 > x1)
        tl2 = (y0 - y2 < 0) or (y0 == y2 and x0 > x2)
        for py in range(lo_y, hi_y + 1):
            gy = 2 * py + 1
            for px in range(lo_x, hi_x + 1):
                gx = 2 * px + 1
                e0 = (x1 - x0) * (gy - y0) - (y1 - y0) * (gx - x0)
                e1 = (x2 - x1) * (gy - y1) - (y2 - y1) * (gx - x1)
                e2 = (x0 - x2) * (gy - y2) - (y0 - y2) * (gx - x2)
                if (e0 > 0 or (e0 == 0 and tl0)) and \
                   (e1 > 0 or (e1 == 0 and tl1)) and \
                   (e2 > 0 or (e2 == 0 and tl2)):
                    mask[py, px] = 1
    return mask


if USING_NUMBA:
    _rotation_spans_jit = njit(cache=True)(_rotation_spans_loops)
    _raster_triangles_jit = njit(cache=True)(_raster_triangles_loops)

    def rotation_spans_numba(verts: np.ndarray, mats: np.ndarray) -> np.ndarray:
        out = np.empty((mats.shape[0], 3), dtype=np.float64)
        return _rotation_spans_jit(
            np.ascontiguousarray(verts, dtype=np.float64),
            np.ascontiguousarray(mats, dtype=np.float64),
            out,
        )

    def raster_triangles_numba(height: int, width: int, tris: np.ndarray) -> np.ndarray:
        mask = np.zeros((height, width), dtype=np.uint8)
        if len(tris) == 0:
            return mask
        return _raster_triangles_jit(
            height, width, np.ascontiguousarray(tris, dtype=np.int64), mask
        )

    rotation_spans = rotation_spans_numba
    raster_triangles = raster_triangles_numba
else:
    rotation_spans_numba = None
    raster_triangles_numba = None
    rotation_spans = rotation_spans_numpy
    raster_triangles = raster_triangles_numpy
