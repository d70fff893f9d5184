"""Both kernel paths (jit and plain numpy) must agree on the same inputs.

The raster kernels share exact integer math, so their outputs are compared
bit-for-bit; the span kernels differ only in float summation order.
"""

import numpy as np
import pytest

from roomsmith import _kernels
from roomsmith._kernels import (
    raster_triangles_numpy,
    rotation_spans_numpy,
)


def _random_mats(rng, k):
    mats = []
    for _ in range(k):
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        mats.append(q)
    return np.array(mats)


def test_rotation_spans_shape_and_positivity():
    rng = np.random.default_rng(0)
    verts = rng.normal(size=(50, 3))
    mats = _random_mats(rng, 7)
    spans = rotation_spans_numpy(verts, mats)
    assert spans.shape == (7, 3)
    assert np.all(spans > 0)


def test_rotation_spans_identity_matches_extents():
    rng = np.random.default_rng(1)
    verts = rng.normal(size=(30, 3))
    spans = rotation_spans_numpy(verts, np.eye(3)[None])
    expect = verts.max(axis=0) - verts.min(axis=0)
    assert np.allclose(spans[0], expect, atol=0)


@pytest.mark.skipif(not _kernels.USING_NUMBA, reason="numba path disabled or unavailable")
def test_rotation_spans_paths_agree():
    rng = np.random.default_rng(2)
    verts = rng.normal(size=(200, 3)) * 3.0
    mats = _random_mats(rng, 31)
    a = rotation_spans_numpy(verts, mats)
    b = _kernels.rotation_spans_numba(verts, mats)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_raster_triangle_covers_expected_pixels():
    # right triangle over the lower-left half of a 4x4 raster
    tris = np.array([[[0, 0], [4, 0], [0, 4]]], dtype=np.int64)
    mask = raster_triangles_numpy(4, 4, tris)
    # pixel centers (x+0.5, y+0.5) strictly under x+y<4
    expect = np.array(
        [
            [1, 1, 1, 0],
            [1, 1, 0, 0],
            [1, 0, 0, 0],
            [0, 0, 0, 0],
        ],
        dtype=np.uint8,
    )
    assert np.array_equal(mask, expect)


def test_raster_winding_insensitive():
    cw = np.array([[[0, 0], [0, 4], [4, 0]]], dtype=np.int64)
    ccw = np.array([[[0, 0], [4, 0], [0, 4]]], dtype=np.int64)
    assert np.array_equal(raster_triangles_numpy(4, 4, cw), raster_triangles_numpy(4, 4, ccw))


def test_raster_shared_edge_no_double_or_gap():
    # a square split along its diagonal: union must be the full square
    tris = np.array(
        [[[0, 0], [4, 0], [4, 4]], [[0, 0], [4, 4], [0, 4]]],
        dtype=np.int64,
    )
    mask = raster_triangles_numpy(4, 4, tris)
    assert mask.all()


@pytest.mark.skipif(not _kernels.USING_NUMBA, reason="numba path disabled or unavailable")
def test_raster_paths_bit_identical():
    rng = np.random.default_rng(3)
    tris = rng.integers(-5, 40, size=(25, 3, 2)).astype(np.int64)
    a = raster_triangles_numpy(32, 32, tris)
    b = _kernels.raster_triangles_numba(32, 32, tris)
    assert np.array_equal(a, b)


def test_env_flag_parsing():
    assert _kernels._env_wants_numba("1") is True
    assert _kernels._env_wants_numba("true") is True
    assert _kernels._env_wants_numba("0") is False
    assert _kernels._env_wants_numba("false") is False
    assert _kernels._env_wants_numba("off") is False
    assert _kernels._env_wants_numba("no") is False
