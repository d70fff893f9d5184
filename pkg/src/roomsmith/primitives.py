"""Canonical test meshes.

Every factory returns a watertight triangle mesh centered at the origin in a
pose whose axis-aligned box is already the minimal oriented box, so aligning a
rotated copy must restore the canonical volume. The n-gon prisms are phased so
that the canonical pose stays optimal (a regular 16-gon needs the half-step
offset; with a vertex on the x axis the rotated rectangle wins).
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import TriMesh

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def _ear_clip(poly: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple CCW polygon by ear clipping."""
    n = len(poly)
    idx = list(range(n))
    tris: list[tuple[int, int, int]] = []

    def cross(o, a, b):
        return (poly[a, 0] - poly[o, 0]) * (poly[b, 1] - poly[o, 1]) - (
            poly[a, 1] - poly[o, 1]
        ) * (poly[b, 0] - poly[o, 0])

    def inside(p, a, b, c):
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return d1 >= -1e-12 and d2 >= -1e-12 and d3 >= -1e-12

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise ValueError("ear clipping failed; polygon may be self-intersecting")
        clipped = False
        for k in range(len(idx)):
            a, b, c = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            if cross(a, b, c) <= 1e-12:
                continue  # reflex or degenerate corner
            if any(inside(p, a, b, c) for p in idx if p not in (a, b, c)):
                continue
            tris.append((a, b, c))
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            raise ValueError("no ear found; polygon winding must be CCW")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def extrude_footprint(footprint: np.ndarray, height: float) -> TriMesh:
    """Extrude a CCW polygon in the xz plane (x right, z forward) along +y.

    The result spans y in [-height/2, height/2] and is centered vertically;
    the footprint is used as given.
    """
    fp = np.asarray(footprint, dtype=np.float64)
    n = len(fp)
    h = height / 2.0
    bottom = np.column_stack([fp[:, 0], np.full(n, -h), fp[:, 1]])
    top = np.column_stack([fp[:, 0], np.full(n, h), fp[:, 1]])
    verts = np.vstack([bottom, top])
    tris: list[tuple[int, int, int]] = []
    # caps (footprint CCW in xz means CW seen from +y, so the top cap flips)
    for a, b, c in _ear_clip(fp):
        tris.append((a, c, b))
        tris.append((n + a, n + b, n + c))
    for i in range(n):
        j = (i + 1) % n
        tris.append((i, j, n + j))
        tris.append((i, n + j, n + i))
    return TriMesh(verts, np.array(tris, dtype=np.int64))


def box(width: float = 1.0, height: float = 1.0, depth: float = 1.0) -> TriMesh:
    """Axis-aligned box centered at the origin (extent = width x height x depth)."""
    x, y, z = width / 2.0, height / 2.0, depth / 2.0
    v = np.array(
        [
            [-x, -y, -z], [x, -y, -z], [x, y, -z], [-x, y, -z],
            [-x, -y, z], [x, -y, z], [x, y, z], [-x, y, z],
        ]
    )
    t = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # -z
            [4, 5, 6], [4, 6, 7],  # +z
            [0, 1, 5], [0, 5, 4],  # -y
            [3, 7, 6], [3, 6, 2],  # +y
            [0, 4, 7], [0, 7, 3],  # -x
            [1, 2, 6], [1, 6, 5],  # +x
        ],
        dtype=np.int64,
    )
    return TriMesh(v, t)


def cube(size: float = 1.0) -> TriMesh:
    return box(size, size, size)


def tall_box() -> TriMesh:
    return box(0.4, 2.2, 0.5)


def wide_box() -> TriMesh:
    return box(2.4, 0.5, 1.8)


def panel() -> TriMesh:
    """Thin flat slab, e.g. a painting or a table top."""
    return box(2.0, 1.2, 0.05)


def l_box() -> TriMesh:
    """L-shaped footprint (2.0 x 1.0 outer, 0.6 x 0.3 corner notch), 0.8 tall."""
    fp = np.array(
        [
            [-1.0, -0.5], [1.0, -0.5], [1.0, 0.2], [0.4, 0.2], [0.4, 0.5], [-1.0, 0.5],
        ]
    )
    return extrude_footprint(fp, 0.8)


def stepped_box() -> TriMesh:
    """Staircase profile extruded along z: a desk-like two-level solid."""
    profile = np.array(
        [
            [-0.8, -0.4], [0.8, -0.4], [0.8, 0.0], [0.0, 0.0], [0.0, 0.4], [-0.8, 0.4],
        ]
    )
    # extrude in the xz plane, then rotate -90 deg about x so the profile
    # stands upright in xy and the extrusion runs along z
    flat = extrude_footprint(profile, 0.8)
    v = flat.vertices
    upright = np.column_stack([v[:, 0], v[:, 2], -v[:, 1]])
    return TriMesh(upright, flat.triangles)


def ngon_prism(sides: int, radius: float, height: float, phase_degrees: float = 0.0) -> TriMesh:
    ang = np.radians(phase_degrees) + 2.0 * np.pi * np.arange(sides) / sides
    fp = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
    return extrude_footprint(fp, height)


def hex_prism(radius: float = 0.6, height: float = 1.0) -> TriMesh:
    """Regular hexagonal prism, a vertex on +x (that pose is box-minimal)."""
    return ngon_prism(6, radius, height, phase_degrees=0.0)


def hexadecagon_prism(radius: float = 0.5, height: float = 0.7) -> TriMesh:
    """Regular 16-gon prism, phased half a step so edges face the axes."""
    return ngon_prism(16, radius, height, phase_degrees=180.0 / 16.0)


def icosahedron(radius: float = 1.0) -> TriMesh:
    """Regular icosahedron; canonical pose has edge pairs facing each axis."""
    p = _GOLDEN
    raw = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=np.float64,
    )
    verts = raw / np.linalg.norm(raw[0]) * radius
    tris = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return TriMesh(verts, tris)


PRIMITIVE_FACTORIES = {
    "cube": cube,
    "box": box,
    "tall_box": tall_box,
    "wide_box": wide_box,
    "panel": panel,
    "l_box": l_box,
    "stepped_box": stepped_box,
    "hex_prism": hex_prism,
    "hexadecagon_prism": hexadecagon_prism,
    "icosahedron": icosahedron,
}


def make_primitive(name: str, **kwargs) -> TriMesh:
    try:
        factory = PRIMITIVE_FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown primitive {name!r}; pick one of {sorted(PRIMITIVE_FACTORIES)}")
    return factory(**kwargs)
