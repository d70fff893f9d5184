"""Bounding-box math, pose alignment and collision tests.

Conventions used throughout the package:
  * Y is up, the floor plane is y=0.
  * Rotations serialize as yaw-pitch-roll degrees, composed R = Rz(roll) @
    Rx(pitch) @ Ry(yaw) (yaw about Y, pitch about X, roll about Z).
  * Touching boxes do not collide; overlap must exceed epsilon on every axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull
from scipy.spatial._qhull import QhullError
from scipy.spatial.transform import Rotation as _SciRotation

from . import _kernels
from .errors import DegenerateMesh, EmptyMesh

COLLISION_EPSILON = 1e-6  # metres; flush placement is not a collision

_ORTHO_TOL = 1e-9
_TIE_REL_TOL = 1e-9


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"non-finite component in Vec3: {v!r}")

    @classmethod
    def from_array(cls, a) -> "Vec3":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]


@dataclass(frozen=True)
class Aabb:
    min: Vec3
    max: Vec3

    def __post_init__(self):
        if self.min.x > self.max.x or self.min.y > self.max.y or self.min.z > self.max.z:
            raise ValueError("Aabb min must be <= max componentwise")

    @classmethod
    def from_points(cls, pts: np.ndarray) -> "Aabb":
        pts = np.asarray(pts, dtype=np.float64)
        if pts.size == 0:
            raise EmptyMesh("cannot build Aabb from zero points")
        return cls(Vec3.from_array(pts.min(axis=0)), Vec3.from_array(pts.max(axis=0)))

    @property
    def extents(self) -> Vec3:
        return Vec3(self.max.x - self.min.x, self.max.y - self.min.y, self.max.z - self.min.z)

    @property
    def center(self) -> Vec3:
        return Vec3(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
            (self.min.z + self.max.z) / 2.0,
        )

    @property
    def volume(self) -> float:
        e = self.extents
        return e.x * e.y * e.z

    def corners(self) -> np.ndarray:
        mn, mx = self.min, self.max
        return np.array(
            [
                [mn.x, mn.y, mn.z], [mx.x, mn.y, mn.z], [mx.x, mx.y, mn.z], [mn.x, mx.y, mn.z],
                [mn.x, mn.y, mx.z], [mx.x, mn.y, mx.z], [mx.x, mx.y, mx.z], [mn.x, mx.y, mx.z],
            ],
            dtype=np.float64,
        )

    def to_json(self) -> dict:
        return {"min": self.min.to_list(), "max": self.max.to_list()}

    @classmethod
    def from_json(cls, d: dict) -> "Aabb":
        return cls(Vec3(*d["min"]), Vec3(*d["max"]))


def aabb_overlap(a: Aabb, b: Aabb, epsilon: float = COLLISION_EPSILON) -> bool:
    """True iff the interiors overlap by more than epsilon on every axis."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return (
        min(a.max.x, b.max.x) - max(a.min.x, b.min.x) > epsilon
        and min(a.max.y, b.max.y) - max(a.min.y, b.min.y) > epsilon
        and min(a.max.z, b.max.z) - max(a.min.z, b.min.z) > epsilon
    )


def aabb_contains(outer: Aabb, inner: Aabb, epsilon: float = 0.0) -> bool:
    """True iff inner fits inside outer expanded by epsilon on each face."""
    return (
        inner.min.x >= outer.min.x - epsilon
        and inner.min.y >= outer.min.y - epsilon
        and inner.min.z >= outer.min.z - epsilon
        and inner.max.x <= outer.max.x + epsilon
        and inner.max.y <= outer.max.y + epsilon
        and inner.max.z <= outer.max.z + epsilon
    )


@dataclass(frozen=True, eq=False)
class Rotation:
    """Proper rotation, stored as an orthonormal 3x3 matrix (det +1)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("rotation matrix must be 3x3")
        if not np.allclose(m @ m.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("rotation matrix not orthonormal within 1e-9")
        if np.linalg.det(m) < 0:
            raise ValueError("rotation matrix must be right-handed (det +1)")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def about_axis(cls, axis: int, degrees: float) -> "Rotation":
        return cls(_axis_rotations(axis, np.array([degrees]))[0])

    @classmethod
    def about_y(cls, degrees: float) -> "Rotation":
        return cls.about_axis(1, degrees)

    @classmethod
    def from_euler_zxy(cls, yaw: float, pitch: float, roll: float) -> "Rotation":
        """Build from yaw-pitch-roll degrees, composed Rz(roll)@Rx(pitch)@Ry(yaw)."""
        rz = _axis_rotations(2, np.array([roll]))[0]
        rx = _axis_rotations(0, np.array([pitch]))[0]
        ry = _axis_rotations(1, np.array([yaw]))[0]
        return cls(rz @ rx @ ry)

    def to_euler_zxy(self) -> tuple[float, float, float]:
        """Yaw, pitch, roll in degrees. At pitch = +-90 the roll is fixed to 0."""
        m = self.matrix
        sp = min(1.0, max(-1.0, m[2, 1]))
        pitch = math.asin(sp)
        if abs(sp) < 1.0 - 1e-12:
            yaw = math.atan2(-m[2, 0], m[2, 2])
            roll = math.atan2(-m[0, 1], m[1, 1])
        else:
            yaw = math.atan2(m[0, 2], m[0, 0])
            roll = 0.0
        return math.degrees(yaw), math.degrees(pitch), math.degrees(roll)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.matrix.T

    def compose(self, other: "Rotation") -> "Rotation":
        """Rotation equivalent to applying ``other`` first, then ``self``."""
        return Rotation(_orthonormalized(self.matrix @ other.matrix))

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T.copy())

    def angle_degrees(self) -> float:
        c = min(1.0, max(-1.0, (np.trace(self.matrix) - 1.0) / 2.0))
        return math.degrees(math.acos(c))

    def to_json(self) -> dict:
        yaw, pitch, roll = self.to_euler_zxy()
        return {"yaw": yaw, "pitch": pitch, "roll": roll}

    @classmethod
    def from_json(cls, d: dict) -> "Rotation":
        return cls.from_euler_zxy(d["yaw"], d["pitch"], d["roll"])


@dataclass(frozen=True, eq=False)
class Obb:
    """Oriented box: ``center + sum_i t_i * axes[i]`` with ``|t_i| <= half_extents[i]``."""

    center: Vec3
    axes: np.ndarray  # (3, 3), rows are unit direction vectors, right-handed
    half_extents: Vec3

    def __post_init__(self):
        a = np.asarray(self.axes, dtype=np.float64)
        if a.shape != (3, 3):
            raise ValueError("axes must be 3x3")
        if not np.allclose(a @ a.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("axes not orthonormal within 1e-9")
        if np.linalg.det(a) < 0:
            raise ValueError("axes must form a right-handed frame")
        he = self.half_extents
        if he.x < 0 or he.y < 0 or he.z < 0:
            raise ValueError("half extents must be >= 0")
        object.__setattr__(self, "axes", a)

    @property
    def volume(self) -> float:
        he = self.half_extents
        return 8.0 * he.x * he.y * he.z

    def corners(self) -> np.ndarray:
        c = self.center.as_array()
        he = self.half_extents.as_array()
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=np.float64,
        )
        return c + (signs * he) @ self.axes


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray  # (N, 3) float64
    triangles: np.ndarray  # (T, 3) int64 vertex indices

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh vertices must be finite")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def transformed(self, rotation: Rotation) -> "TriMesh":
        return TriMesh(rotation.apply(self.vertices), self.triangles)

    def translated(self, offset) -> "TriMesh":
        off = offset.as_array() if isinstance(offset, Vec3) else np.asarray(offset, dtype=np.float64)
        return TriMesh(self.vertices + off, self.triangles)

    def scaled(self, factors) -> "TriMesh":
        f = np.asarray(factors, dtype=np.float64)
        if f.ndim == 0:
            f = np.full(3, float(f))
        return TriMesh(self.vertices * f, self.triangles)


def load_obj(text_or_path) -> TriMesh:
    """Parse a Wavefront OBJ subset: only v and f lines, faces fan-triangulated."""
    if hasattr(text_or_path, "read"):
        text = text_or_path.read()
    else:
        s = str(text_or_path)
        if "\n" in s or s.lstrip().startswith(("v ", "f ", "#")):
            text = s
        else:
            with open(s, "r", encoding="utf-8") as fh:
                text = fh.read()
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise ValueError(f"OBJ line {lineno}: vertex needs 3 coordinates")
            verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                i = int(tok.split("/")[0])
                if i <= 0:
                    raise ValueError(f"OBJ line {lineno}: only positive indices supported")
                idx.append(i - 1)
            if len(idx) < 3:
                raise ValueError(f"OBJ line {lineno}: face needs >= 3 vertices")
            for k in range(1, len(idx) - 1):
                tris.append([idx[0], idx[k], idx[k + 1]])
        # all other line kinds (vn, vt, o, usemtl, ...) are ignored
    if not verts:
        raise EmptyMesh("OBJ contained no vertices")
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int64).reshape(-1, 3))


def dump_obj(mesh: TriMesh) -> str:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    return "\n".join(lines) + "\n"


def compute_aabb(mesh: TriMesh) -> Aabb:
    if len(mesh.vertices) == 0:
        raise EmptyMesh("mesh has no vertices")
    return Aabb.from_points(mesh.vertices)


# --- OBB search ---------------------------------------------------------------
#
# Minimal-volume box approximation: candidate frames from PCA and from every
# convex-hull face (face normal taken as one axis, in-plane angle from the
# minimum-area rectangle of the projected hull), each refined by iterated
# coordinate descent with a shrinking angular step. Among volume ties the
# frame closest to identity wins, which makes the result deterministic and
# keeps already-aligned meshes fixed.

def _axis_rotations(axis: int, degrees: np.ndarray) -> np.ndarray:
    rad = np.radians(np.asarray(degrees, dtype=np.float64))
    c, s = np.cos(rad), np.sin(rad)
    k = len(rad)
    mats = np.zeros((k, 3, 3))
    i, j = {0: (1, 2), 1: (2, 0), 2: (0, 1)}[axis]
    mats[:, axis, axis] = 1.0
    mats[:, i, i] = c
    mats[:, j, j] = c
    mats[:, i, j] = -s
    mats[:, j, i] = s
    return mats


def _orthonormalized(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def _cube_symmetries() -> np.ndarray:
    mats = []
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    m = np.zeros((3, 3))
                    m[0, perm[0]] = sx
                    m[1, perm[1]] = sy
                    m[2, perm[2]] = sz
                    if np.linalg.det(m) > 0:
                        mats.append(m)
    return np.array(mats)


_CUBE_SYMS = _cube_symmetries()


def _volumes(verts: np.ndarray, mats: np.ndarray) -> np.ndarray:
    return _kernels.rotation_spans(verts, mats).prod(axis=1)


def _min_area_rect_angle(pts2d: np.ndarray) -> float:
    """Angle (radians) of the minimum-area bounding rectangle of a 2D point set."""
    try:
        hull = ConvexHull(pts2d)
        hp = pts2d[hull.vertices]
    except QhullError:
        # collinear projection: align with the dominant direction
        d = pts2d - pts2d.mean(axis=0)
        _, _, vt = np.linalg.svd(d, full_matrices=False)
        return math.atan2(vt[0, 1], vt[0, 0])
    edges = np.roll(hp, -1, axis=0) - hp
    angles = np.arctan2(edges[:, 1], edges[:, 0])
    c, s = np.cos(angles), np.sin(angles)
    # rotate points by -angle for every candidate edge direction at once
    u = hp[:, 0][:, None] * c + hp[:, 1][:, None] * s
    v = -hp[:, 0][:, None] * s + hp[:, 1][:, None] * c
    area = (u.max(axis=0) - u.min(axis=0)) * (v.max(axis=0) - v.min(axis=0))
    return float(angles[int(area.argmin())])


def _perp_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e = np.zeros(3)
    e[int(np.abs(n).argmin())] = 1.0
    a = np.cross(n, e)
    a /= np.linalg.norm(a)
    return a, np.cross(n, a)


def _flush_frame(verts: np.ndarray, normal: np.ndarray) -> np.ndarray:
    a, b = _perp_basis(normal)
    p2 = np.stack([verts @ a, verts @ b], axis=1)
    phi = _min_area_rect_angle(p2)
    c, s = math.cos(phi), math.sin(phi)
    x = c * a + s * b
    y = -s * a + c * b
    m = np.stack([x, y, normal])
    if np.linalg.det(m) < 0:
        m = np.stack([x, y, -normal])
    return _orthonormalized(m)


def _pca_frame(verts: np.ndarray) -> np.ndarray:
    centered = verts - verts.mean(axis=0)
    _, vecs = np.linalg.eigh(centered.T @ centered)
    m = vecs.T[::-1].copy()  # rows, descending variance
    # canonical signs for determinism
    for i in range(3):
        j = int(np.abs(m[i]).argmax())
        if m[i, j] < 0:
            m[i] = -m[i]
    if np.linalg.det(m) < 0:
        m[2] = -m[2]
    return _orthonormalized(m)


def _refine(verts: np.ndarray, mat: np.ndarray, vol: float) -> tuple[np.ndarray, float]:
    for step in (1.0, 0.1, 0.01):
        offsets = np.arange(-15, 16, dtype=np.float64) * step
        for _ in range(60):
            improved = False
            for axis in range(3):
                mats = _axis_rotations(axis, offsets) @ mat
                vols = _volumes(verts, mats)
                i = int(vols.argmin())
                if vols[i] < vol * (1.0 - 1e-12):
                    vol = float(vols[i])
                    mat = mats[i]
                    improved = True
            if not improved:
                break
    return _orthonormalized(mat), vol


def _polish(verts: np.ndarray, mat: np.ndarray, vol: float) -> tuple[np.ndarray, float]:
    """Local quasi-exact minimisation; coordinate descent alone can stall a
    hair off optima that are not separable per axis (round-ish hulls)."""

    def objective(delta: np.ndarray) -> float:
        m = _SciRotation.from_rotvec(delta).as_matrix() @ mat
        return float(_volumes(verts, m[None, :, :])[0])

    res = minimize(
        objective,
        np.zeros(3),
        method="Powell",
        bounds=[(-0.05, 0.05)] * 3,
        options={"xtol": 1e-10, "ftol": 1e-14, "maxiter": 120},
    )
    if res.fun < vol:
        polished = _SciRotation.from_rotvec(res.x).as_matrix() @ mat
        return _orthonormalized(polished), float(res.fun)
    return mat, vol


def _hull_and_normals(verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        hull = ConvexHull(verts)
        return verts[hull.vertices], hull.equations[:, :3]
    except QhullError:
        # planar mesh: single normal from the least-variance direction
        centered = verts - verts.mean(axis=0)
        _, vecs = np.linalg.eigh(centered.T @ centered)
        return verts, vecs[:, :1].T


def _candidate_frames(hv: np.ndarray, normals: np.ndarray) -> list[np.ndarray]:
    frames = [np.eye(3), _pca_frame(hv)]
    seen = set()
    for n in normals:
        n = n / np.linalg.norm(n)
        j = int(np.abs(n).argmax())
        if n[j] < 0:
            n = -n
        key = tuple(np.round(n, 6))
        if key in seen:
            continue
        seen.add(key)
        frames.append(_flush_frame(hv, n))
    return frames


def compute_obb(mesh: TriMesh) -> Obb:
    """Near-minimal oriented bounding box of the mesh vertices."""
    if len(mesh.vertices) == 0:
        raise EmptyMesh("mesh has no vertices")
    verts = np.unique(mesh.vertices, axis=0)
    centered = verts - verts.mean(axis=0)
    rank = np.linalg.matrix_rank(centered, tol=1e-12)
    if len(verts) < 3 or rank < 2:
        raise DegenerateMesh("mesh vertices are collinear or coincident")

    hv, normals = _hull_and_normals(verts)
    frames = _candidate_frames(hv, normals)
    vols = _volumes(hv, np.array(frames))
    order = np.argsort(vols)
    best_mat, best_vol = _refine(hv, frames[order[0]], float(vols[order[0]]))
    for idx in order[1:2]:
        m, v = _refine(hv, frames[idx], float(vols[idx]))
        if v < best_vol:
            best_mat, best_vol = m, v
    best_mat, best_vol = _polish(hv, best_mat, best_vol)

    # tie handling: any near-minimal frame, expanded by the 24 box symmetries,
    # closest to the identity wins
    ties = [best_mat]
    for i, f in enumerate(frames):
        if vols[i] <= best_vol * (1.0 + _TIE_REL_TOL):
            ties.append(f)
    best_angle, chosen = np.inf, best_mat
    for t in ties:
        cands = _CUBE_SYMS @ t
        traces = np.clip((np.trace(cands, axis1=1, axis2=2) - 1.0) / 2.0, -1.0, 1.0)
        angles = np.arccos(traces)
        i = int(angles.argmin())
        if angles[i] < best_angle - 1e-12:
            best_angle = float(angles[i])
            chosen = cands[i]
    chosen = _orthonormalized(chosen)

    proj = verts @ chosen.T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    center_world = chosen.T @ ((lo + hi) / 2.0)
    return Obb(
        center=Vec3.from_array(center_world),
        axes=chosen,
        half_extents=Vec3.from_array((hi - lo) / 2.0),
    )


def align_pose(mesh: TriMesh) -> tuple[Rotation, TriMesh]:
    """Rotate the mesh so its oriented box lines up with the world axes."""
    obb = compute_obb(mesh)
    rotation = Rotation(obb.axes)
    return rotation, mesh.transformed(rotation)
