"""Scene state: room, walls, furniture items, and the five 3D actions.

A Scene is a value. ``execute`` returns a new Scene with the revision bumped;
untouched items are shared structurally, so replays can hold many revisions
cheaply. Scenes serialize to canonical JSON (9 significant digits, insertion
order) so equal scenes produce identical bytes and a stable digest.

Orientation convention (fixed once, used by grids/render/metrics too): theta
is degrees about the vertical axis, the frontal face points along
(-sin(theta), cos(theta)) in the xz plane. theta=0 faces +z; positive theta
turns the front toward -x. Grid row 1 sits at the -z edge, so on a top-down
render "up" on screen is -z and a facing of Up corresponds to theta=180.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Union

import numpy as np

from .canonical import canonical_bytes, digest_bytes
from .errors import DuplicateObjkey, UnknownObjkey
from .geometry import Aabb, Rotation, TriMesh, Vec3, compute_aabb

Category = Literal["Floor", "Wall", "Other", "Unassigned"]
CATEGORIES: tuple[str, ...] = ("Floor", "Wall", "Other", "Unassigned")


def theta_rotation(theta: float) -> Rotation:
    """World rotation for a placement theta (degrees about vertical)."""
    return Rotation.about_y(-theta)


def frontal_direction(theta: float) -> tuple[float, float]:
    """Unit (x, z) direction of the frontal face at the given theta."""
    rad = math.radians(theta)
    return (-math.sin(rad), math.cos(rad))


@dataclass(frozen=True)
class Placement:
    position: Vec3
    theta: float = 0.0
    scale: Vec3 = field(default_factory=lambda: Vec3(1.0, 1.0, 1.0))

    def __post_init__(self):
        if self.scale.x <= 0 or self.scale.y <= 0 or self.scale.z <= 0:
            raise ValueError("scale components must be > 0")
        object.__setattr__(self, "theta", float(self.theta) % 360.0)

    @classmethod
    def identity(cls) -> "Placement":
        return cls(Vec3(0.0, 0.0, 0.0))


@dataclass(frozen=True)
class FurnitureItem:
    objkey: str
    label: str
    aabb_local: Aabb
    placement: Placement = field(default_factory=Placement.identity)
    category: str = "Unassigned"
    mesh_ref: Optional[str] = None  # runtime asset handle, not serialized
    style_tag: Optional[str] = None
    parent: Optional[str] = None

    def __post_init__(self):
        if not self.objkey:
            raise ValueError("objkey must be non-empty")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.category == "Other" and not self.parent:
            raise ValueError("category=Other items must reference a parent objkey")


@dataclass(frozen=True)
class Wall:
    id: str
    a: tuple[float, float]  # (x, z) on the floor polygon boundary
    b: tuple[float, float]
    normal: tuple[float, float]  # inward

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])


def _polygon_area(poly: np.ndarray) -> float:
    x, z = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(z, -1) - np.roll(x, -1) * z))


@dataclass(frozen=True)
class Room:
    floor_polygon: tuple[tuple[float, float], ...]  # (x, z), CCW, rectilinear
    height: float
    walls: tuple[Wall, ...] = ()

    def __post_init__(self):
        poly = np.asarray(self.floor_polygon, dtype=np.float64)
        if len(poly) < 4:
            raise ValueError("floor polygon needs at least 4 vertices")
        if self.height <= 0:
            raise ValueError("room height must be > 0")
        for i in range(len(poly)):
            dx, dz = poly[(i + 1) % len(poly)] - poly[i]
            if abs(dx) > 1e-9 and abs(dz) > 1e-9:
                raise ValueError("floor polygon must be rectilinear (axis-parallel edges)")
        if _polygon_area(poly) <= 0:
            raise ValueError("floor polygon must be counterclockwise")
        object.__setattr__(
            self, "floor_polygon", tuple((float(x), float(z)) for x, z in poly)
        )

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        poly = np.asarray(self.floor_polygon)
        return (
            float(poly[:, 0].min()), float(poly[:, 1].min()),
            float(poly[:, 0].max()), float(poly[:, 1].max()),
        )

    def edge(self, i: int) -> tuple[tuple[float, float], tuple[float, float]]:
        n = len(self.floor_polygon)
        return self.floor_polygon[i % n], self.floor_polygon[(i + 1) % n]


def _inward_normal(a, b) -> tuple[float, float]:
    # interior lies to the left of each directed CCW edge in the (x, z) plane
    dx, dz = b[0] - a[0], b[1] - a[1]
    length = math.hypot(dx, dz)
    return (-dz / length, dx / length)


def make_room(
    floor_polygon,
    height: float = 2.8,
    wall_edges: Optional[list[int]] = None,
    wall_ids: Optional[list[str]] = None,
) -> Room:
    """Room from a CCW rectilinear polygon, tagging the given edges as walls."""
    room = Room(tuple(map(tuple, floor_polygon)), height)
    walls = []
    for j, i in enumerate(wall_edges or []):
        a, b = room.edge(i)
        wid = wall_ids[j] if wall_ids else f"wall_{i}"
        walls.append(Wall(wid, a, b, _inward_normal(a, b)))
    return replace(room, walls=tuple(walls))


def make_rectangular_room(
    width: float,
    depth: float,
    height: float = 2.8,
    tagged: tuple[str, ...] = ("top", "left"),
) -> Room:
    """Axis-aligned room spanning x in [0, width], z in [0, depth].

    ``tagged`` picks which sides get wall tags; the common case mirrors the
    two-wall arrangement (top = -z edge, left = -x edge) seen from above.
    """
    poly = [(0.0, 0.0), (width, 0.0), (width, depth), (0.0, depth)]  # CCW in (x, z)
    edge_by_side = {}
    room = Room(tuple(poly), height)
    for i in range(4):
        a, b = room.edge(i)
        if a[1] == 0.0 and b[1] == 0.0:
            edge_by_side["top"] = i
        elif a[1] == depth and b[1] == depth:
            edge_by_side["bottom"] = i
        elif a[0] == 0.0 and b[0] == 0.0:
            edge_by_side["left"] = i
        else:
            edge_by_side["right"] = i
    sides = [s for s in ("top", "left", "bottom", "right") if s in tagged]
    return make_room(
        poly, height,
        wall_edges=[edge_by_side[s] for s in sides],
        wall_ids=[f"wall_{s}" for s in sides],
    )


@dataclass(frozen=True)
class Scene:
    room: Room
    items: tuple[FurnitureItem, ...] = ()
    revision: int = 0

    def __post_init__(self):
        keys = [it.objkey for it in self.items]
        if len(keys) != len(set(keys)):
            raise DuplicateObjkey("duplicate objkey in scene")

    def find(self, objkey: str) -> FurnitureItem:
        for it in self.items:
            if it.objkey == objkey:
                return it
        raise UnknownObjkey(f"no item with objkey {objkey!r}")

    def has(self, objkey: str) -> bool:
        return any(it.objkey == objkey for it in self.items)

    def objkeys(self) -> list[str]:
        return [it.objkey for it in self.items]


# --- actions -------------------------------------------------------------------


@dataclass(frozen=True)
class Add:
    objkey: str
    text: str


@dataclass(frozen=True)
class Remove:
    objkey: str


@dataclass(frozen=True)
class Translate:
    objkey: str
    position: Vec3  # absolute target position


@dataclass(frozen=True)
class Scale:
    objkey: str
    factors: Vec3  # multiplies the current scale

    def __post_init__(self):
        if self.factors.x <= 0 or self.factors.y <= 0 or self.factors.z <= 0:
            raise ValueError("scale factors must be > 0")


@dataclass(frozen=True)
class Rotate:
    objkey: str
    angle: float  # degrees added to current theta


Action3D = Union[Add, Remove, Translate, Scale, Rotate]


def _replace_item(scene: Scene, objkey: str, new_item: FurnitureItem) -> tuple:
    found = False
    items = []
    for it in scene.items:
        if it.objkey == objkey:
            items.append(new_item)
            found = True
        else:
            items.append(it)
    if not found:
        raise UnknownObjkey(f"no item with objkey {objkey!r}")
    return tuple(items)


def execute(scene: Scene, action: Action3D, assets=None) -> Scene:
    """Apply one action, returning the next scene revision.

    Add pulls its mesh through ``assets`` (an AssetProvider); the full
    candidate-judged pipeline lives in the agent, which passes a provider
    pre-loaded with the winning mesh.
    """
    if not action.objkey:
        raise ValueError("action objkey must be non-empty")
    if isinstance(action, Add):
        if scene.has(action.objkey):
            raise DuplicateObjkey(f"objkey {action.objkey!r} already in scene")
        from .assets import ingest_mesh  # local import to avoid a cycle

        if assets is None:
            raise ValueError("Add requires an asset provider")
        item = ingest_mesh(
            objkey=action.objkey,
            label=action.text,
            mesh=assets.generate(action.text, 0),
        )
        return replace(scene, items=scene.items + (item,), revision=scene.revision + 1)

    if isinstance(action, Remove):
        scene.find(action.objkey)
        items = tuple(it for it in scene.items if it.objkey != action.objkey)
        return replace(scene, items=items, revision=scene.revision + 1)

    item = scene.find(action.objkey)
    p = item.placement
    if isinstance(action, Translate):
        p = replace(p, position=action.position)
    elif isinstance(action, Scale):
        p = replace(
            p,
            scale=Vec3(
                p.scale.x * action.factors.x,
                p.scale.y * action.factors.y,
                p.scale.z * action.factors.z,
            ),
        )
    elif isinstance(action, Rotate):
        p = replace(p, theta=(p.theta + action.angle) % 360.0)
    else:
        raise TypeError(f"unknown action {type(action).__name__}")
    new_item = replace(item, placement=p)
    return replace(
        scene, items=_replace_item(scene, action.objkey, new_item), revision=scene.revision + 1
    )


# --- derived values --------------------------------------------------------------


def world_aabb(item: FurnitureItem) -> Aabb:
    """AABB of the local box after scale, theta rotation, then translation."""
    corners = item.aabb_local.corners()
    corners = corners * item.placement.scale.as_array()
    corners = theta_rotation(item.placement.theta).apply(corners)
    corners = corners + item.placement.position.as_array()
    return Aabb.from_points(corners)


def world_extents(item: FurnitureItem) -> Vec3:
    return world_aabb(item).extents


def footprint_area(item: FurnitureItem) -> float:
    e = world_extents(item)
    return e.x * e.z


def scene_summary(scene: Scene) -> str:
    """Deterministic one-line-per-item description used as prompt environment."""
    x0, z0, x1, z1 = scene.room.bounds
    lines = [
        f"Room: {x1 - x0:.2f} x {z1 - z0:.2f} m floor, height {scene.room.height:.2f} m, "
        f"{len(scene.items)} item(s), walls: "
        + (", ".join(w.id for w in scene.room.walls) if scene.room.walls else "none")
        + "."
    ]
    for it in scene.items:
        e = world_extents(it)
        pos = it.placement.position
        lines.append(
            f"- {it.objkey} [{it.label}] category={it.category}: "
            f"position ({pos.x:.2f}, {pos.y:.2f}, {pos.z:.2f}), "
            f"dimensions {e.x:.2f} x {e.y:.2f} x {e.z:.2f}, theta {it.placement.theta:.1f}"
        )
    return "\n".join(lines)


# --- serialization ---------------------------------------------------------------


def scene_to_json(scene: Scene) -> dict:
    return {
        "room": {
            "floor_polygon": [[x, z] for x, z in scene.room.floor_polygon],
            "height": scene.room.height,
            "walls": [{"id": w.id, "a": list(w.a), "b": list(w.b)} for w in scene.room.walls],
        },
        "items": [
            {
                "objkey": it.objkey,
                "label": it.label,
                "position": it.placement.position.to_list(),
                "theta": it.placement.theta,
                "scale": it.placement.scale.to_list(),
                "aabb_local": it.aabb_local.to_json(),
                "category": it.category,
                **({"parent": it.parent} if it.parent else {}),
            }
            for it in scene.items
        ],
        "revision": scene.revision,
    }


def scene_from_json(doc: dict) -> Scene:
    r = doc["room"]
    walls = tuple(
        Wall(
            w["id"],
            (float(w["a"][0]), float(w["a"][1])),
            (float(w["b"][0]), float(w["b"][1])),
            _inward_normal(w["a"], w["b"]),
        )
        for w in r.get("walls", [])
    )
    room = replace(Room(tuple(map(tuple, r["floor_polygon"])), float(r["height"])), walls=walls)
    items = tuple(
        FurnitureItem(
            objkey=d["objkey"],
            label=d["label"],
            aabb_local=Aabb.from_json(d["aabb_local"]),
            placement=Placement(Vec3(*d["position"]), d["theta"], Vec3(*d["scale"])),
            category=d["category"],
            parent=d.get("parent"),
        )
        for d in doc.get("items", [])
    )
    return Scene(room=room, items=items, revision=int(doc.get("revision", 0)))


def scene_canonical_bytes(scene: Scene) -> bytes:
    return canonical_bytes(scene_to_json(scene))


def scene_digest(scene: Scene) -> str:
    return digest_bytes(scene_canonical_bytes(scene))


# --- objkey assignment ------------------------------------------------------------

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def label_slug(label: str) -> str:
    slug = _SLUG_RE.sub("_", label.strip().lower()).strip("_")
    return slug or "item"


def next_objkey(scene: Scene, label: str) -> str:
    slug = label_slug(label)
    taken = set(scene.objkeys())
    n = 1
    while f"{slug}_{n}" in taken:
        n += 1
    return f"{slug}_{n}"
