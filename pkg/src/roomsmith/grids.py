"""Grid coverage planning: floor, wall, and on-object grids.

Cells carry alphanumeric IDs (column letters + 1-based row number, "B3").
Row 1 sits at the -z edge of the floor — the top of a top-down render — and
column A at the -x edge. The normative cell->world mapping is
``x = origin.x + (col + 0.5) * cell_size`` and likewise for rows/z, with
0-based indices.

Planning is staged (larger items first), validated (rectangular, disjoint,
free cells only), and re-asked with a violation message up to two retries.
Very large items plan on a 2x coarser grid and project exactly onto the dense
one (each sparse cell owns exactly 4 dense children).
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Protocol, Sequence

import numpy as np
from shapely.geometry import LineString, Polygon
from shapely.geometry import box as shapely_box

from .errors import (
    CellSizeTooLarge,
    FootprintExceedsCells,
    InsufficientSpace,
    ParentTooSmall,
    PlannerRejected,
    ScaleAdaptiveNotApplicable,
)
from .geometry import Vec3
from .scene import (
    FurnitureItem,
    Placement,
    Room,
    Scene,
    Wall,
    world_aabb,
    world_extents,
)

log = logging.getLogger(__name__)

DEFAULT_CELL_SIZE = 0.5  # meters
STAGE_AREA_THRESHOLD = 0.8  # m^2 footprint: stage-1 items
SCALE_ADAPTIVE_FRACTION = 0.25  # "very large" trigger: > 25% of free cells
MAX_PLAN_RETRIES = 2
FIT_MARGIN_CELLS = 0.5  # footprint may exceed the covered rect by half a cell
MIN_RESCALE = 0.7
ON_TOP_EPSILON = 1e-3  # meters above the parent's top face

FREE, WALL_ADJACENT, OCCUPIED, OUTSIDE = 0, 1, 2, 3
_STATE_NAMES = {FREE: "Free", WALL_ADJACENT: "WallAdjacent", OCCUPIED: "Occupied", OUTSIDE: "OutsidePolygon"}

FACINGS = ("Up", "Down", "Left", "Right")
FACING_THETA = {"Up": 180.0, "Down": 0.0, "Left": 90.0, "Right": 270.0}

_CELL_RE = re.compile(r"^([A-Z]+)([0-9]+)$")


def column_letters(col: int) -> str:
    """0 -> A, 25 -> Z, 26 -> AA (spreadsheet style)."""
    if col < 0:
        raise ValueError("column index must be >= 0")
    out = ""
    col += 1
    while col:
        col, rem = divmod(col - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def column_index(letters: str) -> int:
    n = 0
    for ch in letters:
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n - 1


@dataclass(frozen=True, order=True)
class CellId:
    """0-based (row, col); renders as column letters + 1-based row number."""

    row: int
    col: int

    def __str__(self) -> str:
        return f"{column_letters(self.col)}{self.row + 1}"

    @classmethod
    def parse(cls, text: str) -> "CellId":
        m = _CELL_RE.match(text.strip())
        if not m:
            raise ValueError(f"not a cell id: {text!r}")
        row = int(m.group(2))
        if row < 1:
            raise ValueError(f"row number must be >= 1 in {text!r}")
        return cls(row - 1, column_index(m.group(1)))


@dataclass(frozen=True)
class CoverageAssignment:
    objkey: str
    cells: frozenset[CellId]
    facing: str

    def __post_init__(self):
        if not self.cells:
            raise ValueError("assignment needs at least one cell")
        if self.facing not in FACINGS:
            raise ValueError(f"facing must be one of {FACINGS}")

    def sorted_cells(self) -> list[CellId]:
        return sorted(self.cells)

    def rect(self) -> tuple[int, int, int, int]:
        """(row0, col0, row1, col1) inclusive bounds of the covered cells."""
        rows = [c.row for c in self.cells]
        cols = [c.col for c in self.cells]
        return min(rows), min(cols), max(rows), max(cols)


@dataclass(eq=False)
class Grid:
    surface: str  # "Floor" | "Wall" | "TopOf"
    surface_ref: Optional[str]  # wall id or parent objkey
    origin: Vec3
    u_axis: Vec3
    v_axis: Vec3
    cell_size: float
    n_rows: int
    n_cols: int
    states: np.ndarray  # (n_rows, n_cols) int8 of FREE/WALL_ADJACENT/OCCUPIED/OUTSIDE
    occupants: dict = field(default_factory=dict)  # (row, col) -> objkey
    wall: Optional[Wall] = None

    def copy(self) -> "Grid":
        return Grid(
            self.surface, self.surface_ref, self.origin, self.u_axis, self.v_axis,
            self.cell_size, self.n_rows, self.n_cols, self.states.copy(),
            dict(self.occupants), self.wall,
        )

    def in_range(self, cell: CellId) -> bool:
        return 0 <= cell.row < self.n_rows and 0 <= cell.col < self.n_cols

    def state(self, cell: CellId) -> int:
        return int(self.states[cell.row, cell.col])

    def state_name(self, cell: CellId) -> str:
        return _STATE_NAMES[self.state(cell)]

    def occupant(self, cell: CellId) -> Optional[str]:
        return self.occupants.get((cell.row, cell.col))

    def free_cells(self) -> list[CellId]:
        rows, cols = np.nonzero(self.states == FREE)
        return [CellId(int(r), int(c)) for r, c in zip(rows, cols)]

    def occupy(self, cells: Sequence[CellId], objkey: str) -> None:
        for c in cells:
            self.states[c.row, c.col] = OCCUPIED
            self.occupants[(c.row, c.col)] = objkey

    def release(self, objkey: str) -> None:
        for (r, c), key in list(self.occupants.items()):
            if key == objkey:
                del self.occupants[(r, c)]
                self.states[r, c] = FREE

    def cell_center_uv(self, cell: CellId) -> tuple[float, float]:
        return ((cell.col + 0.5) * self.cell_size, (cell.row + 0.5) * self.cell_size)

    def cell_center_world(self, cell: CellId) -> Vec3:
        u, v = self.cell_center_uv(cell)
        o, ua, va = self.origin.as_array(), self.u_axis.as_array(), self.v_axis.as_array()
        return Vec3.from_array(o + ua * u + va * v)

    def cell_rect_floor(self, cell: CellId) -> tuple[float, float, float, float]:
        """(x0, z0, x1, z1) of the cell footprint; floor grids only."""
        x0 = self.origin.x + cell.col * self.cell_size
        z0 = self.origin.z + cell.row * self.cell_size
        return (x0, z0, x0 + self.cell_size, z0 + self.cell_size)


def _require_2x2_interior(states: np.ndarray, context: str) -> None:
    inside = (states != OUTSIDE).astype(np.int32)
    if inside.shape[0] < 2 or inside.shape[1] < 2:
        raise CellSizeTooLarge(f"{context}: grid is {states.shape[0]}x{states.shape[1]}")
    blocks = inside[:-1, :-1] + inside[1:, :-1] + inside[:-1, 1:] + inside[1:, 1:]
    if not np.any(blocks == 4):
        raise CellSizeTooLarge(f"{context}: no 2x2 block of interior cells")


def build_floor_grid(room: Room, cell_size: float = DEFAULT_CELL_SIZE) -> Grid:
    """Overlay a grid on the floor polygon.

    Cells not fully inside the polygon are OutsidePolygon (partial edge cells
    must never receive items); interior cells touching a tagged wall segment
    are WallAdjacent.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be > 0")
    x0, z0, x1, z1 = room.bounds
    n_cols = max(1, math.ceil((x1 - x0) / cell_size - 1e-9))
    n_rows = max(1, math.ceil((z1 - z0) / cell_size - 1e-9))
    poly = Polygon(room.floor_polygon)
    wall_lines = [LineString([w.a, w.b]) for w in room.walls]
    states = np.full((n_rows, n_cols), FREE, dtype=np.int8)
    for r in range(n_rows):
        for c in range(n_cols):
            cx0 = x0 + c * cell_size
            cz0 = z0 + r * cell_size
            cell_box = shapely_box(cx0, cz0, cx0 + cell_size, cz0 + cell_size)
            if not poly.covers(shapely_box(cx0 + 1e-9, cz0 + 1e-9, cx0 + cell_size - 1e-9, cz0 + cell_size - 1e-9)):
                states[r, c] = OUTSIDE
            elif any(line.distance(cell_box) < 1e-9 for line in wall_lines):
                states[r, c] = WALL_ADJACENT
    _require_2x2_interior(states, "floor grid")
    return Grid(
        surface="Floor", surface_ref=None,
        origin=Vec3(x0, 0.0, z0),
        u_axis=Vec3(1.0, 0.0, 0.0), v_axis=Vec3(0.0, 0.0, 1.0),
        cell_size=cell_size, n_rows=n_rows, n_cols=n_cols, states=states,
    )


def build_wall_grid(room: Room, wall_id: str, cell_size: float = DEFAULT_CELL_SIZE) -> Grid:
    """Grid on a tagged wall: u runs along the segment, v downward from the
    ceiling so row 1 is at the top of an elevation render."""
    wall = next((w for w in room.walls if w.id == wall_id), None)
    if wall is None:
        raise ValueError(f"room has no wall {wall_id!r}")
    n_cols = max(1, math.ceil(wall.length / cell_size - 1e-9))
    n_rows = max(1, math.ceil(room.height / cell_size - 1e-9))
    states = np.full((n_rows, n_cols), FREE, dtype=np.int8)
    # partial cells beyond the segment end or below the floor are unusable
    for c in range(n_cols):
        if (c + 1) * cell_size > wall.length + 1e-9:
            states[:, c] = OUTSIDE
    for r in range(n_rows):
        if (r + 1) * cell_size > room.height + 1e-9:
            states[r, :] = OUTSIDE
    _require_2x2_interior(states, f"wall grid {wall_id}")
    dx = (wall.b[0] - wall.a[0]) / wall.length
    dz = (wall.b[1] - wall.a[1]) / wall.length
    return Grid(
        surface="Wall", surface_ref=wall_id,
        origin=Vec3(wall.a[0], room.height, wall.a[1]),
        u_axis=Vec3(dx, 0.0, dz), v_axis=Vec3(0.0, -1.0, 0.0),
        cell_size=cell_size, n_rows=n_rows, n_cols=n_cols, states=states,
        wall=wall,
    )


def occupy_from_scene(grid: Grid, scene: Scene, skip: Sequence[str] = ()) -> Grid:
    """Mark floor cells under existing Floor items as occupied, in place.

    build_floor_grid only knows the room shell; a grid used for incremental
    planning must also reflect furniture that is already standing. Cells whose
    footprint overlaps an item's world footprint by more than a sliver go to
    Occupied; WallAdjacent and OutsidePolygon states are left alone (they are
    already unassignable, and releasing an item later must not turn the
    wall-adjacent band into free space). Returns the grid for chaining.
    """
    if grid.surface != "Floor":
        raise ValueError("occupancy from scene items applies to floor grids only")
    skipped = set(skip)
    for item in scene.items:
        if item.category != "Floor" or item.objkey in skipped:
            continue
        bb = world_aabb(item)
        cells = []
        for r in range(grid.n_rows):
            for c in range(grid.n_cols):
                if grid.states[r, c] != FREE:
                    continue
                cell = CellId(r, c)
                cx0, cz0, cx1, cz1 = grid.cell_rect_floor(cell)
                dx = min(cx1, bb.max.x) - max(cx0, bb.min.x)
                dz = min(cz1, bb.max.z) - max(cz0, bb.min.z)
                if dx > 1e-6 and dz > 1e-6:
                    cells.append(cell)
        if cells:
            grid.occupy(cells, item.objkey)
    return grid


# --- planner protocol and validation ------------------------------------------------


class PlacementPlanner(Protocol):
    """Produces cell assignments; backed by an MLLM prompt or a script.

    The payload mirrors the CellAssignment response schema:
    ``{"cells": {objkey: ["B2", ...]}, "facing": {objkey: "Up"}}``.
    """

    def propose(self, items: Sequence[FurnitureItem], grid: Grid, feedback: Optional[str]) -> dict:
        ...


def _is_rectangular(cells: set[CellId]) -> bool:
    rows = [c.row for c in cells]
    cols = [c.col for c in cells]
    r0, r1, c0, c1 = min(rows), max(rows), min(cols), max(cols)
    return len(cells) == (r1 - r0 + 1) * (c1 - c0 + 1)


def _parse_payload_cells(payload: dict, objkey: str) -> Optional[set[CellId]]:
    raw = payload.get("cells", {}).get(objkey)
    if not raw:
        return None
    return {CellId.parse(t) for t in raw}


def validate_payload(
    payload: dict, items: Sequence[FurnitureItem], grid: Grid, claimed: dict
) -> list[str]:
    """Violation messages for a planner proposal (empty list = acceptable).

    ``claimed`` maps cells already granted to earlier items in this round.
    """
    violations: list[str] = []
    expected = {it.objkey for it in items}
    got = set(payload.get("cells", {}))
    for extra in sorted(got - expected):
        violations.append(f"unexpected objkey {extra} in assignment")
    round_claims: dict[CellId, str] = dict(claimed)
    for it in items:
        try:
            cells = _parse_payload_cells(payload, it.objkey)
        except ValueError as exc:
            violations.append(str(exc))
            continue
        if not cells:
            violations.append(f"no cells assigned to {it.objkey}")
            continue
        facing = payload.get("facing", {}).get(it.objkey)
        if facing not in FACINGS:
            violations.append(f"{it.objkey}: facing must be one of {'/'.join(FACINGS)}")
        bad_range = [c for c in cells if not grid.in_range(c)]
        if bad_range:
            violations.append(
                f"{it.objkey}: cells outside the grid: {', '.join(str(c) for c in sorted(bad_range))}"
            )
            continue
        if not _is_rectangular(cells):
            violations.append(f"{it.objkey}: cells must form a filled rectangle")
        for c in sorted(cells):
            state = grid.state(c)
            if state == OCCUPIED:
                violations.append(f"cell {c} already occupied by {grid.occupant(c)}; choose free cells")
            elif state == WALL_ADJACENT:
                violations.append(f"cell {c} is wall-adjacent and not assignable")
            elif state == OUTSIDE:
                violations.append(f"cell {c} is outside the floor area")
            elif c in round_claims:
                violations.append(f"cell {c} already claimed by {round_claims[c]} in this plan")
        for c in cells:
            round_claims.setdefault(c, it.objkey)
    return violations


def _needed_cells(item: FurnitureItem, cell_size: float) -> int:
    e = world_extents(item)
    return math.ceil(e.x / cell_size - 1e-9) * math.ceil(e.z / cell_size - 1e-9)


def _plan_round(
    items: Sequence[FurnitureItem], grid: Grid, planner: PlacementPlanner
) -> list[CoverageAssignment]:
    """One stage: propose, validate, retry with feedback, then occupy."""
    free = len(grid.free_cells())
    needed = sum(_needed_cells(it, grid.cell_size) for it in items)
    if needed > free:
        raise InsufficientSpace(
            f"stage needs ~{needed} cells but only {free} are free"
        )
    feedback = None
    for _attempt in range(1 + MAX_PLAN_RETRIES):
        payload = planner.propose(items, grid, feedback)
        violations = validate_payload(payload, items, grid, claimed={})
        if not violations:
            out = []
            for it in items:
                cells = _parse_payload_cells(payload, it.objkey)
                facing = payload["facing"][it.objkey]
                grid.occupy(sorted(cells), it.objkey)
                out.append(CoverageAssignment(it.objkey, frozenset(cells), facing))
            return out
        feedback = "; ".join(violations)
    raise PlannerRejected(f"planner exhausted retries: {feedback}")


def plan_local_by_local(
    items: Sequence[FurnitureItem], grid: Grid, planner: PlacementPlanner
) -> list[CoverageAssignment]:
    """Stage larger items before smaller ones, each stage seeing prior occupancy."""
    for it in items:
        if it.category != "Floor":
            raise ValueError(f"{it.objkey} is category {it.category}, not Floor")

    def area(it: FurnitureItem) -> float:
        e = world_extents(it)
        return e.x * e.z

    ordered = sorted(items, key=lambda it: (-area(it), it.objkey))
    stage1 = [it for it in ordered if area(it) >= STAGE_AREA_THRESHOLD]
    stage2 = [it for it in ordered if area(it) < STAGE_AREA_THRESHOLD]
    assignments: list[CoverageAssignment] = []
    for stage in (stage1, stage2):
        if stage:
            assignments.extend(_plan_round(stage, grid, planner))
    return assignments


# --- scale-adaptive (sparse -> dense) -----------------------------------------------


def sparse_children(cell: CellId) -> list[CellId]:
    """The four dense cells owned by a sparse cell (exact 2x subdivision)."""
    r, c = cell.row * 2, cell.col * 2
    return [CellId(r, c), CellId(r, c + 1), CellId(r + 1, c), CellId(r + 1, c + 1)]


def build_sparse_grid(dense: Grid) -> Grid:
    """2x-coarser grid; a sparse cell is Free only if all 4 children are Free."""
    n_rows, n_cols = dense.n_rows // 2, dense.n_cols // 2
    if n_rows < 1 or n_cols < 1:
        raise CellSizeTooLarge("dense grid too small to coarsen")
    states = np.full((n_rows, n_cols), FREE, dtype=np.int8)
    for r in range(n_rows):
        for c in range(n_cols):
            child = dense.states[2 * r : 2 * r + 2, 2 * c : 2 * c + 2]
            if np.any(child == OUTSIDE):
                states[r, c] = OUTSIDE
            elif np.any(child == WALL_ADJACENT):
                states[r, c] = WALL_ADJACENT
            elif np.any(child == OCCUPIED):
                states[r, c] = OCCUPIED
    _require_2x2_interior(states, "sparse grid")
    return Grid(
        surface=dense.surface, surface_ref=dense.surface_ref,
        origin=dense.origin, u_axis=dense.u_axis, v_axis=dense.v_axis,
        cell_size=dense.cell_size * 2.0, n_rows=n_rows, n_cols=n_cols,
        states=states, wall=dense.wall,
    )


def plan_scale_adaptive(
    item: FurnitureItem, grid: Grid, planner: PlacementPlanner
) -> CoverageAssignment:
    """Plan a very large item on the sparse grid, then project onto the dense one."""
    free = len(grid.free_cells())
    if free == 0:
        raise InsufficientSpace("no free cells")
    if _needed_cells(item, grid.cell_size) <= SCALE_ADAPTIVE_FRACTION * free:
        raise ScaleAdaptiveNotApplicable(
            f"{item.objkey} does not cover more than 25% of free cells"
        )
    sparse = build_sparse_grid(grid)
    [sparse_assignment] = _plan_round([item], sparse, planner)
    dense_cells: set[CellId] = set()
    for sc in sparse_assignment.cells:
        dense_cells.update(sparse_children(sc))
    grid.occupy(sorted(dense_cells), item.objkey)
    return CoverageAssignment(item.objkey, frozenset(dense_cells), sparse_assignment.facing)


# --- cells -> continuous placement --------------------------------------------------


def _rotated_footprint(item: FurnitureItem, facing: str) -> tuple[float, float, float]:
    """(width_u, height_y, depth_v) of the item once it faces the given way."""
    e = world_extents(item)
    if facing in ("Left", "Right"):
        return e.z, e.y, e.x
    return e.x, e.y, e.z


def assignment_to_placement(
    a: CoverageAssignment,
    item: FurnitureItem,
    grid: Grid,
    room: Optional[Room] = None,
    parent_top: Optional[float] = None,
) -> Placement:
    """Continuous placement at the covered rectangle's centroid.

    The item keeps its current scale if its footprint fits the rectangle plus
    half a cell of margin; otherwise it is scaled down uniformly, to no less
    than MIN_RESCALE, else FootprintExceedsCells. Floor placements are also
    clamped to the room polygon so interior cells can never produce
    out-of-bounds boxes.
    """
    if not _is_rectangular(set(a.cells)):
        raise ValueError("assignment cells must form a rectangle")
    r0, c0, r1, c1 = a.rect()
    cs = grid.cell_size
    rect_u = (c1 - c0 + 1) * cs
    rect_v = (r1 - r0 + 1) * cs
    margin = FIT_MARGIN_CELLS * cs

    if grid.surface == "Wall":
        return _wall_placement(a, item, grid, rect_u, rect_v, margin)

    u_mid = (c0 + c1 + 1) / 2.0 * cs
    v_mid = (r0 + r1 + 1) / 2.0 * cs
    x = grid.origin.x + u_mid
    z = grid.origin.z + v_mid
    theta = FACING_THETA[a.facing]
    fw, _, fd = _rotated_footprint(item, a.facing)

    factor = min(1.0, (rect_u + margin) / fw, (rect_v + margin) / fd)
    if grid.surface == "Floor" and room is not None:
        # margin may only be spent where the polygon allows it
        factor = min(factor, _polygon_fit_factor(room, x, z, fw, fd))
    if factor < MIN_RESCALE - 1e-12:
        raise FootprintExceedsCells(
            f"{item.objkey}: footprint {fw:.2f}x{fd:.2f} m exceeds "
            f"{rect_u:.2f}x{rect_v:.2f} m (+{margin:.2f} margin) beyond min rescale"
        )
    if factor < 1.0:
        log.info("%s scaled down by %.3f to fit assigned cells", item.objkey, factor)

    y = grid.origin.y if parent_top is None else parent_top + ON_TOP_EPSILON
    s = item.placement.scale
    return Placement(
        position=Vec3(x, y, z),
        theta=theta,
        scale=Vec3(s.x * factor, s.y * factor, s.z * factor),
    )


def _polygon_fit_factor(room: Room, x: float, z: float, fw: float, fd: float) -> float:
    poly = Polygon(room.floor_polygon)
    lo, hi = 0.0, 1.0
    if poly.covers(shapely_box(x - fw / 2, z - fd / 2, x + fw / 2, z + fd / 2)):
        return 1.0
    for _ in range(40):
        mid = (lo + hi) / 2.0
        if poly.covers(shapely_box(x - mid * fw / 2, z - mid * fd / 2, x + mid * fw / 2, z + mid * fd / 2)):
            lo = mid
        else:
            hi = mid
    return lo


def _wall_placement(
    a: CoverageAssignment, item: FurnitureItem, grid: Grid,
    rect_u: float, rect_v: float, margin: float,
) -> Placement:
    wall = grid.wall
    assert wall is not None, "wall grid lost its wall"
    r0, c0, r1, c1 = a.rect()
    cs = grid.cell_size
    u_mid = (c0 + c1 + 1) / 2.0 * cs
    v_mid = (r0 + r1 + 1) / 2.0 * cs
    nx, nz = wall.normal
    theta = math.degrees(math.atan2(-nx, nz)) % 360.0  # face away from the wall
    e = world_extents(item)
    width, height, depth = e.x, e.y, e.z  # local x runs along the wall

    factor = min(1.0, (rect_u + margin) / width, (rect_v + margin) / height)
    if factor < MIN_RESCALE - 1e-12:
        raise FootprintExceedsCells(
            f"{item.objkey}: {width:.2f}x{height:.2f} m exceeds wall cells "
            f"{rect_u:.2f}x{rect_v:.2f} m beyond min rescale"
        )
    dxu = (wall.b[0] - wall.a[0]) / wall.length
    dzu = (wall.b[1] - wall.a[1]) / wall.length
    x = wall.a[0] + dxu * u_mid + nx * (depth * factor / 2.0)
    z = wall.a[1] + dzu * u_mid + nz * (depth * factor / 2.0)
    y_center = grid.origin.y - v_mid  # v points downward from the ceiling
    y_bottom = max(0.0, y_center - height * factor / 2.0)
    s = item.placement.scale
    return Placement(
        position=Vec3(x, y_bottom, z),
        theta=theta,
        scale=Vec3(s.x * factor, s.y * factor, s.z * factor),
    )


def plan_on_wall(item: FurnitureItem, grid: Grid, planner: PlacementPlanner) -> CoverageAssignment:
    """Plan one wall-mounted item on a (typically projected) wall grid.

    Wall items skip the floor staging order — one validated round suffices.
    """
    if grid.surface != "Wall":
        raise ValueError("plan_on_wall needs a wall grid")
    [assignment] = _plan_round([item], grid, planner)
    return assignment


# --- wall projection of floor items ---------------------------------------------------


def project_to_wall_grid(floor_items: Sequence[FurnitureItem], wall_grid: Grid) -> Grid:
    """Occupy wall cells behind floor items standing near the wall.

    An item participates when its footprint is within one cell of the wall
    line; its silhouette (span along the wall x height) blocks those cells.
    Returns a new grid; the input is untouched.
    """
    wall = wall_grid.wall
    if wall is None:
        raise ValueError("not a wall grid")
    out = wall_grid.copy()
    cs = wall_grid.cell_size
    line = LineString([wall.a, wall.b])
    dxu = (wall.b[0] - wall.a[0]) / wall.length
    dzu = (wall.b[1] - wall.a[1]) / wall.length
    for item in floor_items:
        bb = world_aabb(item)
        rect = shapely_box(bb.min.x, bb.min.z, bb.max.x, bb.max.z)
        if line.distance(rect) >= cs:
            continue
        # project the four footprint corners onto the wall's u axis
        corners = [
            (bb.min.x, bb.min.z), (bb.max.x, bb.min.z),
            (bb.min.x, bb.max.z), (bb.max.x, bb.max.z),
        ]
        us = [(cx - wall.a[0]) * dxu + (cz - wall.a[1]) * dzu for cx, cz in corners]
        u0, u1 = max(0.0, min(us)), min(wall.length, max(us))
        if u1 <= u0:
            continue
        y0, y1 = bb.min.y, bb.max.y
        c_lo = int(math.floor(u0 / cs + 1e-9))
        c_hi = min(out.n_cols - 1, int(math.ceil(u1 / cs - 1e-9)) - 1)
        # wall rows run downward from the ceiling: row r spans
        # y in [H - (r+1)cs, H - r*cs]
        height_top = wall_grid.origin.y
        r_lo = int(math.floor((height_top - y1) / cs + 1e-9))
        r_hi = min(out.n_rows - 1, int(math.ceil((height_top - y0) / cs - 1e-9)) - 1)
        cells = [
            CellId(r, c)
            for r in range(max(0, r_lo), r_hi + 1)
            for c in range(max(0, c_lo), c_hi + 1)
            if out.states[r, c] != OUTSIDE
        ]
        out.occupy(cells, item.objkey)
    return out


# --- on-object planning ----------------------------------------------------------------


def build_top_grid(parent: FurnitureItem) -> Grid:
    """Grid on the parent's top face; cell = 1/4 of the shorter side."""
    bb = world_aabb(parent)
    e = bb.extents
    side = min(e.x, e.z)
    if side <= 0:
        raise ParentTooSmall(f"{parent.objkey} has no top face")
    cs = side / 4.0
    n_cols = max(1, int(math.floor(e.x / cs + 1e-9)))
    n_rows = max(1, int(math.floor(e.z / cs + 1e-9)))
    states = np.full((n_rows, n_cols), FREE, dtype=np.int8)
    return Grid(
        surface="TopOf", surface_ref=parent.objkey,
        origin=Vec3(bb.min.x, bb.max.y, bb.min.z),
        u_axis=Vec3(1.0, 0.0, 0.0), v_axis=Vec3(0.0, 0.0, 1.0),
        cell_size=cs, n_rows=n_rows, n_cols=n_cols, states=states,
    )


def plan_on_object(
    item: FurnitureItem, parent: FurnitureItem, planner: PlacementPlanner
) -> tuple[CoverageAssignment, Grid]:
    """Plan an Other-category item on its parent's top face."""
    pe = world_aabb(parent).extents
    ie = world_extents(item)
    if pe.x * pe.z < ie.x * ie.z:
        raise ParentTooSmall(
            f"{parent.objkey} top face {pe.x:.2f}x{pe.z:.2f} m cannot hold "
            f"{item.objkey} ({ie.x:.2f}x{ie.z:.2f} m)"
        )
    grid = build_top_grid(parent)
    [assignment] = _plan_round([item], grid, planner)
    return assignment, grid


# --- frontal face selection --------------------------------------------------------------


VIEW_ORDER = ("Front", "Back", "Left", "Right")


class FrontalPick(NamedTuple):
    face: str
    warned: bool


def select_frontal_face(views: Sequence, judge) -> FrontalPick:
    """Ask the judge which of the four views shows the frontal face.

    The judge sees views ordered Front/Back/Left/Right. A malformed answer is
    retried once; on failure (or no judge) the pick degrades to Front with the
    warning flag set.
    """
    if len(views) != 4:
        raise ValueError("exactly 4 views required, ordered Front/Back/Left/Right")
    if judge is None:
        return FrontalPick("Front", True)
    for _ in range(2):
        try:
            answer = judge.pick_face(views)
        except Exception:
            log.warning("frontal-face judge failed; defaulting to Front")
            return FrontalPick("Front", True)
        if isinstance(answer, str) and answer.strip().capitalize() in VIEW_ORDER:
            return FrontalPick(answer.strip().capitalize(), False)
    log.warning("frontal-face judge kept answering outside %s; defaulting to Front", VIEW_ORDER)
    return FrontalPick("Front", True)
