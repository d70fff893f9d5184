"""Software raster renderer for prompt visuals and UI captures.

Everything is integer rasterization over an RGBA8 numpy buffer — no
anti-aliasing, no timestamps, no randomness — so image digests are stable
across runs and platforms and can serve as committed goldens. Text uses an
embedded 5x7 bitmap font (uppercase, digits, a little punctuation); labels
render uppercased.
"""

from __future__ import annotations

import base64
import hashlib
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import _kernels
from .errors import UnknownObjkey, UnknownTarget
from .geometry import TriMesh
from .grids import FREE, OCCUPIED, OUTSIDE, WALL_ADJACENT, CellId, Grid
from .scene import FurnitureItem, Scene, frontal_direction, world_aabb

log = logging.getLogger(__name__)

WHITE = (255, 255, 255, 255)
FLOOR_FILL = (236, 236, 236, 255)
GRID_LINE = (160, 160, 160, 255)
WALL_ADJ_FILL = (205, 205, 205, 255)
OCCUPIED_TINT = (221, 221, 221, 255)
LABEL_INK = (110, 110, 110, 255)
TEXT_INK = (20, 20, 20, 255)
ARROW_RED = (255, 0, 0, 255)
SILHOUETTE = (40, 40, 40, 255)
OUTLINE = (70, 70, 70, 255)

ITEM_PALETTE = (
    (166, 206, 227, 255),
    (178, 223, 138, 255),
    (251, 154, 153, 255),
    (253, 191, 111, 255),
    (202, 178, 214, 255),
    (255, 255, 153, 255),
    (141, 211, 199, 255),
    (190, 186, 218, 255),
)

MAX_LABELED_COLUMNS = 26

# --- 5x7 bitmap font ---------------------------------------------------------

_GLYPHS = {
    "A": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "B": ("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."),
    "C": (".####", "#....", "#....", "#....", "#....", "#....", ".####"),
    "D": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    "E": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "F": ("#####", "#....", "#....", "####.", "#....", "#....", "#...."),
    "G": (".####", "#....", "#....", "#.###", "#...#", "#...#", ".###."),
    "H": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "I": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"),
    "J": ("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."),
    "K": ("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "M": ("#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"),
    "N": ("#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"),
    "O": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "P": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "Q": (".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"),
    "R": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "S": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "U": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "V": ("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "W": ("#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"),
    "X": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "Y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "Z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", "#####"),
    "2": (".###.", "#...#", "....#", "..##.", ".#...", "#....", "#####"),
    "3": (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": (".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "#...#", ".###."),
    "_": (".....", ".....", ".....", ".....", ".....", ".....", "#####"),
    "-": (".....", ".....", ".....", "#####", ".....", ".....", "....."),
    ".": (".....", ".....", ".....", ".....", ".....", ".##..", ".##.."),
    ":": (".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."),
    "?": (".###.", "#...#", "....#", "..##.", "..#..", ".....", "..#.."),
    " ": (".....", ".....", ".....", ".....", ".....", ".....", "....."),
}

GLYPH_W, GLYPH_H, GLYPH_ADVANCE = 5, 7, 6

_FONT = {
    ch: np.array([[c == "#" for c in row] for row in rows], dtype=bool)
    for ch, rows in _GLYPHS.items()
}


def text_width(text: str) -> int:
    return GLYPH_ADVANCE * len(text) - 1 if text else 0


# --- image -------------------------------------------------------------------


class Image:
    """RGBA8 raster with a content digest over the pixel bytes."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 4:
            raise ValueError("pixels must be (h, w, 4) uint8")
        self.pixels = pixels

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.pixels.tobytes()).hexdigest()

    def to_png_bytes(self) -> bytes:
        from PIL import Image as PILImage

        buf = io.BytesIO()
        PILImage.fromarray(self.pixels, mode="RGBA").save(buf, format="PNG", optimize=False)
        return buf.getvalue()

    def to_base64(self) -> str:
        return base64.b64encode(self.to_png_bytes()).decode("ascii")

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_png_bytes())

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


# --- render specs --------------------------------------------------------------


@dataclass(frozen=True)
class TopDown:
    pass


@dataclass(frozen=True)
class WallElevation:
    wall_id: str


@dataclass(frozen=True)
class ObjectTurntable:
    objkey: str
    face: str = "Front"


@dataclass(frozen=True)
class RenderSpec:
    view: object = field(default_factory=TopDown)
    show_grid: bool = True
    show_labels: bool = True
    show_arrows: bool = True
    resolution: tuple = (512, 512)

    def __post_init__(self):
        w, h = self.resolution
        if min(w, h) < 256:
            raise ValueError("resolution must be at least 256x256")


# --- primitive drawing -----------------------------------------------------------


def _blank(width: int, height: int) -> np.ndarray:
    buf = np.empty((height, width, 4), dtype=np.uint8)
    buf[:] = WHITE
    return buf


def _fill_rect(buf, x0, y0, x1, y1, color) -> None:
    h, w = buf.shape[:2]
    x0, x1 = max(int(x0), 0), min(int(x1), w)
    y0, y1 = max(int(y0), 0), min(int(y1), h)
    if x0 < x1 and y0 < y1:
        buf[y0:y1, x0:x1] = color


def _rect_border(buf, x0, y0, x1, y1, color) -> None:
    _fill_rect(buf, x0, y0, x1, y0 + 1, color)
    _fill_rect(buf, x0, y1 - 1, x1, y1, color)
    _fill_rect(buf, x0, y0, x0 + 1, y1, color)
    _fill_rect(buf, x1 - 1, y0, x1, y1, color)


def _draw_line(buf, x0, y0, x1, y1, color, thickness: int = 1) -> None:
    """Integer Bresenham; thickness grows a small square around each step."""
    h, w = buf.shape[:2]
    x0, y0, x1, y1 = int(x0), int(y0), int(x1), int(y1)
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    r = thickness - 1
    while True:
        if r:
            _fill_rect(buf, x0 - r, y0 - r, x0 + r + 1, y0 + r + 1, color)
        elif 0 <= x0 < w and 0 <= y0 < h:
            buf[y0, x0] = color
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _draw_text(buf, x, y, text, color, scale: int = 1) -> None:
    cx = int(x)
    for ch in text.upper():
        glyph = _FONT.get(ch, _FONT["?"])
        for gy in range(GLYPH_H):
            for gx in range(GLYPH_W):
                if glyph[gy, gx]:
                    _fill_rect(
                        buf,
                        cx + gx * scale,
                        int(y) + gy * scale,
                        cx + (gx + 1) * scale,
                        int(y) + (gy + 1) * scale,
                        color,
                    )
        cx += GLYPH_ADVANCE * scale


def _fill_polygon(buf, pts, color) -> None:
    """Even-odd scanline fill; pts are float pixel coordinates."""
    h, w = buf.shape[:2]
    ys = [p[1] for p in pts]
    y_lo = max(int(math.floor(min(ys))), 0)
    y_hi = min(int(math.ceil(max(ys))), h - 1)
    n = len(pts)
    for py in range(y_lo, y_hi + 1):
        sample = py + 0.5
        xs = []
        for i in range(n):
            (x0, y0), (x1, y1) = pts[i], pts[(i + 1) % n]
            if (y0 <= sample) != (y1 <= sample):
                t = (sample - y0) / (y1 - y0)
                xs.append(x0 + t * (x1 - x0))
        xs.sort()
        for a, b in zip(xs[::2], xs[1::2]):
            _fill_rect(buf, int(math.ceil(a - 0.5)), py, int(math.floor(b - 0.5)) + 1, py + 1, color)


def _draw_arrow(buf, x0, y0, x1, y1, color) -> None:
    _draw_line(buf, x0, y0, x1, y1, color, thickness=2)
    dx, dy = x1 - x0, y1 - y0
    norm = math.hypot(dx, dy)
    if norm < 1e-9:
        return
    ux, uy = dx / norm, dy / norm
    px, py = -uy, ux
    head = 6.0
    for side in (1.0, -1.0):
        hx = x1 - head * ux + side * head * 0.6 * px
        hy = y1 - head * uy + side * head * 0.6 * py
        _draw_line(buf, x1, y1, int(round(hx)), int(round(hy)), color, thickness=2)


# --- top-down & wall views ---------------------------------------------------------


PAD = 12


class _Frame:
    """World (a,b) → pixel mapping with y-down screen semantics."""

    def __init__(self, a_min, b_min, a_max, b_max, width, height):
        span_a = max(a_max - a_min, 1e-9)
        span_b = max(b_max - b_min, 1e-9)
        self.ppm = min((width - 2 * PAD) / span_a, (height - 2 * PAD) / span_b)
        self.a_min, self.b_min = a_min, b_min

    def px(self, a: float) -> int:
        return PAD + int(round((a - self.a_min) * self.ppm))

    def py(self, b: float) -> int:
        return PAD + int(round((b - self.b_min) * self.ppm))


def _draw_grid_cells(buf, grid: Grid, frame: _Frame, show_labels: bool, rect_of) -> None:
    if show_labels and grid.n_cols > MAX_LABELED_COLUMNS:
        log.warning(
            "grid has %d columns (> %d); cell labels elided", grid.n_cols, MAX_LABELED_COLUMNS
        )
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            state = int(grid.states[r, c])
            if state == OUTSIDE:
                continue
            x0, y0, x1, y1 = rect_of(r, c)
            if state == WALL_ADJACENT:
                _fill_rect(buf, x0, y0, x1, y1, WALL_ADJ_FILL)
            elif state == OCCUPIED:
                _fill_rect(buf, x0, y0, x1, y1, OCCUPIED_TINT)
            _rect_border(buf, x0, y0, x1, y1, GRID_LINE)
            if show_labels and grid.n_cols <= MAX_LABELED_COLUMNS:
                label = str(CellId(r, c))
                if text_width(label) <= (x1 - x0) - 4 and GLYPH_H <= (y1 - y0) - 4:
                    _draw_text(buf, x0 + 2, y0 + 2, label, LABEL_INK)


def _item_color(index: int):
    return ITEM_PALETTE[index % len(ITEM_PALETTE)]


def _darken(color):
    return (color[0] * 6 // 10, color[1] * 6 // 10, color[2] * 6 // 10, 255)


def _render_top_down(scene: Scene, grid: Optional[Grid], spec: RenderSpec) -> Image:
    width, height = spec.resolution
    buf = _blank(width, height)
    min_x, min_z, max_x, max_z = scene.room.bounds
    frame = _Frame(min_x, min_z, max_x, max_z, width, height)

    poly_px = [(frame.px(x), frame.py(z)) for x, z in scene.room.floor_polygon]
    _fill_polygon(buf, poly_px, FLOOR_FILL)

    if grid is not None and spec.show_grid:

        def rect_of(r, c):
            x0, z0, x1, z1 = grid.cell_rect_floor(CellId(r, c))
            return frame.px(x0), frame.py(z0), frame.px(x1), frame.py(z1)

        _draw_grid_cells(buf, grid, frame, spec.show_labels, rect_of)

    for i in range(len(poly_px)):
        x0, y0 = poly_px[i]
        x1, y1 = poly_px[(i + 1) % len(poly_px)]
        _draw_line(buf, x0, y0, x1, y1, OUTLINE, thickness=2)

    for i, item in enumerate(scene.items):
        bb = world_aabb(item)
        x0, y0 = frame.px(bb.min.x), frame.py(bb.min.z)
        x1, y1 = frame.px(bb.max.x), frame.py(bb.max.z)
        color = _item_color(i)
        _fill_rect(buf, x0, y0, x1, y1, color)
        _rect_border(buf, x0, y0, x1, y1, _darken(color))
        label = item.objkey.upper()
        if spec.show_labels and text_width(label) <= (x1 - x0) - 2:
            _draw_text(
                buf,
                (x0 + x1 - text_width(label)) // 2,
                (y0 + y1 - GLYPH_H) // 2,
                label,
                TEXT_INK,
            )

    if spec.show_arrows:
        for item in scene.items:
            bb = world_aabb(item)
            cx = frame.px((bb.min.x + bb.max.x) / 2.0)
            cy = frame.py((bb.min.z + bb.max.z) / 2.0)
            dx, dz = frontal_direction(item.placement.theta)
            reach_m = max(bb.max.x - bb.min.x, bb.max.z - bb.min.z) / 2.0 + 0.2
            tip_x = frame.px((bb.min.x + bb.max.x) / 2.0 + dx * reach_m)
            tip_y = frame.py((bb.min.z + bb.max.z) / 2.0 + dz * reach_m)
            _draw_arrow(buf, cx, cy, tip_x, tip_y, ARROW_RED)

    return Image(buf)


def _render_wall(scene: Scene, grid: Optional[Grid], spec: RenderSpec, wall_id: str) -> Image:
    wall = next((w for w in scene.room.walls if w.id == wall_id), None)
    if wall is None:
        raise UnknownTarget(f"no wall with id {wall_id!r}")
    width, height = spec.resolution
    buf = _blank(width, height)
    frame = _Frame(0.0, 0.0, wall.length, scene.room.height, width, height)

    _fill_rect(buf, frame.px(0), frame.py(0), frame.px(wall.length), frame.py(scene.room.height), FLOOR_FILL)

    if grid is not None and spec.show_grid and grid.surface == "Wall" and grid.surface_ref == wall_id:

        def rect_of(r, c):
            # wall grids hang from the ceiling: v runs downward from origin.y
            u0, u1 = c * grid.cell_size, (c + 1) * grid.cell_size
            y_top = grid.origin.y - r * grid.cell_size
            y_bot = y_top - grid.cell_size
            return frame.px(u0), frame.py(scene.room.height - y_top), frame.px(u1), frame.py(scene.room.height - y_bot)

        _draw_grid_cells(buf, grid, frame, spec.show_labels, rect_of)

    _rect_border(
        buf, frame.px(0), frame.py(0), frame.px(wall.length), frame.py(scene.room.height), OUTLINE
    )

    ax, az = wall.a
    bx, bz = wall.b
    ulen = wall.length
    ux, uz = (bx - ax) / ulen, (bz - az) / ulen
    for i, item in enumerate(scene.items):
        if item.category != "Wall":
            continue
        bb = world_aabb(item)
        cx, cz = (bb.min.x + bb.max.x) / 2.0, (bb.min.z + bb.max.z) / 2.0
        # distance from the wall line decides whether the item hangs here
        dist = abs((cx - ax) * -uz + (cz - az) * ux)
        if dist > 0.6:
            continue
        u_mid = (cx - ax) * ux + (cz - az) * uz
        half_u = max(bb.max.x - bb.min.x, bb.max.z - bb.min.z) / 2.0
        color = _item_color(i)
        x0, x1 = frame.px(u_mid - half_u), frame.px(u_mid + half_u)
        y0, y1 = frame.py(scene.room.height - bb.max.y), frame.py(scene.room.height - bb.min.y)
        _fill_rect(buf, x0, y0, x1, y1, color)
        _rect_border(buf, x0, y0, x1, y1, _darken(color))
        label = item.objkey.upper()
        if spec.show_labels and text_width(label) <= (x1 - x0) - 2:
            _draw_text(
                buf, (x0 + x1 - text_width(label)) // 2, (y0 + y1 - GLYPH_H) // 2, label, TEXT_INK
            )
    return Image(buf)


# --- object views -------------------------------------------------------------------

# (label, projection) — projection maps world (x, y, z) to view-plane (sx, sy),
# sy up; Left/Right are exact mirrors so silhouette comparisons stay pixel-true
_VIEW_PROJECTIONS = (
    ("Front", lambda v: (v[:, 0], v[:, 1])),  # seen from -z
    ("Back", lambda v: (-v[:, 0], v[:, 1])),  # seen from +z
    ("Left", lambda v: (-v[:, 2], v[:, 1])),  # seen from -x
    ("Right", lambda v: (v[:, 2], v[:, 1])),  # seen from +x
)


def _corner_round(d: np.ndarray) -> np.ndarray:
    # The rasterizer treats integer vertex coords as pixel corners and fills
    # half-open spans, so rounding symmetric about a corner would shift the
    # covered pixels one column off under mirroring.  Placing world offset d
    # at corner M + 0.5 + d (the center of pixel M) and rounding half away
    # from that center yields coverage [M - floor(T), M + floor(T)] for an
    # extent of ±T: an odd pixel count centered on M, its own mirror image.
    return (np.sign(d) * np.floor(np.abs(d)) + (d > 0)).astype(np.int64)


def _silhouette(mesh: TriMesh, project, half_span: float, y_mid: float, y_half: float, resolution) -> np.ndarray:
    width, height = resolution
    # rasterize on an odd-sized region so the mirror axis is a pixel center;
    # any trailing even row/column stays background
    w_o = width if width % 2 else width - 1
    h_o = height if height % 2 else height - 1
    ppm = min((w_o - 2 * PAD) / (2 * half_span), (h_o - 2 * PAD) / (2 * y_half))
    sx, sy = project(mesh.vertices)
    px = (w_o - 1) // 2 + _corner_round(sx * ppm)
    py = (h_o - 1) // 2 + _corner_round((y_mid - sy) * ppm)
    pts = np.stack([px, py], axis=1)
    tris = pts[mesh.triangles]
    mask = np.zeros((height, width), dtype=np.uint8)
    mask[:h_o, :w_o] = _kernels.raster_triangles(h_o, w_o, np.ascontiguousarray(tris))
    return mask


def render_four_views(item: FurnitureItem, mesh: TriMesh, resolution: tuple = (257, 257)) -> tuple:
    """Orthographic silhouettes from -z, +z, -x, +x, labeled in-image.

    One shared scale and centering keeps the four views comparable; with an
    odd resolution the Left/Right silhouettes of mirror-symmetric projections
    are exact pixel mirrors (the default is odd for precisely that reason).
    """
    if mesh is None or len(mesh.vertices) == 0:
        raise UnknownTarget(f"item {item.objkey!r} has no mesh to render")
    v = mesh.vertices
    half_span = max(
        abs(float(v[:, 0].min())), abs(float(v[:, 0].max())),
        abs(float(v[:, 2].min())), abs(float(v[:, 2].max())),
        1e-6,
    )
    y_mid = (float(v[:, 1].min()) + float(v[:, 1].max())) / 2.0
    y_half = max((float(v[:, 1].max()) - float(v[:, 1].min())) / 2.0, 1e-6)
    images = []
    for label, project in _VIEW_PROJECTIONS:
        mask = _silhouette(mesh, project, half_span, y_mid, y_half, resolution)
        buf = _blank(*resolution)
        buf[mask.astype(bool)] = SILHOUETTE
        _draw_text(buf, PAD, PAD, label, TEXT_INK)
        images.append(Image(buf))
    return tuple(images)


def render(
    scene: Scene,
    grid: Optional[Grid],
    spec: RenderSpec,
    meshes: Optional[Mapping[str, TriMesh]] = None,
) -> Image:
    """Deterministic capture of the scene per the requested view."""
    view = spec.view
    if isinstance(view, TopDown):
        return _render_top_down(scene, grid, spec)
    if isinstance(view, WallElevation):
        return _render_wall(scene, grid, spec, view.wall_id)
    if isinstance(view, ObjectTurntable):
        try:
            item = scene.find(view.objkey)
        except UnknownObjkey as exc:
            raise UnknownTarget(str(exc)) from exc
        mesh = (meshes or {}).get(view.objkey)
        if mesh is None:
            raise UnknownTarget(f"no mesh registered for {view.objkey!r}")
        faces = [lbl for lbl, _ in _VIEW_PROJECTIONS]
        if view.face not in faces:
            raise UnknownTarget(f"unknown face {view.face!r}")
        return render_four_views(item, mesh, spec.resolution)[faces.index(view.face)]
    raise UnknownTarget(f"unknown view {view!r}")
