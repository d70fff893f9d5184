"""Layout-quality metrics over sets of scene plans.

Three numbers summarize a plan set:

* ``oob_rate`` — percent of plans with any item outside the room or any
  colliding pair (plan-level: one bad item taints the whole plan).
* ``ori_rate`` — percent of plans whose items all pass an automated
  orientation proxy.  Human judgment of "usable orientation" is replaced by a
  ray test: an item is misoriented when its frontal ray meets a wall or
  another item's box with less than ``CLEARANCE`` metres of free space in
  front of it.  Reports label the result ORI-proxy to keep the distinction
  visible.
* ``clip_sim`` — mean cosine similarity between the embedded scene
  description and embedded top-down renders, over a handful of seeded
  pan/zoom perturbations per plan.  With the offline hash embedder this is a
  determinism probe, not a semantic score; with a real embedding service it
  becomes one.

Rates are percentages in [0, 100]; clip similarity is reported raw and x100
(both conventions circulate, so the report carries both).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import Polygon
from shapely.geometry import box as shapely_box

from .errors import EmptyPlanSet, MissingFrontal
from .geometry import COLLISION_EPSILON, aabb_overlap
from .o2o import DeterministicHashEmbedder, EmbeddingProvider
from .render import Image, RenderSpec, render
from .scene import Scene, frontal_direction, world_aabb

CLEARANCE = 0.3  # metres of free space required in front of an item
DEFAULT_VIEWS = 4
_EPS = 1e-9


# --- out-of-bound rate ------------------------------------------------------


def plan_out_of_bounds(scene: Scene) -> bool:
    """True when any item leaves the room volume or any pair collides."""
    room = scene.room
    poly = Polygon(room.floor_polygon)
    boxes = [(item, world_aabb(item)) for item in scene.items]
    for item, wa in boxes:
        footprint = shapely_box(wa.min.x, wa.min.z, wa.max.x, wa.max.z)
        if not poly.covers(footprint):
            return True
        if wa.min.y < -COLLISION_EPSILON or wa.max.y > room.height + COLLISION_EPSILON:
            return True
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i][0], boxes[j][0]
            if a.parent == b.objkey or b.parent == a.objkey:
                continue  # a child resting on / inside its parent is intentional
            if aabb_overlap(boxes[i][1], boxes[j][1]):
                return True
    return False


def oob_rate(plans: Sequence[Scene]) -> float:
    """Percent of plans flagged out-of-bounds (lower is better)."""
    if not plans:
        raise EmptyPlanSet("oob_rate needs at least one plan")
    flagged = sum(1 for p in plans if plan_out_of_bounds(p))
    return 100.0 * flagged / len(plans)


# --- orientation proxy ------------------------------------------------------


def _ray_exit_rect(cx: float, cz: float, dx: float, dz: float, rect) -> float:
    """Distance until a ray starting inside an (x0, z0, x1, z1) rect leaves it."""
    x0, z0, x1, z1 = rect
    tx = ((x1 - cx) / dx if dx > 0 else (x0 - cx) / dx) if abs(dx) > _EPS else math.inf
    tz = ((z1 - cz) / dz if dz > 0 else (z0 - cz) / dz) if abs(dz) > _EPS else math.inf
    return min(tx, tz)


def _ray_enter_rect(cx: float, cz: float, dx: float, dz: float, rect) -> Optional[float]:
    """Slab test: distance where the ray first meets the rect, None if it misses."""
    x0, z0, x1, z1 = rect
    t_near, t_far = -math.inf, math.inf
    for origin, d, lo, hi in ((cx, dx, x0, x1), (cz, dz, z0, z1)):
        if abs(d) <= _EPS:
            if origin < lo or origin > hi:
                return None
            continue
        t1, t2 = (lo - origin) / d, (hi - origin) / d
        t_near = max(t_near, min(t1, t2))
        t_far = min(t_far, max(t1, t2))
    if t_near > t_far or t_far < 0:
        return None
    return max(t_near, 0.0)


def _ray_segment(cx: float, cz: float, dx: float, dz: float, a, b) -> Optional[float]:
    ex, ez = b[0] - a[0], b[1] - a[1]
    det = dz * ex - dx * ez
    if abs(det) < _EPS:
        return None  # sliding along the wall, not into it
    t = (-(a[0] - cx) * ez + ex * (a[1] - cz)) / det
    s = (dx * (a[1] - cz) - dz * (a[0] - cx)) / det
    if t < -_EPS or s < -_EPS or s > 1 + _EPS:
        return None
    return max(t, 0.0)


def misoriented_items(scene: Scene, clearance: float = CLEARANCE) -> tuple[str, ...]:
    """Objkeys whose frontal face stares at a wall or a neighbor.

    Every item must already carry an assigned placement category — an
    Unassigned item never went through orientation prediction, so judging its
    theta would be meaningless.
    """
    for item in scene.items:
        if item.category == "Unassigned":
            raise MissingFrontal(f"{item.objkey} has no assigned facing (Unassigned)")
    boxes = {item.objkey: world_aabb(item) for item in scene.items}
    bad = []
    for item in scene.items:
        wa = boxes[item.objkey]
        cx, cz = (wa.min.x + wa.max.x) / 2, (wa.min.z + wa.max.z) / 2
        dx, dz = frontal_direction(item.placement.theta)
        own = _ray_exit_rect(cx, cz, dx, dz, (wa.min.x, wa.min.z, wa.max.x, wa.max.z))
        nearest = math.inf
        for n in range(len(scene.room.floor_polygon)):
            a, b = scene.room.edge(n)
            t = _ray_segment(cx, cz, dx, dz, a, b)
            if t is not None:
                nearest = min(nearest, t)
        for other in scene.items:
            if other.objkey == item.objkey:
                continue
            ob = boxes[other.objkey]
            if min(wa.max.y, ob.max.y) - max(wa.min.y, ob.min.y) <= 0:
                continue  # no vertical overlap: a lamp on a table ignores the table
            t = _ray_enter_rect(cx, cz, dx, dz, (ob.min.x, ob.min.z, ob.max.x, ob.max.z))
            if t is not None:
                nearest = min(nearest, t)
        if math.isfinite(nearest) and nearest - own < clearance:
            bad.append(item.objkey)
    return tuple(bad)


def ori_rate(plans: Sequence[Scene], clearance: float = CLEARANCE) -> float:
    """Percent of plans with zero misoriented items (higher is better)."""
    if not plans:
        raise EmptyPlanSet("ori_rate needs at least one plan")
    correct = sum(1 for p in plans if not misoriented_items(p, clearance))
    return 100.0 * correct / len(plans)


# --- text-to-render similarity ----------------------------------------------


def _perturbed_views(base: Image, views: int, rng: np.random.Generator) -> list[Image]:
    out = [base]
    h, w = base.pixels.shape[:2]
    for _ in range(max(views - 1, 0)):
        zoom = 1.0 + (rng.random() * 0.2 - 0.1)
        pan_x = rng.random() * 0.2 - 0.1
        pan_y = rng.random() * 0.2 - 0.1
        cw = min(w, max(8, int(round(w / zoom))))
        ch = min(h, max(8, int(round(h / zoom))))
        x0 = int(round((w - cw) / 2 + pan_x * w))
        y0 = int(round((h - ch) / 2 + pan_y * h))
        x0 = min(max(x0, 0), w - cw)
        y0 = min(max(y0, 0), h - ch)
        out.append(Image(np.ascontiguousarray(base.pixels[y0 : y0 + ch, x0 : x0 + cw])))
    return out


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def clip_sim(
    plans: Sequence[Scene],
    description: str,
    embedder: Optional[EmbeddingProvider] = None,
    views: int = DEFAULT_VIEWS,
    seed: int = 0,
) -> float:
    """Mean cos(text, render) over plans and seeded view perturbations."""
    if not plans:
        raise EmptyPlanSet("clip_sim needs at least one plan")
    if views < 1:
        raise ValueError("views must be >= 1")
    emb = embedder if embedder is not None else DeterministicHashEmbedder()
    text_vec = np.asarray(emb.text_embed(description), dtype=np.float64)
    plan_means = []
    for plan in plans:
        # the rng restarts per plan: every plan sees the same perturbations,
        # so plan sets stay comparable and duplicated plans average exactly
        rng = np.random.default_rng(seed)
        base = render(plan, None, RenderSpec())
        sims = [
            _cosine(text_vec, np.asarray(emb.image_embed(view), dtype=np.float64))
            for view in _perturbed_views(base, views, rng)
        ]
        plan_means.append(sum(sims) / len(sims))
    return sum(plan_means) / len(plan_means)


# --- combined report ----------------------------------------------------------


@dataclass(frozen=True)
class PlanBreakdown:
    oob: bool
    misoriented: tuple[str, ...]


@dataclass(frozen=True)
class MetricReport:
    plans: int
    oob_rate: float
    ori_proxy_rate: float
    clip_sim: float
    per_plan: tuple[PlanBreakdown, ...]

    @property
    def clip_sim_x100(self) -> float:
        return 100.0 * self.clip_sim

    def to_json(self) -> dict:
        return {
            "plans": self.plans,
            "oob_rate": self.oob_rate,
            "ori_proxy_rate": self.ori_proxy_rate,
            "clip_sim": self.clip_sim,
            "clip_sim_x100": self.clip_sim_x100,
            "per_plan": [
                {"oob": p.oob, "misoriented": list(p.misoriented)} for p in self.per_plan
            ],
        }


def evaluate(
    plans: Sequence[Scene],
    description: str,
    embedder: Optional[EmbeddingProvider] = None,
    views: int = DEFAULT_VIEWS,
    seed: int = 0,
    clearance: float = CLEARANCE,
) -> MetricReport:
    if not plans:
        raise EmptyPlanSet("evaluate needs at least one plan")
    per_plan = tuple(
        PlanBreakdown(oob=plan_out_of_bounds(p), misoriented=misoriented_items(p, clearance))
        for p in plans
    )
    return MetricReport(
        plans=len(plans),
        oob_rate=100.0 * sum(1 for p in per_plan if p.oob) / len(plans),
        ori_proxy_rate=100.0 * sum(1 for p in per_plan if not p.misoriented) / len(plans),
        clip_sim=clip_sim(plans, description, embedder, views=views, seed=seed),
        per_plan=per_plan,
    )


def format_table(report: MetricReport, label: str = "plans") -> str:
    """One-row plain-text table; v/^ mark whether lower or higher is better."""
    headers = ("method", "OOB(%) v", "ORI-proxy(%) ^", "CLIP-Sim ^", "CLIP-Sim x100 ^")
    row = (
        label,
        f"{report.oob_rate:.1f}",
        f"{report.ori_proxy_rate:.1f}",
        f"{report.clip_sim:.4f}",
        f"{report.clip_sim_x100:.2f}",
    )
    widths = [max(len(h), len(r)) for h, r in zip(headers, row)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return fmt.format(*headers) + "\n" + fmt.format(*row)
