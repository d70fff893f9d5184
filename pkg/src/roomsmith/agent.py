"""Chat-driven layout orchestration: one user turn in, executed 3D actions out.

The loop per turn: decompose the request into atomic tasks, run each task
through staged vision-question prompts (asset generation and judging, scale,
placement type, grid cells, frontal face, rotation), execute the resulting
actions, then self-review the layout and apply corrective adjustments until
the reviewer is satisfied or the round budget runs out.

Every model interaction goes through ``prompts.build_prompt`` with references
retrieved from the packaged example databases; the category used for
retrieval is itself asked from the model (a CategoryId prompt), so the whole
turn is a pure function of (scene, request, backend answers). That is what
makes recorded conversations replayable byte-for-byte.

State model: scenes are immutable values, so transactions are cheap — a turn
works on local bindings and commits to the session only when a stage
succeeds. Mesh payloads and frontal-face corrections live in runtime-only
registries on the session (they are derivable from the transcript, not part
of the persisted scene contract).
"""

from __future__ import annotations

import json
import logging
import math
import re
import uuid
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

from shapely.geometry import Polygon
from shapely.geometry import box as shapely_box

from .assets import AssetProvider, MockProvider, generate_asset, normalize_local_frame, ingest_mesh
from .backend import Backend, ChatTranscript, complete
from .errors import (
    BusySession,
    ClassifierFailure,
    ConstraintViolation,
    FootprintExceedsCells,
    InsufficientSpace,
    JudgeFailure,
    ParentTooSmall,
    ParseFailure,
    PlannerRejected,
    RetryBudgetExhausted,
    ScaleAdaptiveNotApplicable,
    UserClarificationNeeded,
)
from .geometry import TriMesh, Vec3, aabb_overlap, align_pose, compute_aabb
from .grids import (
    DEFAULT_CELL_SIZE,
    Grid,
    assignment_to_placement,
    build_floor_grid,
    build_wall_grid,
    column_letters,
    occupy_from_scene,
    plan_local_by_local,
    plan_on_object,
    plan_on_wall,
    plan_scale_adaptive,
    project_to_wall_grid,
)
from .o2o import (
    DeterministicHashEmbedder,
    EMPTY_SUPPORT,
    O2OConfig,
    SupportSet,
    build_offline_index,
    load_example_db,
    retrieve,
)
from .prompts import SchemaId, VisionQuestionPrompt, build_prompt, build_retry, parse_response
from .render import Image, RenderSpec, TopDown, WallElevation, render, render_four_views
from .scene import (
    Action3D,
    Add,
    FurnitureItem,
    Remove,
    Rotate,
    Scale,
    Scene,
    Translate,
    execute,
    next_objkey,
    scene_canonical_bytes,
    scene_from_json,
    scene_summary,
    world_aabb,
    world_extents,
)

log = logging.getLogger(__name__)

# Task-category identifiers of the packaged decomposition database. Categories
# 1, 3 and 7 are composite by construction; a decomposition answer may only
# use the atomic ones, and the constraint retry enforces that.
TASK_CATEGORIES: dict[str, str] = {
    "0": "remove an object",
    "1": "abstract addition",
    "2": "add one explicit object",
    "3": "add several objects",
    "4": "move an object",
    "5": "rotate an object",
    "6": "rescale an object",
    "7": "compound request",
}
ATOMIC_CATEGORIES: tuple[str, ...] = ("0", "2", "4", "5", "6")

PLACEMENT_KINDS = ("translate", "scale", "rotate")

# View label -> theta of the mesh's own front when that view shows it. The
# facing table assumes the local front points at +z (theta 0); a mesh whose
# front appears in e.g. the Front view (camera at -z) is half a turn off.
_FACE_OFFSET = {"Back": 0.0, "Front": 180.0, "Left": 90.0, "Right": 270.0}


# --- atomic tasks -----------------------------------------------------------------


@dataclass(frozen=True)
class AddTask:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("task text must be non-empty")


@dataclass(frozen=True)
class RemoveTask:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("task text must be non-empty")


@dataclass(frozen=True)
class PlacementTask:
    kind: str  # translate | scale | rotate
    text: str

    def __post_init__(self):
        if self.kind not in PLACEMENT_KINDS:
            raise ValueError(f"placement kind must be one of {PLACEMENT_KINDS}")
        if not self.text.strip():
            raise ValueError("task text must be non-empty")


AtomicTask = Union[AddTask, RemoveTask, PlacementTask]

_TASK_BUILDERS: dict[str, Callable[[str], AtomicTask]] = {
    "0": RemoveTask,
    "2": AddTask,
    "4": lambda text: PlacementTask("translate", text),
    "5": lambda text: PlacementTask("rotate", text),
    "6": lambda text: PlacementTask("scale", text),
}


# --- configuration, session, dependencies ------------------------------------------


@dataclass(frozen=True)
class AgentConfig:
    """Per-session knobs, snapshotted at session creation and persisted."""

    n_candidates: int = 16
    style: Optional[str] = None
    max_reflection_rounds: int = 3
    cell_size: float = DEFAULT_CELL_SIZE
    capture_resolution: tuple = (256, 256)

    def to_json(self) -> dict:
        return {
            "n_candidates": self.n_candidates,
            "style": self.style,
            "max_reflection_rounds": self.max_reflection_rounds,
            "cell_size": self.cell_size,
            "capture_resolution": list(self.capture_resolution),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AgentConfig":
        return cls(
            n_candidates=int(doc.get("n_candidates", 16)),
            style=doc.get("style"),
            max_reflection_rounds=int(doc.get("max_reflection_rounds", 3)),
            cell_size=float(doc.get("cell_size", DEFAULT_CELL_SIZE)),
            capture_resolution=tuple(doc.get("capture_resolution", (256, 256))),
        )


@dataclass
class Session:
    """One conversation: scene state, chat memory, and runtime registries.

    ``meshes`` and ``frontal_offsets`` are rebuilt as items are added; they
    are not part of the persisted contract (scene.json / transcript.jsonl /
    config.json) — a reloaded session can render top-down and wall views but
    must re-add an item before object views of it exist again.
    """

    id: str
    scene: Scene
    transcript: ChatTranscript
    config: AgentConfig = field(default_factory=AgentConfig)
    pending: deque = field(default_factory=deque)
    reflection_rounds_used: int = 0
    meshes: dict = field(default_factory=dict)  # objkey -> aligned TriMesh
    frontal_offsets: dict = field(default_factory=dict)  # objkey -> degrees
    busy: bool = False


def new_session(
    scene: Scene, config: Optional[AgentConfig] = None, session_id: Optional[str] = None
) -> Session:
    sid = session_id or f"s{uuid.uuid4().hex[:12]}"
    return Session(id=sid, scene=scene, transcript=ChatTranscript(sid), config=config or AgentConfig())


@dataclass(frozen=True)
class ReferenceBank:
    """Offline-indexed example database for one question kind."""

    kind: SchemaId
    taxonomy: tuple
    index: Mapping[str, SupportSet]

    def fallback(self) -> SupportSet:
        # degraded retrieval still needs exemplars: broadest category wins
        return max(self.index.values(), key=lambda s: (len(s), s.category))


REFERENCE_KINDS: tuple[SchemaId, ...] = tuple(
    k for k in SchemaId if k is not SchemaId.CATEGORY_ID
)


def load_reference_banks(
    data_dir: Optional[Path] = None, k: int = 8, embedder=None
) -> dict[SchemaId, ReferenceBank]:
    """Build the per-kind retrieval indexes from the packaged databases."""
    root = Path(data_dir) if data_dir else Path(__file__).parent / "data"
    emb = embedder or DeterministicHashEmbedder()
    banks: dict[SchemaId, ReferenceBank] = {}
    for kind in REFERENCE_KINDS:
        taxonomy, records = load_example_db(root / f"{kind.snake}.json")
        cfg = O2OConfig(k=k, taxonomy=tuple(taxonomy))
        banks[kind] = ReferenceBank(
            kind=kind, taxonomy=tuple(taxonomy), index=build_offline_index(records, cfg, emb)
        )
    return banks


@dataclass
class AgentDeps:
    """Everything a turn needs besides the session itself."""

    backend: Backend
    assets: AssetProvider
    references: Mapping[SchemaId, ReferenceBank]
    session_root: Optional[Path] = None


def default_deps(
    backend: Backend,
    assets: Optional[AssetProvider] = None,
    k: int = 8,
    data_dir: Optional[Path] = None,
    session_root: Optional[Path] = None,
) -> AgentDeps:
    return AgentDeps(
        backend=backend,
        assets=assets or MockProvider(seed=0),
        references=load_reference_banks(data_dir=data_dir, k=k),
        session_root=Path(session_root) if session_root else None,
    )


@dataclass(frozen=True)
class TurnResult:
    scene: Scene
    actions: tuple
    warnings: tuple
    renders: tuple  # final capture(s) of the committed scene


# --- asking the model --------------------------------------------------------------


def _ask(
    prompt: VisionQuestionPrompt,
    deps: AgentDeps,
    transcript: ChatTranscript,
    check: Optional[Callable[[dict], None]] = None,
):
    """Send, parse, and domain-check one prompt, burning the retry budget.

    ``check`` raises ConstraintViolation for answers that parse but cannot be
    used; both failure kinds re-ask with a corrective question until
    RetryBudgetExhausted propagates.
    """
    while True:
        raw = complete(prompt, deps.backend, transcript)
        try:
            parsed = parse_response(raw, prompt.response_schema)
            if check is not None:
                check(parsed.payload)
            return parsed
        except (ParseFailure, ConstraintViolation) as failure:
            prompt = build_retry(prompt, failure)


class _PromptClassifier:
    """Category assignment for reference retrieval, asked from the model."""

    def __init__(self, kind: SchemaId, bank: ReferenceBank, scene: Scene, deps: AgentDeps,
                 transcript: ChatTranscript):
        self.kind = kind
        self.bank = bank
        self.scene = scene
        self.deps = deps
        self.transcript = transcript

    def classify(self, u: str, t: str, v: Sequence) -> str:
        task = (
            f"Input: {u}\n"
            f"Allowed category ids: {', '.join(self.bank.taxonomy)}.\n"
            "Answer with exactly one allowed id."
        )
        allowed = set(self.bank.taxonomy)

        def check(payload: dict) -> None:
            if payload["category"] not in allowed:
                raise ConstraintViolation(
                    f"category {payload['category']!r} is not an allowed id"
                )

        prompt = build_prompt(SchemaId.CATEGORY_ID, self.scene, EMPTY_SUPPORT, task)
        try:
            parsed = _ask(prompt, self.deps, self.transcript, check=check)
        except RetryBudgetExhausted as exc:
            raise ClassifierFailure(str(exc)) from exc
        return parsed.payload["category"]


def _references(
    kind: SchemaId, scene: Scene, u: str, session: Session, deps: AgentDeps
) -> SupportSet:
    bank = deps.references[kind]
    classifier = _PromptClassifier(kind, bank, scene, deps, session.transcript)
    refs = retrieve((u, scene_summary(scene), ()), bank.index, classifier)
    if len(refs) == 0:
        refs = bank.fallback()
        log.warning("retrieval degraded for %s; using the %r support set",
                    kind.value, refs.category)
    return refs


def _capture(scene: Scene, grid: Optional[Grid], config: AgentConfig) -> Image:
    view = WallElevation(grid.surface_ref) if grid is not None and grid.surface == "Wall" else TopDown()
    return render(scene, grid, RenderSpec(view=view, resolution=config.capture_resolution))


# --- layout sanity (shared by refinements and reflection) ---------------------------


def _layout_violations(scene: Scene) -> list[str]:
    """Collision pairs plus out-of-room items, as human-readable messages.

    Parent/child pairs are exempt from the collision check — an item resting
    on or inside its parent is intentional.
    """
    msgs: list[str] = []
    poly = Polygon(scene.room.floor_polygon)
    boxes = [(it, world_aabb(it)) for it in scene.items]
    for it, bb in boxes:
        if it.category == "Other":
            continue  # carried by its parent; the pair check keeps it honest
        inside = poly.covers(shapely_box(bb.min.x, bb.min.z, bb.max.x, bb.max.z))
        if not inside or bb.min.y < -1e-6 or bb.max.y > scene.room.height + 1e-6:
            msgs.append(f"{it.objkey} is outside the room")
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i][0], boxes[j][0]
            if a.parent == b.objkey or b.parent == a.objkey:
                continue
            if aabb_overlap(boxes[i][1], boxes[j][1]):
                msgs.append(f"{a.objkey} collides with {b.objkey}")
    return msgs


# --- task decomposition --------------------------------------------------------------


def decompose(user_text: str, session: Session, deps: AgentDeps) -> list[AtomicTask]:
    """Split a request into ordered atomic tasks via the decomposition prompt."""
    if not user_text.strip():
        return []
    refs = _references(SchemaId.TASK_DECOMPOSITION, session.scene, user_text, session, deps)
    prompt = build_prompt(SchemaId.TASK_DECOMPOSITION, session.scene, refs, user_text)

    def check(payload: dict) -> None:
        for entry in payload["tasks"]:
            cat = entry["category"]
            if cat not in _TASK_BUILDERS:
                raise ConstraintViolation(
                    f"category {cat!r} is not atomic; use only "
                    + ", ".join(ATOMIC_CATEGORIES)
                )
            if not entry["instruction"].strip():
                raise ConstraintViolation("instruction must not be blank")

    try:
        parsed = _ask(prompt, deps, session.transcript, check=check)
    except RetryBudgetExhausted as exc:
        raise UserClarificationNeeded(
            f"could not break the request into steps: {exc}"
        ) from exc
    return [
        _TASK_BUILDERS[entry["category"]](entry["instruction"])
        for entry in parsed.payload["tasks"]
    ]


# --- target and label resolution ------------------------------------------------------


_LEAD_RE = re.compile(
    r"^(?:please\s+)?(?:can you\s+|could you\s+)?"
    r"(?:add|place|put|create|generate|insert|make|spawn|hang|install|bring in|drop)\b\s*",
    re.IGNORECASE,
)
_ARTICLE_RE = re.compile(r"^(?:a|an|the|some|another|one|new)\s+", re.IGNORECASE)
_TAIL_RE = re.compile(
    r"\s+(?:in|into|at|against|near|next to|beside|by|under|underneath|below|"
    r"above|over|on|onto|along|facing|toward|towards|across)\b.*$",
    re.IGNORECASE,
)


def extract_label(text: str) -> str:
    """Noun phrase an Add instruction asks for, location clause stripped."""
    s = text.strip().strip(".!")
    s = _LEAD_RE.sub("", s)
    while True:
        shorter = _ARTICLE_RE.sub("", s)
        if shorter == s:
            break
        s = shorter
    s = _TAIL_RE.sub("", s).strip()
    return s or "item"


def _words(text: str) -> set:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def _resolve_objkey(text: str, session: Session, deps: AgentDeps) -> str:
    """Find which scene item an instruction refers to.

    A unique objkey literally present in the text short-circuits; otherwise
    the model picks from a numbered candidate list over a scene capture.
    """
    scene = session.scene
    if not scene.items:
        raise UserClarificationNeeded("the scene is empty; there is nothing to target")
    tokens = set(re.findall(r"[a-z0-9_]+", text.lower()))
    literal = [k for k in scene.objkeys() if k.lower() in tokens]
    if len(literal) == 1:
        return literal[0]

    listing = "\n".join(
        f"{i}. {it.objkey} — {it.label}" for i, it in enumerate(scene.items)
    )
    task = (
        "Which scene item does this instruction refer to?\n"
        f"Instruction: {text}\n"
        f"Candidates:\n{listing}"
    )
    n = len(scene.items)

    def check(payload: dict) -> None:
        if payload["choice"] >= n:
            raise ConstraintViolation(f"choice must be below {n}")

    refs = _references(SchemaId.CANDIDATE_PICK, scene, task, session, deps)
    capture = _capture(scene, None, session.config)
    prompt = build_prompt(SchemaId.CANDIDATE_PICK, scene, refs, task, visuals=(capture,))
    try:
        parsed = _ask(prompt, deps, session.transcript, check=check)
    except RetryBudgetExhausted as exc:
        raise UserClarificationNeeded(
            f"could not tell which item {text!r} refers to"
        ) from exc
    return scene.items[parsed.payload["choice"]].objkey


def _resolve_parent(text: str, scene: Scene) -> Optional[str]:
    """Supporting furniture for an on-object placement; None if nothing fits."""
    tokens = _words(text)
    for it in scene.items:
        if _words(it.objkey) <= tokens and it.category == "Floor":
            return it.objkey
    mentioned = [
        it for it in scene.items
        if it.category == "Floor" and (_words(it.label) & tokens)
    ]
    if mentioned:
        return mentioned[0].objkey
    floors = [it for it in scene.items if it.category == "Floor"]
    if not floors:
        return None
    # largest top face first; scene order breaks ties deterministically
    best = max(
        enumerate(floors),
        key=lambda pair: (world_extents(pair[1]).x * world_extents(pair[1]).z, -pair[0]),
    )
    return best[1].objkey


# --- per-question helpers for the Add pipeline ----------------------------------------


class _CandidateJudge:
    """CandidateJudge backed by a candidate-pick prompt over rendered views."""

    def __init__(self, label: str, session: Session, deps: AgentDeps):
        self.label = label
        self.session = session
        self.deps = deps

    def pick(self, text: str, candidates: Sequence[TriMesh]) -> int:
        views = []
        for i, mesh in enumerate(candidates):
            probe = FurnitureItem(
                objkey=f"candidate_{i}", label=self.label, aabb_local=compute_aabb(mesh)
            )
            views.append(render_four_views(probe, mesh)[0])
        task = (
            f"Pick the candidate that best represents: {self.label}.\n"
            f"{len(candidates)} candidates are attached."
        )
        n = len(candidates)

        def check(payload: dict) -> None:
            if payload["choice"] >= n:
                raise ConstraintViolation(f"choice must be below {n}")

        scene = self.session.scene
        refs = _references(SchemaId.CANDIDATE_PICK, scene, task, self.session, self.deps)
        prompt = build_prompt(
            SchemaId.CANDIDATE_PICK, scene, refs, task, visuals=tuple(views)
        )
        try:
            parsed = _ask(prompt, self.deps, self.session.transcript, check=check)
        except RetryBudgetExhausted as exc:
            raise JudgeFailure(str(exc)) from exc
        return parsed.payload["choice"]


def _ask_scale(
    item_text: str, objkey: str, label: str, extents: Vec3, scene: Scene,
    session: Session, deps: AgentDeps, generated: bool,
) -> float:
    form = "Its generated form spans" if generated else "It currently spans"
    task = (
        f"The object {objkey} is a {label}. {form} "
        f"{extents.x:.2f} x {extents.y:.2f} x {extents.z:.2f} m (width x height x depth).\n"
        f"Requested as: {item_text}"
    )
    x0, z0, x1, z1 = scene.room.bounds
    room_w, room_d = x1 - x0, z1 - z0

    def check(payload: dict) -> None:
        f = payload["scale"]
        sx, sz = extents.x * f, extents.z * f
        fits = (sx <= room_w and sz <= room_d) or (sx <= room_d and sz <= room_w)
        if not fits:
            raise ConstraintViolation(
                f"scale {f} makes the footprint {sx:.2f} x {sz:.2f} m, larger than the room"
            )
        if extents.y * f > scene.room.height:
            raise ConstraintViolation(f"scale {f} exceeds the room height")

    refs = _references(SchemaId.SCALE_FACTOR, scene, task, session, deps)
    capture = _capture(scene, None, session.config)
    prompt = build_prompt(SchemaId.SCALE_FACTOR, scene, refs, task, visuals=(capture,))
    parsed = _ask(prompt, deps, session.transcript, check=check)
    return float(parsed.payload["scale"])


def _ask_placement_category(
    item_text: str, objkey: str, label: str, scene: Scene, session: Session, deps: AgentDeps
) -> str:
    task = (
        f"The object {objkey} is a {label}. Decide its placement type.\n"
        f"Requested as: {item_text}"
    )
    refs = _references(SchemaId.PLACEMENT_CATEGORY, scene, task, session, deps)
    prompt = build_prompt(SchemaId.PLACEMENT_CATEGORY, scene, refs, task)
    parsed = _ask(prompt, deps, session.transcript)
    return parsed.payload["placement"]


def _ask_frontal_face(
    item: FurnitureItem, mesh: TriMesh, scene: Scene, session: Session, deps: AgentDeps
) -> str:
    views = render_four_views(item, mesh)
    task = f"The object is {item.objkey} ({item.label})."
    refs = _references(SchemaId.FRONTAL_FACE, scene, task, session, deps)
    prompt = build_prompt(SchemaId.FRONTAL_FACE, scene, refs, task, visuals=views)
    parsed = _ask(prompt, deps, session.transcript)
    return parsed.payload["face"]


def _ask_rotation(
    item_text: str, item: FurnitureItem, scene: Scene, session: Session, deps: AgentDeps,
    check: Optional[Callable[[dict], None]] = None,
) -> float:
    pos = item.placement.position
    task = (
        f"The object {item.objkey} ({item.label}) stands at "
        f"({pos.x:.2f}, {pos.y:.2f}, {pos.z:.2f}); its current orientation is "
        f"{item.placement.theta:.1f} degrees.\n"
        f"Requested as: {item_text}"
    )
    refs = _references(SchemaId.ROTATION_ANGLE, scene, task, session, deps)
    capture = _capture(scene, None, session.config)
    prompt = build_prompt(SchemaId.ROTATION_ANGLE, scene, refs, task, visuals=(capture,))
    parsed = _ask(prompt, deps, session.transcript, check=check)
    return float(parsed.payload["theta"])


class _PromptPlanner:
    """PlacementPlanner that asks the cell-assignment question per proposal.

    The reference category is classified once on the first proposal and
    reused for feedback retries, so a rejected round re-asks with the same
    support set (only the question text changes).
    """

    def __init__(self, scene: Scene, session: Session, deps: AgentDeps, note: str):
        self.scene = scene
        self.session = session
        self.deps = deps
        self.note = note
        self._refs: Optional[SupportSet] = None

    def propose(self, items: Sequence[FurnitureItem], grid: Grid, feedback: Optional[str]) -> dict:
        task = self._task_text(items, grid, feedback)
        if self._refs is None:
            self._refs = _references(
                SchemaId.CELL_ASSIGNMENT, self.scene, task, self.session, self.deps
            )
        capture = _capture(self.scene, grid, self.session.config)
        prompt = build_prompt(
            SchemaId.CELL_ASSIGNMENT, self.scene, self._refs, task, visuals=(capture,)
        )
        parsed = _ask(prompt, self.deps, self.session.transcript)
        return parsed.payload

    def _task_text(self, items: Sequence[FurnitureItem], grid: Grid, feedback: Optional[str]) -> str:
        last_col = column_letters(grid.n_cols - 1)
        where = f"{grid.surface} grid" + (f" of {grid.surface_ref}" if grid.surface_ref else "")
        lines = [
            f"Place {len(items)} object(s) on the {where}: "
            f"{grid.n_rows} rows (1-{grid.n_rows}) by {grid.n_cols} columns (A-{last_col}), "
            f"cell size {grid.cell_size:.2f} m.",
            f"Context: {self.note}",
        ]
        cs = grid.cell_size
        for it in items:
            e = world_extents(it)
            if grid.surface == "Wall":
                rows = max(1, math.ceil(e.y / cs - 1e-9))
                cols = max(1, math.ceil(e.x / cs - 1e-9))
                lines.append(
                    f"- {it.objkey} ({it.label}): needs {rows} row(s) x {cols} column(s)."
                )
            else:
                rows = max(1, math.ceil(e.z / cs - 1e-9))
                cols = max(1, math.ceil(e.x / cs - 1e-9))
                lines.append(
                    f"- {it.objkey} ({it.label}): needs {rows} row(s) x {cols} column(s) "
                    f"facing Up or Down, or {cols} row(s) x {rows} column(s) facing Left or Right."
                )
        free = ", ".join(str(c) for c in sorted(grid.free_cells()))
        lines.append(f"Free cells: {free if free else 'none'}.")
        if feedback:
            lines.append(f"Previous attempt rejected: {feedback}")
        return "\n".join(lines)


# --- atomic task execution -------------------------------------------------------------


def _apply(scene: Scene, action: Action3D, item: Optional[FurnitureItem] = None) -> Scene:
    """execute(), except Add splices the fully-built item (judged mesh,
    category, parent) rather than re-ingesting through a provider."""
    if isinstance(action, Add):
        assert item is not None
        return replace(scene, items=scene.items + (item,), revision=scene.revision + 1)
    return execute(scene, action)


def _emit_placement(
    scene: Scene, objkey: str, placement, actions: list
) -> Scene:
    """Translate/Rotate/Scale deltas that move an item to ``placement``."""
    item = scene.find(objkey)
    cur = item.placement
    if (cur.position.x, cur.position.y, cur.position.z) != (
        placement.position.x, placement.position.y, placement.position.z
    ):
        act = Translate(objkey, placement.position)
        scene = _apply(scene, act)
        actions.append(act)
    delta = (placement.theta - cur.theta) % 360.0
    if delta > 1e-9:
        act = Rotate(objkey, delta)
        scene = _apply(scene, act)
        actions.append(act)
    factor = placement.scale.x / cur.scale.x
    if abs(factor - 1.0) > 1e-12:
        act = Scale(objkey, Vec3(factor, factor, factor))
        scene = _apply(scene, act)
        actions.append(act)
    return scene


def _plan_floor(
    item: FurnitureItem, scene: Scene, session: Session, deps: AgentDeps, note: str,
    skip: Sequence[str] = (),
):
    grid = build_floor_grid(scene.room, session.config.cell_size)
    occupy_from_scene(grid, scene, skip=skip)
    planner = _PromptPlanner(scene, session, deps, note)
    try:
        assignment = plan_scale_adaptive(item, grid, planner)
    except ScaleAdaptiveNotApplicable:
        [assignment] = plan_local_by_local([item], grid, planner)
    return assignment, grid


def _plan_wall(
    item: FurnitureItem, scene: Scene, session: Session, deps: AgentDeps, note: str
):
    """Try each tagged wall in declaration order until one can host the item."""
    last_error: Exception = InsufficientSpace("room has no tagged walls")
    floor_items = [it for it in scene.items if it.category == "Floor"]
    for wall in scene.room.walls:
        base = build_wall_grid(scene.room, wall.id, session.config.cell_size)
        grid = project_to_wall_grid(floor_items, base)
        planner = _PromptPlanner(scene, session, deps, note)
        try:
            return plan_on_wall(item, grid, planner), grid
        except (PlannerRejected, InsufficientSpace, FootprintExceedsCells) as exc:
            last_error = exc
    raise last_error


def _orient_floor_item(
    objkey: str, task_text: str, scene: Scene, mesh: TriMesh, session: Session,
    deps: AgentDeps, actions: list, warnings: list, refine: bool,
) -> Scene:
    """Frontal-face correction, then the rotation-angle refinement."""
    item = scene.find(objkey)
    face = _ask_frontal_face(item, mesh, scene, session, deps)
    offset = _FACE_OFFSET[face]
    session.frontal_offsets[objkey] = offset
    if offset:
        candidate = _apply(scene, Rotate(objkey, (-offset) % 360.0))
        if len(_layout_violations(candidate)) > len(_layout_violations(scene)):
            warnings.append(
                f"{objkey}: frontal correction of {offset:.0f} degrees would break the "
                "layout; keeping the planned orientation"
            )
        else:
            act = Rotate(objkey, (-offset) % 360.0)
            scene = _apply(scene, act)
            actions.append(act)
    if not refine:
        return scene

    item = scene.find(objkey)
    before = len(_layout_violations(scene))

    def check(payload: dict) -> None:
        delta = (float(payload["theta"]) - scene.find(objkey).placement.theta) % 360.0
        if delta <= 1e-9:
            return
        candidate = _apply(scene, Rotate(objkey, delta))
        if len(_layout_violations(candidate)) > before:
            raise ConstraintViolation(
                f"theta {payload['theta']} pushes {objkey} into a wall or another item"
            )

    try:
        theta = _ask_rotation(task_text, item, scene, session, deps, check=check)
    except RetryBudgetExhausted:
        warnings.append(f"{objkey}: rotation refinement failed; keeping planned orientation")
        return scene
    delta = (theta - item.placement.theta) % 360.0
    if delta > 1e-9:
        act = Rotate(objkey, delta)
        scene = _apply(scene, act)
        actions.append(act)
    return scene


def _run_add(task: AddTask, session: Session, deps: AgentDeps, warnings: list) -> list:
    scene = session.scene
    label = extract_label(task.text)
    objkey = next_objkey(scene, label)

    judge = _CandidateJudge(label, session, deps)
    raw = generate_asset(
        label,
        style=session.config.style,
        n_candidates=session.config.n_candidates,
        assets=deps.assets,
        judge=judge,
    )
    aligned = normalize_local_frame(align_pose(raw)[1])
    extents = compute_aabb(aligned).extents

    factor = _ask_scale(task.text, objkey, label, extents, scene, session, deps, generated=True)
    category = _ask_placement_category(task.text, objkey, label, scene, session, deps)

    parent: Optional[str] = None
    if category == "Other":
        parent = _resolve_parent(task.text, scene)
        if parent is None:
            warnings.append(f"{objkey}: no supporting furniture found; placing on the floor")
            category = "Floor"
    if category == "Wall" and not scene.room.walls:
        warnings.append(f"{objkey}: room has no tagged walls; placing on the floor")
        category = "Floor"

    item = ingest_mesh(
        objkey, label, raw, category=category, style_tag=session.config.style, parent=parent
    )
    actions: list = [Add(objkey, label)]
    working = _apply(scene, actions[0], item=item)
    if abs(factor - 1.0) > 1e-12:
        act = Scale(objkey, Vec3(factor, factor, factor))
        working = _apply(working, act)
        actions.append(act)

    placed = working.find(objkey)
    if category == "Wall":
        assignment, grid = _plan_wall(placed, working, session, deps, task.text)
        placement = assignment_to_placement(assignment, placed, grid)
    elif category == "Other":
        parent_item = working.find(parent)
        try:
            assignment, grid = plan_on_object(
                placed, parent_item, _PromptPlanner(working, session, deps, task.text)
            )
            placement = assignment_to_placement(
                assignment, placed, grid, parent_top=world_aabb(parent_item).max.y
            )
        except (ParentTooSmall, PlannerRejected, InsufficientSpace) as exc:
            warnings.append(f"{objkey}: cannot rest on {parent}: {exc}; placing on the floor")
            category, parent = "Floor", None
            # rebuild the item with the corrected category, keeping its scale
            working = _apply(working, Remove(objkey))
            working = _apply(
                working,
                Add(objkey, label),
                item=replace(item, category="Floor", parent=None, placement=placed.placement),
            )
            placed = working.find(objkey)
            assignment, grid = _plan_floor(placed, working, session, deps, task.text, skip=(objkey,))
            placement = assignment_to_placement(assignment, placed, grid, room=working.room)
    else:
        assignment, grid = _plan_floor(placed, working, session, deps, task.text, skip=(objkey,))
        placement = assignment_to_placement(assignment, placed, grid, room=working.room)

    working = _emit_placement(working, objkey, placement, actions)

    if category == "Floor":
        working = _orient_floor_item(
            objkey, task.text, working, aligned, session, deps, actions, warnings, refine=True
        )
    elif category == "Other":
        working = _orient_floor_item(
            objkey, task.text, working, aligned, session, deps, actions, warnings, refine=False
        )
    # wall items keep the facing the wall dictates

    session.scene = working
    session.meshes[objkey] = aligned
    return actions


def _run_remove(task: RemoveTask, session: Session, deps: AgentDeps, warnings: list) -> list:
    objkey = _resolve_objkey(task.text, session, deps)
    scene = session.scene
    doomed = [objkey] + [it.objkey for it in scene.items if it.parent == objkey]
    actions = []
    working = scene
    for key in doomed:
        act = Remove(key)
        working = _apply(working, act)
        actions.append(act)
    if len(doomed) > 1:
        warnings.append(
            f"also removed {', '.join(doomed[1:])} (resting on {objkey})"
        )
    session.scene = working
    for key in doomed:
        session.meshes.pop(key, None)
        session.frontal_offsets.pop(key, None)
    return actions


def _run_placement(task: PlacementTask, session: Session, deps: AgentDeps, warnings: list) -> list:
    objkey = _resolve_objkey(task.text, session, deps)
    scene = session.scene
    item = scene.find(objkey)
    actions: list = []

    if task.kind == "scale":
        factor = _ask_scale(
            task.text, objkey, item.label, world_extents(item), scene, session, deps,
            generated=False,
        )
        act = Scale(objkey, Vec3(factor, factor, factor))
        candidate = _apply(scene, act)
        if len(_layout_violations(candidate)) > len(_layout_violations(scene)):
            raise ConstraintViolation(
                f"scaling {objkey} by {factor} would push it out of bounds or into another item"
            )
        session.scene = candidate
        return [act]

    if task.kind == "rotate":
        before = len(_layout_violations(scene))

        def check(payload: dict) -> None:
            delta = (float(payload["theta"]) - item.placement.theta) % 360.0
            if delta <= 1e-9:
                return
            if len(_layout_violations(_apply(scene, Rotate(objkey, delta)))) > before:
                raise ConstraintViolation(
                    f"theta {payload['theta']} pushes {objkey} into a wall or another item"
                )

        theta = _ask_rotation(task.text, item, scene, session, deps, check=check)
        delta = (theta - item.placement.theta) % 360.0
        if delta > 1e-9:
            act = Rotate(objkey, delta)
            session.scene = _apply(scene, act)
            actions.append(act)
        return actions

    # translate: re-plan the item on its own surface
    working = scene
    if item.category == "Wall":
        assignment, grid = _plan_wall(item, working, session, deps, task.text)
        placement = assignment_to_placement(assignment, item, grid)
    elif item.category == "Other" and item.parent and working.has(item.parent):
        parent_item = working.find(item.parent)
        assignment, grid = plan_on_object(
            item, parent_item, _PromptPlanner(working, session, deps, task.text)
        )
        placement = assignment_to_placement(
            assignment, item, grid, parent_top=world_aabb(parent_item).max.y
        )
    else:
        assignment, grid = _plan_floor(item, working, session, deps, task.text, skip=(objkey,))
        placement = assignment_to_placement(assignment, item, grid, room=working.room)
        offset = session.frontal_offsets.get(objkey, 0.0)
        if offset:
            placement = replace(placement, theta=(placement.theta - offset) % 360.0)
    working = _emit_placement(working, objkey, placement, actions)
    session.scene = working
    return actions


def run_atomic(task: AtomicTask, session: Session, deps: AgentDeps,
               warnings: Optional[list] = None) -> list:
    """Execute one atomic task against the session, transactionally.

    On any failure the session's scene and registries are exactly as before;
    on success they reflect the returned, already-executed actions.
    """
    warnings = [] if warnings is None else warnings
    before_scene = session.scene
    before_meshes = dict(session.meshes)
    before_offsets = dict(session.frontal_offsets)
    try:
        if isinstance(task, AddTask):
            return _run_add(task, session, deps, warnings)
        if isinstance(task, RemoveTask):
            return _run_remove(task, session, deps, warnings)
        if isinstance(task, PlacementTask):
            return _run_placement(task, session, deps, warnings)
        raise TypeError(f"unknown task {type(task).__name__}")
    except Exception:
        session.scene = before_scene
        session.meshes = before_meshes
        session.frontal_offsets = before_offsets
        raise


# --- self-reflection ----------------------------------------------------------------


def _adjustment_action(entry: dict, scene: Scene) -> Action3D:
    objkey = entry["objkey"]
    scene.find(objkey)  # raises UnknownObjkey for stale keys
    value = entry["value"]
    if entry["action"] == "translate":
        if not (isinstance(value, (list, tuple)) and len(value) == 3):
            raise ConstraintViolation(f"translate value for {objkey} must be [x, y, z]")
        return Translate(objkey, Vec3(float(value[0]), float(value[1]), float(value[2])))
    if entry["action"] == "rotate":
        return Rotate(objkey, float(value) % 360.0)
    factor = float(value)
    if factor <= 0:
        raise ConstraintViolation(f"scale value for {objkey} must be positive")
    return Scale(objkey, Vec3(factor, factor, factor))


def reflect(session: Session, deps: AgentDeps, request: str = "",
            warnings: Optional[list] = None) -> list:
    """Review the layout and apply corrective adjustments, bounded rounds.

    Each round renders the scene, asks the reflection question, and either
    stops (satisfied) or applies the proposed adjustments — provided they do
    not increase the number of layout violations. Exhausting the budget is
    not an error; it leaves the last scene and a warning.
    """
    warnings = [] if warnings is None else warnings
    executed: list = []
    for _round in range(session.config.max_reflection_rounds):
        scene = session.scene
        session.reflection_rounds_used += 1
        capture = _capture(scene, None, session.config)
        task = (
            f"User request: {request}\n"
            "Assess whether the current layout satisfies it."
        )
        refs = _references(SchemaId.REFLECTION, scene, task, session, deps)
        prompt = build_prompt(SchemaId.REFLECTION, scene, refs, task, visuals=(capture,))
        before = len(_layout_violations(scene))

        def check(payload: dict) -> None:
            if payload["satisfactory"]:
                return
            candidate = scene
            for entry in payload.get("adjustments", []):
                try:
                    candidate = _apply(candidate, _adjustment_action(entry, candidate))
                except Exception as exc:  # unknown objkey, bad value shape
                    raise ConstraintViolation(str(exc)) from exc
            if len(_layout_violations(candidate)) > before:
                raise ConstraintViolation("the adjustments make the layout worse")

        try:
            parsed = _ask(prompt, deps, session.transcript, check=check)
        except RetryBudgetExhausted:
            warnings.append("reflection gave no usable adjustments; keeping the layout")
            return executed
        if parsed.payload["satisfactory"]:
            return executed
        adjustments = parsed.payload.get("adjustments", [])
        if not adjustments:
            warnings.append("reflection was unsatisfied but proposed no adjustments")
            return executed
        working = scene
        for entry in adjustments:
            act = _adjustment_action(entry, working)
            working = _apply(working, act)
            executed.append(act)
        session.scene = working
    warnings.append(
        f"reflection budget ({session.config.max_reflection_rounds} rounds) exhausted; "
        "the layout may still miss part of the request"
    )
    return executed


# --- the turn loop --------------------------------------------------------------------


def handle_turn(user_text: str, session: Session, deps: AgentDeps) -> TurnResult:
    """Process one user message end to end and commit or roll back atomically."""
    if session.busy:
        raise BusySession(f"session {session.id} is already processing a turn")
    session.busy = True
    base_scene = session.scene
    base_meshes = dict(session.meshes)
    base_offsets = dict(session.frontal_offsets)
    session.reflection_rounds_used = 0
    warnings: list = []
    executed: list = []
    try:
        tasks = decompose(user_text, session, deps)
        session.pending = deque(tasks)
        while session.pending:
            task = session.pending[0]
            executed.extend(run_atomic(task, session, deps, warnings=warnings))
            session.pending.popleft()
        if any(not isinstance(a, Remove) for a in executed):
            executed.extend(reflect(session, deps, request=user_text, warnings=warnings))
        leftover = _layout_violations(session.scene)
        for msg in leftover:
            warnings.append(f"unresolved: {msg}")
        result = TurnResult(
            scene=session.scene,
            actions=tuple(executed),
            warnings=tuple(warnings),
            renders=(_capture(session.scene, None, session.config),),
        )
        if deps.session_root is not None:
            save_session(session, deps.session_root)
        return result
    except Exception:
        session.scene = base_scene
        session.meshes = base_meshes
        session.frontal_offsets = base_offsets
        raise
    finally:
        session.busy = False


# --- persistence ----------------------------------------------------------------------


def save_session(session: Session, root: Path) -> Path:
    d = Path(root) / session.id
    d.mkdir(parents=True, exist_ok=True)
    (d / "scene.json").write_bytes(scene_canonical_bytes(session.scene))
    (d / "transcript.jsonl").write_text(session.transcript.to_jsonl(), encoding="utf-8")
    (d / "config.json").write_text(
        json.dumps(session.config.to_json(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return d


def load_session(path: Path) -> Session:
    """Rebuild a session from its directory; runtime registries start empty."""
    d = Path(path)
    scene = scene_from_json(json.loads((d / "scene.json").read_text(encoding="utf-8")))
    config_path = d / "config.json"
    config = (
        AgentConfig.from_json(json.loads(config_path.read_text(encoding="utf-8")))
        if config_path.exists()
        else AgentConfig()
    )
    transcript_path = d / "transcript.jsonl"
    transcript = (
        ChatTranscript.from_jsonl(d.name, transcript_path.read_text(encoding="utf-8"))
        if transcript_path.exists()
        else ChatTranscript(d.name)
    )
    return Session(id=d.name, scene=scene, transcript=transcript, config=config)
