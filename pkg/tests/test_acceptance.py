"""Release gate: one test per headline guarantee, tolerances inline.

Run with -v to get a single PASSED/FAILED line per criterion. Every derived
expectation is computed by an independent oracle inside this file (exhaustive
pairwise matrices, closed-form cell rectangles, hand-built fixtures) — never
read back from the code under test.
"""

import hashlib
import json
import math
import random
import string
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from shapely.geometry import Polygon
from shapely.geometry import box as shapely_box

from roomsmith.agent import default_deps, handle_turn, new_session
from roomsmith.backend import ChatTranscript, ReplayBackend
from roomsmith.cli import main as cli_main
from roomsmith.geometry import (
    COLLISION_EPSILON,
    Aabb,
    Rotation,
    Vec3,
    aabb_overlap,
    align_pose,
    compute_aabb,
)
from roomsmith.grids import (
    FREE,
    OCCUPIED,
    OUTSIDE,
    WALL_ADJACENT,
    CellId,
    assignment_to_placement,
    build_floor_grid,
    build_sparse_grid,
    plan_local_by_local,
    sparse_children,
)
from roomsmith.metrics import evaluate, misoriented_items, oob_rate
from roomsmith.o2o import (
    DeterministicHashEmbedder,
    ExampleRecord,
    O2OConfig,
    build_offline_index,
    entropy,
    pair_similarity,
)
from roomsmith.primitives import PRIMITIVE_FACTORIES, cube, make_primitive
from roomsmith.render import RenderSpec, WallElevation, render, render_four_views
from roomsmith.scene import (
    FurnitureItem,
    Placement,
    Scene,
    make_rectangular_room,
    make_room,
    scene_canonical_bytes,
    world_aabb,
)
from roomsmith.scripted import GreedyPlanner
from roomsmith.service import room_from_spec

GOLDEN_ROOT = Path(__file__).parent / "fixtures" / "golden"
RENDER_GOLDENS = Path(__file__).parent / "fixtures" / "golden_digests.json"


# --- shared fixtures ------------------------------------------------------------------


def _synthetic_db():
    """100 records, 5 categories: per category one long 'hub' text that shares a
    token with every other member, 19 short satellites, and cross-category bait
    tokens so a query's nearest neighbour only lands in the right category once
    its satellite has been pulled into the support set."""
    rng = random.Random(1234)

    def word():
        return "".join(rng.choice(string.ascii_lowercase) for _ in range(8))

    cats = ["alcove", "briar", "cairn", "dune", "ember"]
    n_sat = 19
    base = {c: word() for c in cats}
    mode = {(c, i): word() for c in cats for i in range(1, n_sat + 1)}
    pad = {(c, i): word() for c in cats for i in range(1, n_sat + 1)}
    link = {(c, i, j): word() for c in cats for i in range(1, n_sat + 1) for j in range(2)}

    def confuser(c):
        return cats[(cats.index(c) + 1) % len(cats)]

    records = []
    for c in cats:
        incoming = [x for x in cats if confuser(x) == c]
        bait = [link[(x, i, j)] for x in incoming for i in range(1, n_sat + 1) for j in range(2)]
        hub = " ".join([base[c]] + [mode[(c, i)] for i in range(1, n_sat + 1)] + bait)
        records.append(
            ExampleRecord(id=f"{c}-00", category=c, u=hub, t=f"scene {c}-00",
                          v=(f"{c}-00.png",), y={"a": 1})
        )
        for i in range(1, n_sat + 1):
            records.append(
                ExampleRecord(
                    id=f"{c}-{i:02d}", category=c,
                    u=" ".join([base[c], mode[(c, i)], pad[(c, i)]]),
                    t=f"scene {c}-{i:02d}", v=(f"{c}-{i:02d}.png",), y={"a": 1},
                )
            )
    return cats, records, mode, pad, link


@pytest.fixture(scope="module")
def synthetic_db():
    return _synthetic_db()


def _oracle_ranking(records, cfg, emb):
    """Exhaustive pairwise-entropy ranking per category, via the public pair API."""
    groups = {}
    for r in sorted(records, key=lambda r: r.id):
        groups.setdefault(r.category, []).append(r)
    return {
        c: sorted(members, key=lambda r: (-entropy(r, members, cfg, emb), r.id))
        for c, members in groups.items()
    }


def box_item(objkey, w, d, h=1.0, x=0.0, z=0.0, theta=0.0, category="Floor"):
    return FurnitureItem(
        objkey=objkey,
        label=objkey.rsplit("_", 1)[0],
        aabb_local=Aabb(Vec3(-w / 2, 0.0, -d / 2), Vec3(w / 2, h, d / 2)),
        placement=Placement(Vec3(x, 0.0, z), theta=theta),
        category=category,
    )


def collision_count(scene: Scene) -> int:
    boxes = [(it, world_aabb(it)) for it in scene.items]
    hits = 0
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i][0], boxes[j][0]
            if a.parent == b.objkey or b.parent == a.objkey:
                continue
            if aabb_overlap(boxes[i][1], boxes[j][1]):
                hits += 1
    return hits


def containment_pct(scene: Scene) -> float:
    if not scene.items:
        return 100.0
    poly = Polygon(scene.room.floor_polygon)
    inside = 0
    for it in scene.items:
        wa = world_aabb(it)
        footprint = shapely_box(wa.min.x, wa.min.z, wa.max.x, wa.max.z)
        if (
            poly.covers(footprint)
            and wa.min.y >= -COLLISION_EPSILON
            and wa.max.y <= scene.room.height + COLLISION_EPSILON
        ):
            inside += 1
    return 100.0 * inside / len(scene.items)


# --- criterion 1: offline retrieval index == exhaustive pairwise oracle ----------------


def test_criterion_1_offline_index_matches_pairwise_oracle(synthetic_db):
    """Index selection equals the brute-force entropy ranking for k in
    {0,1,4,8,16}; self-similarity is 1 + alpha + beta = 1.5 within 1e-12;
    the whole check runs in under 5 s."""
    cats, records, *_ = synthetic_db
    emb = DeterministicHashEmbedder()
    cfg = O2OConfig(alpha=0.3, beta=0.2)

    t0 = time.monotonic()
    for r in records:
        assert abs(pair_similarity(r, r, cfg, emb) - 1.5) <= 1e-12

    oracle = _oracle_ranking(records, cfg, emb)
    oracle_scores = {
        c: {r.id: entropy(r, [m for m in records if m.category == c], cfg, emb)
            for r in ranked}
        for c, ranked in oracle.items()
    }
    for k in (0, 1, 4, 8, 16):
        index = build_offline_index(records, O2OConfig(alpha=0.3, beta=0.2, k=k), emb)
        assert sorted(index) == sorted(cats)
        for c in cats:
            got = index[c]
            want = oracle[c][:k]
            assert [r.id for r in got.records] == [r.id for r in want]
            for r, score in zip(got.records, got.entropy_scores):
                assert abs(score - oracle_scores[c][r.id]) <= 1e-12
    assert time.monotonic() - t0 < 5.0


# --- criterion 2: support-set size ablation ---------------------------------------------


def test_criterion_2_support_ablation_plateaus_at_k8(synthetic_db):
    """Nearest-exemplar classification accuracy over the synthetic database is
    non-decreasing in k from 0 to 8 and flat within 0.05 from 8 to 16."""
    cats, records, mode, pad, link = synthetic_db
    emb = DeterministicHashEmbedder()
    cfg = O2OConfig(alpha=0.3, beta=0.2)
    oracle = _oracle_ranking(records, cfg, emb)

    # Queries paraphrase the 7 most central satellites of each category and
    # carry two bait tokens from the next category's hub text.
    queries = []
    for c in cats:
        for rid in (r.id for r in oracle[c][1:8]):
            i = int(rid.split("-")[1])
            queries.append(
                (" ".join([mode[(c, i)], pad[(c, i)], link[(c, i, 0)], link[(c, i, 1)]]), c)
            )
    assert len(queries) == 35

    cache = {}
    def vec(text):
        if text not in cache:
            cache[text] = emb.text_embed(text)
        return cache[text]

    def accuracy(k):
        index = build_offline_index(records, O2OConfig(alpha=0.3, beta=0.2, k=k), emb)
        correct = 0
        for q, truth in queries:
            best, best_cat = -np.inf, None
            for c in sorted(index):
                for r in index[c].records:
                    sim = float(vec(q) @ vec(r.u))
                    if sim > best:
                        best, best_cat = sim, c
            correct += best_cat == truth
        return correct / len(queries)

    acc = {k: accuracy(k) for k in (0, 1, 4, 8, 16)}
    assert acc[0] <= acc[1] <= acc[4] <= acc[8], acc
    assert acc[8] >= 0.9, acc
    assert abs(acc[16] - acc[8]) <= 0.05, acc


# --- criterion 3: pose alignment ---------------------------------------------------------


def test_criterion_3_pose_alignment_restores_canonical_volume():
    """100 random rotations x 10 primitives: the aligned bounding-box volume is
    back within 1e-6 relative of the canonical pose, re-aligning moves by less
    than 1e-6 rad, and the sweep finishes in under 10 s."""
    rng = np.random.default_rng(7)

    def random_rotation():
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return Rotation(q)

    rotations = [random_rotation() for _ in range(100)]
    assert len(PRIMITIVE_FACTORIES) == 10
    t0 = time.monotonic()
    for name in sorted(PRIMITIVE_FACTORIES):
        base = make_primitive(name)
        vol0 = compute_aabb(base).volume
        for rot in rotations:
            _, aligned = align_pose(base.transformed(rot))
            assert abs(compute_aabb(aligned).volume - vol0) / vol0 <= 1e-6, name
            again, _ = align_pose(aligned)
            assert math.radians(again.angle_degrees()) < 1e-6, name
    assert time.monotonic() - t0 < 10.0


# --- criterion 4: randomized planner layouts hold the grid invariants --------------------


def test_criterion_4_randomized_grid_layouts_hold_invariants():
    """200 randomized layouts (square and L-shaped rooms, 3-8 m): no cell is
    claimed twice, no claim touches a WallAdjacent or Outside cell, and the
    resulting plan set has oob_rate == 0.0 exactly. Under 30 s."""
    rng = np.random.default_rng(20260814)

    def random_room(i):
        w = float(np.round(rng.uniform(3.0, 8.0), 1))
        if i % 2 == 0:
            return make_rectangular_room(w, w, tagged=("top", "left"))
        d = float(np.round(rng.uniform(3.0, 8.0), 1))
        nw = float(np.round(rng.uniform(1.0, w / 2), 1))
        nd = float(np.round(rng.uniform(1.0, d / 2), 1))
        poly = [(nw, 0.0), (nw, nd), (w, nd), (w, d), (0.0, d), (0.0, 0.0)]
        return make_room(poly, 2.8, wall_edges=[4, 5], wall_ids=["wall_left", "wall_top"])

    t0 = time.monotonic()
    scenes = []
    for i in range(200):
        room = random_room(i)
        grid = build_floor_grid(room)
        pristine = grid.states.copy()
        cs = grid.cell_size
        budget = 0.5 * len(grid.free_cells())
        items = []
        for j in range(int(rng.integers(2, 6))):
            w, d = rng.uniform(0.4, 1.6, size=2)
            it = box_item(f"it{j}_1", float(w), float(d), h=float(rng.uniform(0.5, 2.0)))
            need = math.ceil(w / cs) * math.ceil(d / cs)
            if budget - need < 0:
                continue
            budget -= need
            items.append(it)
        if not items:
            items = [box_item("it0_1", 0.5, 0.5, h=0.5)]

        assignments = plan_local_by_local(items, grid, GreedyPlanner())
        assert len(assignments) == len(items)

        claimed = set()
        for a in assignments:
            for cell in a.cells:
                assert (cell.row, cell.col) not in claimed, "cell double-assignment"
                claimed.add((cell.row, cell.col))
                assert pristine[cell.row, cell.col] == FREE, "claimed a non-Free cell"

        by_key = {it.objkey: it for it in items}
        placed = tuple(
            replace(
                by_key[a.objkey],
                placement=assignment_to_placement(a, by_key[a.objkey], grid, room=room),
            )
            for a in assignments
        )
        scenes.append(Scene(room=room, items=placed))

    assert len(scenes) == 200
    assert oob_rate(scenes) == 0.0
    assert time.monotonic() - t0 < 30.0


# --- criterion 5: sparse -> dense projection is exact -------------------------------------


def test_criterion_5_sparse_dense_projection_exact():
    """Exhaustive over every dense grid shape up to 20x20: sparse cell states
    follow the worst-of-four-children rule, children partition the covered
    region, and every rectangular sparse assignment expands to exactly the
    closed-form dense rectangle."""
    rect_checked = set()
    for rows in range(4, 21):
        for cols in range(4, 21):
            room = make_rectangular_room(cols * 0.5, rows * 0.5, tagged=("top", "left"))
            dense = build_floor_grid(room, cell_size=0.5)
            assert (dense.n_rows, dense.n_cols) == (rows, cols)
            occ = [
                CellId(r, c)
                for r in range(rows)
                for c in range(cols)
                if dense.states[r, c] == FREE and (3 * r + 5 * c) % 7 == 0
            ]
            dense.occupy(occ, "blk_1")
            sparse = build_sparse_grid(dense)
            n, m = sparse.n_rows, sparse.n_cols
            assert (n, m) == (rows // 2, cols // 2)

            union = set()
            for r in range(n):
                for c in range(m):
                    kids = sparse_children(CellId(r, c))
                    assert kids == [
                        CellId(2 * r, 2 * c), CellId(2 * r, 2 * c + 1),
                        CellId(2 * r + 1, 2 * c), CellId(2 * r + 1, 2 * c + 1),
                    ]
                    states = [dense.states[k.row, k.col] for k in kids]
                    if OUTSIDE in states:
                        want = OUTSIDE
                    elif WALL_ADJACENT in states:
                        want = WALL_ADJACENT
                    elif OCCUPIED in states:
                        want = OCCUPIED
                    else:
                        want = FREE
                    assert sparse.states[r, c] == want
                    assert not union & set(kids)
                    union.update(kids)
            assert len(union) == 4 * n * m

            # The expansion identity depends only on the sparse shape.
            if (n, m) in rect_checked:
                continue
            rect_checked.add((n, m))
            for r0 in range(n):
                for r1 in range(r0, n):
                    for c0 in range(m):
                        for c1 in range(c0, m):
                            expansion = set()
                            for r in range(r0, r1 + 1):
                                for c in range(c0, c1 + 1):
                                    expansion.update(sparse_children(CellId(r, c)))
                            oracle = {
                                CellId(r, c)
                                for r in range(2 * r0, 2 * r1 + 2)
                                for c in range(2 * c0, 2 * c1 + 2)
                            }
                            assert expansion == oracle


# --- criterion 6: golden conversations replay byte-exactly via the CLI --------------------


def test_criterion_6_golden_replays_reproduce_and_validate(tmp_path):
    """All three recorded conversations, replayed through `run --replay`,
    reproduce the committed per-turn and final scene digests byte-exactly and
    the recorded prompt digests in order; after every turn the scene has zero
    collisions and 100% room containment. Under 20 s total."""
    t0 = time.monotonic()
    runner = CliRunner()
    for name in ("bedroom", "study", "lounge"):
        root = GOLDEN_ROOT / name
        doc = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        out = tmp_path / name

        result = runner.invoke(
            cli_main,
            [
                "run",
                "--script", str(root / "script.txt"),
                "--room", str(root / "room.json"),
                "--replay", str(root / "replay.jsonl"),
                "--out", str(out), "--session-id", name,
            ],
        )
        assert result.exit_code == 0, (name, result.output)
        for i, turn in enumerate(doc["turns"], start=1):
            assert f"turn {i}: " in result.output
            assert f"scene {turn['scene_digest'][:12]}" in result.output
        assert f"final scene digest: {doc['final_scene_digest']}" in result.output
        assert (out / name / "scene.json").read_bytes() == (root / "final_scene.json").read_bytes()

        recorded_digests = [
            json.loads(line)["digest"]
            for line in (root / "replay.jsonl").read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        transcript = ChatTranscript.from_jsonl(
            name, (out / name / "transcript.jsonl").read_text(encoding="utf-8")
        )
        assert list(transcript.digests()) == recorded_digests

        # Second, in-process replay to validate every intermediate scene.
        room_doc = json.loads((root / "room.json").read_text(encoding="utf-8"))
        session = new_session(room_from_spec(room_doc), session_id=name)
        deps = default_deps(ReplayBackend(root / "replay.jsonl"))
        turns = [
            line.strip()
            for line in (root / "script.txt").read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        for text, turn in zip(turns, doc["turns"]):
            handle_turn(text, session, deps)
            digest = hashlib.sha256(scene_canonical_bytes(session.scene)).hexdigest()
            assert digest == turn["scene_digest"]
            assert collision_count(session.scene) == 0
            assert containment_pct(session.scene) == 100.0
    assert time.monotonic() - t0 < 20.0


# --- criterion 7: metric fixtures reproduce their constants -------------------------------


def test_criterion_7_metric_fixtures_reproduce_constants():
    """2 violating plans out of 10 score oob_rate == 20.0 exactly; a wardrobe
    staring at the wall is flagged by the orientation proxy while its 180-degree
    rotation is not; clip-style similarity reproduces to 1e-12 across runs."""
    # 1 m crate: centred x=2.0 is inside a 4x4 room, x=0.2 pokes through the wall.
    plans = [
        Scene(
            room=make_rectangular_room(4.0, 4.0, 2.8),
            items=(box_item("crate_1", 1.0, 1.0, h=1.0, x=0.2 if i < 2 else 2.0, z=2.0),),
        )
        for i in range(10)
    ]
    assert oob_rate(plans) == 20.0

    room = make_rectangular_room(4.0, 4.0, 2.6)
    def wardrobe(theta):
        return FurnitureItem(
            objkey="wardrobe_1", label="wardrobe",
            aabb_local=Aabb(Vec3(-0.7, 0.0, -0.3), Vec3(0.7, 2.0, 0.3)),
            placement=Placement(Vec3(2.0, 0.0, 0.4), theta=theta),
            category="Floor",
        )
    # 0.4 m from the top wall, front face toward it: well under the clearance.
    assert misoriented_items(Scene(room=room, items=(wardrobe(180.0),))) == ("wardrobe_1",)
    assert misoriented_items(Scene(room=room, items=(wardrobe(0.0),))) == ()

    description = "ten identical crate rooms"
    first = evaluate(plans, description, seed=0)
    second = evaluate(plans, description, seed=0)
    assert abs(first.clip_sim - second.clip_sim) <= 1e-12


# --- criterion 8: renderer determinism ----------------------------------------------------


def test_criterion_8_render_digests_stable():
    """Two independent render passes produce identical image digests, and both
    match the committed goldens (integer rasterization, no platform drift)."""
    goldens = json.loads(RENDER_GOLDENS.read_text(encoding="utf-8"))

    def render_all():
        scene = Scene(room=make_rectangular_room(4.0, 4.0))
        grid = build_floor_grid(scene.room)
        bed = FurnitureItem(
            objkey="bed_1", label="bed",
            aabb_local=Aabb(Vec3(-0.6, 0.0, -0.4), Vec3(0.6, 0.6, 0.4)),
            placement=Placement(position=Vec3(2.0, 0.0, 2.0)),
            category="Floor",
        )
        furnished = Scene(room=scene.room, items=(bed,))
        views = render_four_views(bed, cube())
        return {
            "topdown_empty_4x4_grid": render(scene, grid, RenderSpec()).digest,
            "topdown_bed_4x4_grid": render(furnished, grid, RenderSpec()).digest,
            "wall_top_empty": render(scene, None, RenderSpec(view=WallElevation("wall_top"))).digest,
            "cube_four_views": [v.digest for v in views],
        }

    first, second = render_all(), render_all()
    assert first == second
    assert first == goldens
