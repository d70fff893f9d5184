import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roomsmith.errors import EmbeddingFailure, EmptyPlanSet, MissingFrontal
from roomsmith.geometry import Aabb, Vec3
from roomsmith.metrics import (
    clip_sim,
    evaluate,
    format_table,
    misoriented_items,
    oob_rate,
    ori_rate,
    plan_out_of_bounds,
)
from roomsmith.o2o import DeterministicHashEmbedder
from roomsmith.render import RenderSpec, render
from roomsmith.scene import (
    FurnitureItem,
    Placement,
    Scene,
    make_rectangular_room,
    world_aabb,
)

ROOM = make_rectangular_room(4.0, 4.0)


def thing(objkey, cx, cz, half_x=0.5, half_z=0.5, height=1.0, theta=0.0,
          category="Floor", parent=None):
    return FurnitureItem(
        objkey=objkey,
        label=objkey.split("_")[0],
        aabb_local=Aabb(Vec3(-half_x, 0.0, -half_z), Vec3(half_x, height, half_z)),
        placement=Placement(position=Vec3(cx, 0.0, cz), theta=theta),
        category=category,
        parent=parent,
    )


def plan(*items):
    return Scene(room=ROOM, items=items)


GOOD_PLAN = plan(thing("bed_1", 1.0, 1.0), thing("desk_1", 3.0, 3.0))
STRADDLING_PLAN = plan(thing("bed_1", 0.4, 2.0))  # min x = -0.1: 0.1 m outside


# --- oob rate ---------------------------------------------------------------


def test_straddle_fixture_agrees_with_containment_oracle():
    # oracle first: the constructed item really does poke 0.1 m past the wall
    wa = world_aabb(STRADDLING_PLAN.items[0])
    assert wa.min.x == pytest.approx(-0.1, abs=1e-12)
    min_x = min(x for x, _ in ROOM.floor_polygon)
    assert wa.min.x < min_x  # out of room by direct arithmetic


def test_oob_two_of_ten():
    plans = [GOOD_PLAN] * 8 + [STRADDLING_PLAN] * 2
    assert oob_rate(plans) == 20.0


def test_oob_all_clean_is_zero():
    assert oob_rate([GOOD_PLAN, GOOD_PLAN]) == 0.0


def test_oob_straddle_one_of_four():
    assert oob_rate([GOOD_PLAN, GOOD_PLAN, GOOD_PLAN, STRADDLING_PLAN]) == 25.0


def test_oob_counts_collisions_once_per_plan():
    colliding = plan(thing("bed_1", 2.0, 2.0), thing("desk_1", 2.3, 2.0))
    assert plan_out_of_bounds(colliding)
    # two violations in one plan still count the plan once
    both = plan(thing("bed_1", 2.0, 2.0), thing("desk_1", 2.3, 2.0),
                thing("rug_1", 0.3, 2.0))
    assert oob_rate([both, GOOD_PLAN]) == 50.0


def test_oob_flush_contact_is_not_a_collision():
    touching = plan(thing("bed_1", 1.0, 2.0), thing("desk_1", 2.0, 2.0))
    a, b = (world_aabb(i) for i in touching.items)
    assert a.max.x == b.min.x  # exactly flush
    assert not plan_out_of_bounds(touching)


def test_oob_item_above_ceiling_flagged():
    tall = plan(thing("wardrobe_1", 2.0, 2.0, height=3.2))
    assert ROOM.height == 2.8
    assert plan_out_of_bounds(tall)


def test_oob_child_on_parent_not_a_collision():
    table = thing("table_1", 2.0, 2.0, height=0.75)
    lamp = FurnitureItem(
        objkey="lamp_1", label="lamp",
        aabb_local=Aabb(Vec3(-0.1, 0.0, -0.1), Vec3(0.1, 0.4, 0.1)),
        placement=Placement(position=Vec3(2.0, 0.7, 2.0)),  # sunk 0.05 into the top
        category="Other", parent="table_1",
    )
    assert not plan_out_of_bounds(plan(table, lamp))


def test_oob_empty_plan_set_rejected():
    with pytest.raises(EmptyPlanSet):
        oob_rate([])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=12), st.randoms())
def test_oob_permutation_invariant_and_monotone(flags, rnd):
    plans = [STRADDLING_PLAN if f else GOOD_PLAN for f in flags]
    before = oob_rate(plans)
    shuffled = list(plans)
    rnd.shuffle(shuffled)
    assert oob_rate(shuffled) == before
    assert oob_rate(plans + [STRADDLING_PLAN]) >= before


# --- orientation proxy ------------------------------------------------------


def wardrobe_facing_wall():
    # flush against the z=0 wall, frontal pointing straight into it
    return thing("wardrobe_1", 2.0, 0.3, half_x=0.6, half_z=0.3, height=2.0, theta=180.0)


def test_wardrobe_facing_wall_flagged():
    assert misoriented_items(plan(wardrobe_facing_wall())) == ("wardrobe_1",)


def test_wardrobe_turned_around_not_flagged():
    turned = thing("wardrobe_1", 2.0, 0.3, half_x=0.6, half_z=0.3, height=2.0, theta=0.0)
    assert misoriented_items(plan(turned)) == ()


def test_chair_close_to_table_flagged_by_clearance():
    # oracle first: gap between chair front face and table box is 0.2 m
    chair = thing("chair_1", 1.0, 2.0, half_x=0.25, half_z=0.25, height=0.9, theta=270.0)
    table = thing("table_1", 1.95, 2.0, half_x=0.5, half_z=0.5, height=0.75)
    gap = world_aabb(table).min.x - world_aabb(chair).max.x
    assert gap == pytest.approx(0.2, abs=1e-12)
    assert "chair_1" in misoriented_items(plan(chair, table))

    far_table = thing("table_1", 2.15, 2.0, half_x=0.5, half_z=0.5, height=0.75)
    assert world_aabb(far_table).min.x - world_aabb(chair).max.x == pytest.approx(0.4, abs=1e-12)
    assert misoriented_items(plan(chair, far_table)) == ()


def test_vertical_separation_ignores_blocker():
    # painting hangs above the sideboard it faces; no vertical overlap, no flag
    sideboard = thing("sideboard_1", 2.0, 0.5, half_x=0.8, half_z=0.25, height=0.8)
    painting = FurnitureItem(
        objkey="painting_1", label="painting",
        aabb_local=Aabb(Vec3(-0.5, 0.0, -0.03), Vec3(0.5, 0.7, 0.03)),
        placement=Placement(position=Vec3(2.0, 1.2, 0.08), theta=180.0),
        category="Wall",
    )
    found = misoriented_items(plan(sideboard, painting))
    assert "painting_1" in found  # it faces the wall 5 cm away
    into_room = FurnitureItem(
        objkey="painting_1", label="painting",
        aabb_local=painting.aabb_local,
        placement=Placement(position=Vec3(2.0, 1.2, 0.08), theta=0.0),
        category="Wall",
    )
    assert misoriented_items(plan(sideboard, into_room)) == ()


def test_unassigned_item_has_no_frontal():
    ghost = FurnitureItem(
        objkey="box_1", label="box",
        aabb_local=Aabb(Vec3(-0.1, 0.0, -0.1), Vec3(0.1, 0.1, 0.1)),
        placement=Placement(position=Vec3(2.0, 0.0, 2.0)),
    )
    with pytest.raises(MissingFrontal):
        misoriented_items(plan(ghost))


def test_ori_rate_counts_correct_plans():
    assert ori_rate([plan(wardrobe_facing_wall()), GOOD_PLAN]) == 50.0
    assert ori_rate([GOOD_PLAN]) == 100.0
    with pytest.raises(EmptyPlanSet):
        ori_rate([])


# --- clip similarity ----------------------------------------------------------


def test_clip_sim_deterministic():
    a = clip_sim([GOOD_PLAN, STRADDLING_PLAN], "a cozy bedroom", seed=7)
    b = clip_sim([GOOD_PLAN, STRADDLING_PLAN], "a cozy bedroom", seed=7)
    assert a == pytest.approx(b, abs=1e-12)
    assert -1.0 <= a <= 1.0


def test_clip_sim_duplicated_plans_same_mean():
    one = clip_sim([GOOD_PLAN], "a cozy bedroom", seed=3)
    two = clip_sim([GOOD_PLAN, GOOD_PLAN], "a cozy bedroom", seed=3)
    assert two == one


def test_clip_sim_single_view_matches_direct_cosine():
    emb = DeterministicHashEmbedder()
    got = clip_sim([GOOD_PLAN], "a cozy bedroom", emb, views=1)
    text = np.asarray(emb.text_embed("a cozy bedroom"))
    img = np.asarray(emb.image_embed(render(GOOD_PLAN, None, RenderSpec())))
    want = float(np.dot(text, img) / (np.linalg.norm(text) * np.linalg.norm(img)))
    assert got == pytest.approx(want, abs=1e-12)


def test_clip_sim_propagates_embedding_failure():
    class Broken:
        def text_embed(self, text):
            raise EmbeddingFailure("no service")

        def image_embed(self, ref):
            raise EmbeddingFailure("no service")

    with pytest.raises(EmbeddingFailure):
        clip_sim([GOOD_PLAN], "anything", Broken())


def test_clip_sim_rejects_bad_args():
    with pytest.raises(EmptyPlanSet):
        clip_sim([], "x")
    with pytest.raises(ValueError):
        clip_sim([GOOD_PLAN], "x", views=0)


# --- combined report ----------------------------------------------------------


def test_evaluate_report_consistent():
    plans = [GOOD_PLAN, STRADDLING_PLAN, plan(wardrobe_facing_wall())]
    report = evaluate(plans, "a cozy bedroom", seed=1)
    assert report.plans == 3
    assert report.oob_rate == oob_rate(plans)
    assert report.ori_proxy_rate == ori_rate(plans)
    assert report.clip_sim == pytest.approx(clip_sim(plans, "a cozy bedroom", seed=1), abs=1e-12)
    assert report.clip_sim_x100 == pytest.approx(100.0 * report.clip_sim, abs=1e-9)
    doc = report.to_json()
    assert doc["ori_proxy_rate"] == report.ori_proxy_rate
    assert len(doc["per_plan"]) == 3
    assert doc["per_plan"][1]["oob"] is True
    assert doc["per_plan"][2]["misoriented"] == ["wardrobe_1"]


def test_format_table_labels_proxy():
    report = evaluate([GOOD_PLAN], "a bedroom")
    text = format_table(report, label="mine")
    assert "ORI-proxy" in text
    assert "mine" in text
    lines = text.splitlines()
    assert len(lines) == 2
    assert "OOB" in lines[0] and "CLIP-Sim" in lines[0]
