"""Prompt assembly and response parsing, including the golden raw→payload pairs."""

import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roomsmith.errors import (
    ConstraintViolation,
    MissingReferences,
    MissingVisuals,
    ParseFailure,
    RetryBudgetExhausted,
)
from roomsmith.o2o import ExampleRecord, SupportSet
from roomsmith.prompts import (
    RETRY_BUDGET,
    SchemaId,
    build_prompt,
    build_retry,
    load_schema,
    parse_response,
    reference_block,
    render_prompt_text,
    serialize_payload,
)
from roomsmith.scene import Scene, make_rectangular_room

FIXDIR = Path(__file__).parent / "fixtures" / "responses"


@pytest.fixture
def scene():
    return Scene(room=make_rectangular_room(4.0, 3.0))


@pytest.fixture
def refs():
    r = ExampleRecord(
        id="x1", category="1", u="add a bed", t="an empty room", y={"scale": 0.9}
    )
    return SupportSet(category="1", records=(r,), entropy_scores=(0.0,))


class FakeImage:
    def __init__(self, digest="abc123"):
        self.digest = digest


# --- golden fixture pairs -------------------------------------------------------


@pytest.mark.parametrize("kind", list(SchemaId))
def test_golden_fixture_parses(kind):
    raw = (FIXDIR / f"{kind.value}.txt").read_text(encoding="utf-8")
    want = json.loads((FIXDIR / f"{kind.value}.json").read_text(encoding="utf-8"))
    got = parse_response(raw, kind)
    assert got.payload == want
    assert got.schema is kind


@pytest.mark.parametrize("kind", list(SchemaId))
def test_every_schema_document_is_valid(kind):
    doc = load_schema(kind)
    assert doc["$id"] == f"roomsmith:{kind.value}"


# --- round-trip property ---------------------------------------------------------

key_text = st.text(alphabet="abcdefgh_123", min_size=1, max_size=10)

payload_strategies = {
    SchemaId.TASK_DECOMPOSITION: st.fixed_dictionaries(
        {
            "tasks": st.lists(
                st.fixed_dictionaries({"category": key_text, "instruction": key_text}),
                max_size=4,
            )
        }
    ),
    SchemaId.SCALE_FACTOR: st.fixed_dictionaries(
        {"scale": st.floats(min_value=0.01, max_value=50, allow_nan=False)}
    ),
    SchemaId.PLACEMENT_CATEGORY: st.fixed_dictionaries(
        {"placement": st.sampled_from(["Floor", "Wall", "Other"])}
    ),
    SchemaId.CELL_ASSIGNMENT: st.fixed_dictionaries(
        {
            "cells": st.dictionaries(
                key_text,
                st.lists(st.sampled_from(["A1", "B2", "C3", "AA10"]), min_size=1, max_size=3),
                min_size=1,
                max_size=3,
            ),
            "facing": st.dictionaries(
                key_text, st.sampled_from(["Up", "Down", "Left", "Right"]), max_size=3
            ),
        }
    ),
    SchemaId.FRONTAL_FACE: st.fixed_dictionaries(
        {"face": st.sampled_from(["Front", "Back", "Left", "Right"])}
    ),
    SchemaId.ROTATION_ANGLE: st.fixed_dictionaries(
        {"theta": st.floats(min_value=0, max_value=359.99, allow_nan=False)}
    ),
    SchemaId.REFLECTION: st.fixed_dictionaries(
        {
            "satisfactory": st.booleans(),
            "critique": key_text,
            "adjustments": st.lists(
                st.one_of(
                    st.fixed_dictionaries(
                        {
                            "objkey": key_text,
                            "action": st.just("translate"),
                            "value": st.lists(
                                st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3
                            ),
                        }
                    ),
                    st.fixed_dictionaries(
                        {
                            "objkey": key_text,
                            "action": st.just("rotate"),
                            "value": st.floats(0, 359, allow_nan=False),
                        }
                    ),
                ),
                max_size=2,
            ),
        }
    ),
    SchemaId.CATEGORY_ID: st.fixed_dictionaries({"category": key_text}),
    SchemaId.CANDIDATE_PICK: st.fixed_dictionaries(
        {"choice": st.integers(min_value=0, max_value=15)}
    ),
}


@pytest.mark.parametrize("kind", list(SchemaId))
@settings(max_examples=20, deadline=None)
@given(data=st.data())
def test_serialize_parse_round_trip(kind, data):
    payload = data.draw(payload_strategies[kind])
    got = parse_response(serialize_payload(payload), kind)
    assert got.payload == payload


# --- build_prompt ----------------------------------------------------------------


def test_math_kinds_get_math_role(scene, refs):
    p = build_prompt(SchemaId.SCALE_FACTOR, scene, refs, "how big should the bed be?")
    assert p.role_text.endswith("strong math background")
    q = build_prompt(SchemaId.PLACEMENT_CATEGORY, scene, refs, "where does a rug go?")
    assert q.role_text.endswith("3D interior design")


def test_task_decomposition_is_text_only(scene, refs):
    p = build_prompt(
        SchemaId.TASK_DECOMPOSITION, scene, refs, "make it cozy", visuals=(FakeImage(),)
    )
    assert p.environment.summary_text == ""
    assert p.environment.captures == ()
    assert p.question.visuals == ()
    assert "Environment:" not in render_prompt_text(p)


def test_cell_assignment_requires_a_capture(scene, refs):
    with pytest.raises(MissingVisuals):
        build_prompt(SchemaId.CELL_ASSIGNMENT, scene, refs, "place the bed")


def test_frontal_face_requires_exactly_four_views(scene, refs):
    views = tuple(FakeImage(str(i)) for i in range(4))
    p = build_prompt(SchemaId.FRONTAL_FACE, scene, refs, "which side is the front?", views)
    assert p.question.visuals == views  # object views ride on the question
    assert p.environment.captures == ()
    with pytest.raises(MissingVisuals):
        build_prompt(SchemaId.FRONTAL_FACE, scene, refs, "front?", views[:3])


def test_scene_captures_ride_on_environment(scene, refs):
    img = FakeImage()
    p = build_prompt(SchemaId.CELL_ASSIGNMENT, scene, refs, "place the bed", (img,))
    assert p.environment.captures == (img,)
    assert p.question.visuals == ()
    assert "1 visual capture(s)" in render_prompt_text(p)


def test_empty_references_rejected_except_category_id(scene):
    empty = SupportSet(category="")
    with pytest.raises(MissingReferences):
        build_prompt(SchemaId.SCALE_FACTOR, scene, empty, "scale?")
    p = build_prompt(SchemaId.CATEGORY_ID, scene, empty, "classify: add a bed")
    assert p.references is empty


def test_prompt_text_is_deterministic(scene, refs):
    a = build_prompt(SchemaId.ROTATION_ANGLE, scene, refs, "face the sofa toward the tv")
    b = build_prompt(SchemaId.ROTATION_ANGLE, scene, refs, "face the sofa toward the tv")
    assert render_prompt_text(a) == render_prompt_text(b)
    assert a == b


def test_prompt_sections_render_in_order(scene, refs):
    p = build_prompt(SchemaId.SCALE_FACTOR, scene, refs, "scale the wardrobe")
    text = render_prompt_text(p)
    i_role = text.index("expert in 3D interior design")
    i_env = text.index("Environment:")
    i_ref = text.index("Reference examples:")
    i_q = text.index("Question:")
    assert i_role < i_env < i_ref < i_q
    assert "Room: 4.00 x 3.00 m floor" in text


def test_reference_block_numbers_exemplars(refs):
    block = reference_block(refs)
    assert block.startswith('1. Input: {"u":"add a bed","t":"an empty room"}')
    assert 'Output: {"scale":0.9}' in block


def test_templates_have_no_stray_headers(scene, refs):
    p = build_prompt(SchemaId.SCALE_FACTOR, scene, refs, "x")
    assert "#" not in render_prompt_text(p)


# --- parse_response --------------------------------------------------------------


def test_parse_plain_and_fenced():
    plain = parse_response('{"face": "Back"}', SchemaId.FRONTAL_FACE)
    assert plain.payload == {"face": "Back"}
    fenced = parse_response('```json\n{"face": "Back"}\n```', SchemaId.FRONTAL_FACE)
    assert fenced.payload == {"face": "Back"}


def test_parse_takes_first_object_only():
    raw = 'first {"choice": 1} then {"choice": 2}'
    assert parse_response(raw, SchemaId.CANDIDATE_PICK).payload == {"choice": 1}


def test_parse_handles_braces_inside_strings():
    raw = '{"category": "a}b{c"}'
    assert parse_response(raw, SchemaId.CATEGORY_ID).payload == {"category": "a}b{c"}


def test_parse_negative_scale_fails_schema():
    with pytest.raises(ParseFailure, match="schema violation"):
        parse_response('{"scale": -2}', SchemaId.SCALE_FACTOR)


def test_parse_no_object_reports_position():
    with pytest.raises(ParseFailure) as err:
        parse_response("no json here", SchemaId.FRONTAL_FACE)
    assert err.value.position == len("no json here")


def test_parse_unterminated_object():
    with pytest.raises(ParseFailure, match="unterminated"):
        parse_response('{"face": "Front"', SchemaId.FRONTAL_FACE)


def test_parse_invalid_json_position_offsets_from_object_start():
    raw = "noise {bad json}"
    with pytest.raises(ParseFailure) as err:
        parse_response(raw, SchemaId.FRONTAL_FACE)
    assert err.value.position >= raw.index("{")


def test_parse_rejects_wrong_shape():
    with pytest.raises(ParseFailure, match="face"):
        parse_response('{"place": "Front"}', SchemaId.FRONTAL_FACE)
    with pytest.raises(ParseFailure):
        parse_response('{"theta": 360}', SchemaId.ROTATION_ANGLE)  # half-open range
    with pytest.raises(ParseFailure):
        parse_response('{"cells": {}, "facing": {}}', SchemaId.CELL_ASSIGNMENT)


def test_reflection_adjustment_values_typed_by_action():
    bad = '{"satisfactory": false, "adjustments": [{"objkey": "a", "action": "translate", "value": 3}]}'
    with pytest.raises(ParseFailure):
        parse_response(bad, SchemaId.REFLECTION)
    bad2 = '{"satisfactory": false, "adjustments": [{"objkey": "a", "action": "scale", "value": -1}]}'
    with pytest.raises(ParseFailure):
        parse_response(bad2, SchemaId.REFLECTION)


# --- build_retry ------------------------------------------------------------------


def test_retry_names_the_violated_constraint(scene, refs):
    p = build_prompt(
        SchemaId.CELL_ASSIGNMENT, scene, refs, "place the lamp", (FakeImage(),)
    )
    violation = ConstraintViolation("cell B2 already occupied by bed_1; choose free cells")
    p2 = build_retry(p, violation)
    assert "cell B2 already occupied by bed_1; choose free cells" in p2.question.text
    assert p2.retries_left == p.retries_left - 1
    assert p2.question.visuals == p.question.visuals


def test_retry_after_parse_failure_asks_for_json(scene, refs):
    p = build_prompt(SchemaId.SCALE_FACTOR, scene, refs, "scale it")
    p2 = build_retry(p, ParseFailure("invalid JSON: Expecting value", position=3))
    assert "single JSON object only" in p2.question.text


def test_retry_budget_exhausts_after_two(scene, refs):
    p = build_prompt(SchemaId.SCALE_FACTOR, scene, refs, "scale it")
    fail = ParseFailure("nope")
    p = build_retry(p, fail)
    p = build_retry(p, fail)
    assert p.retries_left == 0
    with pytest.raises(RetryBudgetExhausted):
        build_retry(p, fail)
    assert RETRY_BUDGET == 2


def test_schema_id_snake_names():
    assert SchemaId.TASK_DECOMPOSITION.snake == "task_decomposition"
    assert SchemaId.CANDIDATE_PICK.snake == "candidate_pick"
