"""Vision-question prompt assembly and structured-response parsing.

Every model interaction is the same four-part template: Role, Environment
(scene summary + captures), Reference (numbered JSON exemplars) and Question.
Templates live in templates/ as versioned data files; response formats are
JSON Schema documents in schemas/. Replay fixtures hash the assembled text,
so everything here must be byte-deterministic.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib.resources import files
from string import Template

from jsonschema import Draft202012Validator

from .canonical import canonical_dumps
from .errors import (
    ConstraintViolation,
    MissingReferences,
    MissingVisuals,
    ParseFailure,
    RetryBudgetExhausted,
)
from .o2o import SupportSet
from .scene import Scene, scene_summary

RETRY_BUDGET = 2


class SchemaId(str, Enum):
    TASK_DECOMPOSITION = "TaskDecomposition"
    SCALE_FACTOR = "ScaleFactor"
    PLACEMENT_CATEGORY = "PlacementCategory"
    CELL_ASSIGNMENT = "CellAssignment"
    FRONTAL_FACE = "FrontalFace"
    ROTATION_ANGLE = "RotationAngle"
    REFLECTION = "Reflection"
    CATEGORY_ID = "CategoryId"
    CANDIDATE_PICK = "CandidatePick"

    @property
    def snake(self) -> str:
        out = [self.value[0].lower()]
        for ch in self.value[1:]:
            out.append(f"_{ch.lower()}" if ch.isupper() else ch)
        return "".join(out)


# Kinds whose wording involves arithmetic get the math-flavoured role.
MATH_KINDS = frozenset(
    {SchemaId.SCALE_FACTOR, SchemaId.CELL_ASSIGNMENT, SchemaId.ROTATION_ANGLE}
)
# Kinds whose images belong to the question (object views), not the scene.
_QUESTION_VISUAL_KINDS = frozenset({SchemaId.FRONTAL_FACE, SchemaId.CANDIDATE_PICK})
_MIN_VISUALS = {
    SchemaId.CELL_ASSIGNMENT: 1,
    SchemaId.REFLECTION: 1,
    SchemaId.CANDIDATE_PICK: 1,
}
_EXACT_VISUALS = {SchemaId.FRONTAL_FACE: 4}


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    raw = files("roomsmith").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")
    lines = raw.split("\n")
    while lines and lines[0].startswith("#"):
        lines.pop(0)
    return "\n".join(lines)


@lru_cache(maxsize=None)
def load_schema(kind: SchemaId) -> dict:
    doc = json.loads(
        files("roomsmith").joinpath("schemas", f"{kind.value}.json").read_text(encoding="utf-8")
    )
    Draft202012Validator.check_schema(doc)
    return doc


@lru_cache(maxsize=None)
def _validator(kind: SchemaId) -> Draft202012Validator:
    return Draft202012Validator(load_schema(kind))


@dataclass(frozen=True)
class Environment:
    summary_text: str = ""
    captures: tuple = ()


@dataclass(frozen=True)
class Question:
    text: str
    visuals: tuple = ()


@dataclass(frozen=True)
class VisionQuestionPrompt:
    role_text: str
    environment: Environment
    references: SupportSet
    question: Question
    response_schema: SchemaId
    retries_left: int = RETRY_BUDGET

    def __post_init__(self):
        if not self.role_text:
            raise ValueError("role_text must be non-empty")


@dataclass(frozen=True)
class ParsedResponse:
    schema: SchemaId
    payload: dict = field(default_factory=dict)


def reference_block(refs: SupportSet) -> str:
    """Numbered JSON exemplars, canonically serialized for byte stability."""
    chunks = []
    for i, r in enumerate(refs.records, 1):
        shown = {"u": r.u}
        if r.t:
            shown["t"] = r.t
        chunks.append(
            f"{i}. Input: {canonical_dumps(shown)}\n   Output: {canonical_dumps(r.y)}"
        )
    return "\n".join(chunks)


def build_prompt(
    kind: SchemaId,
    scene: Scene,
    refs: SupportSet,
    task_ctx: str,
    visuals: tuple = (),
) -> VisionQuestionPrompt:
    """Assemble the four-part prompt for one interaction.

    Visuals are routed by kind: object views (frontal face, candidate pick)
    attach to the question, scene captures to the environment. Task
    decomposition is text-only — no environment, no images — and only the
    category-id classification may run without references.
    """
    visuals = tuple(visuals)
    if len(refs.records) == 0 and kind is not SchemaId.CATEGORY_ID:
        raise MissingReferences(f"{kind.value} prompts require a non-empty support set")
    need = _EXACT_VISUALS.get(kind)
    if need is not None and len(visuals) != need:
        raise MissingVisuals(f"{kind.value} requires exactly {need} images, got {len(visuals)}")
    need_min = _MIN_VISUALS.get(kind, 0)
    if len(visuals) < need_min:
        raise MissingVisuals(f"{kind.value} requires at least {need_min} image(s)")

    role = _template("role_math" if kind in MATH_KINDS else "role")

    if kind is SchemaId.TASK_DECOMPOSITION:
        environment = Environment()
        question_visuals: tuple = ()
    elif kind in _QUESTION_VISUAL_KINDS:
        environment = Environment(summary_text=scene_summary(scene))
        question_visuals = visuals
    else:
        environment = Environment(summary_text=scene_summary(scene), captures=visuals)
        question_visuals = ()

    question_text = Template(_template(f"question_{kind.snake}")).substitute(task=task_ctx)
    return VisionQuestionPrompt(
        role_text=role,
        environment=environment,
        references=refs,
        question=Question(text=question_text, visuals=question_visuals),
        response_schema=kind,
    )


def render_prompt_text(prompt: VisionQuestionPrompt) -> str:
    """Flatten the prompt into the deterministic text sent to the model."""
    parts = [prompt.role_text]
    env = prompt.environment
    if env.summary_text or env.captures:
        note = (
            f"\n{len(env.captures)} visual capture(s) of the current scene are attached."
            if env.captures
            else ""
        )
        parts.append(
            Template(_template("environment")).substitute(
                summary=env.summary_text, captures_note=note
            )
        )
    if prompt.references.records:
        parts.append(
            Template(_template("reference")).substitute(examples=reference_block(prompt.references))
        )
    parts.append(f"Question:\n{prompt.question.text}")
    return "\n\n".join(parts)


def _extract_json(raw: str) -> tuple[str, int]:
    start = raw.find("{")
    if start == -1:
        raise ParseFailure("no JSON object found in response", position=len(raw))
    depth = 0
    in_str = False
    esc = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1], start
    raise ParseFailure("unterminated JSON object in response", position=start)


def parse_response(raw: str, schema: SchemaId) -> ParsedResponse:
    """Extract the first JSON object from raw model text and validate it.

    Models frequently wrap the object in prose or code fences; everything
    outside the first balanced object is ignored.
    """
    text, start = _extract_json(raw)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"invalid JSON: {exc.msg}", position=start + exc.pos) from exc
    errors = sorted(_validator(schema).iter_errors(payload), key=lambda e: list(map(str, e.path)))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.path) or "(root)"
        raise ParseFailure(f"schema violation at {where}: {first.message}", position=start)
    return ParsedResponse(schema=schema, payload=payload)


def serialize_payload(payload: dict) -> str:
    """Inverse of parse_response for fixtures and round-trip checks."""
    return json.dumps(payload, ensure_ascii=False)


def build_retry(
    prev: VisionQuestionPrompt, failure: ParseFailure | ConstraintViolation
) -> VisionQuestionPrompt:
    """Re-ask with a corrective instruction naming what went wrong."""
    if prev.retries_left <= 0:
        raise RetryBudgetExhausted(
            f"retry budget ({RETRY_BUDGET}) exhausted for {prev.response_schema.value}"
        )
    if isinstance(failure, ConstraintViolation):
        correction = (
            f"Correction: your previous answer violated a constraint: {failure.reason}. "
            "Revise your answer to satisfy it."
        )
    else:
        correction = (
            f"Correction: your previous reply could not be used ({failure.reason}). "
            "Respond with a single JSON object only, matching the required format."
        )
    question = Question(
        text=f"{prev.question.text}\n\n{correction}", visuals=prev.question.visuals
    )
    return dataclasses.replace(prev, question=question, retries_left=prev.retries_left - 1)
