#!/usr/bin/env python3
"""Regenerate the golden conversation fixtures under tests/fixtures/golden/.

Each conversation drives the full agent loop against the rule-engine backend,
recording every exchange as a replay fixture. The manifest pins per-turn
action sequences, warnings, and scene digests; final_scene.json pins the
canonical bytes of the end state. Rerun after any change that intentionally
alters pipeline behaviour, and review the diff before committing.
"""

from __future__ import annotations

import hashlib
import json
import sys
from collections import deque
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from roomsmith.agent import default_deps, handle_turn, new_session
from roomsmith.backend import RecordingBackend
from roomsmith.scene import Scene, make_rectangular_room, scene_canonical_bytes
from roomsmith.scripted import ScriptedBackend

APPROVE = {"satisfactory": True, "critique": "layout meets the request", "adjustments": []}

# The study conversation scripts one corrective reflection round: the first
# pop approves the desk turn, the second fixes the low-hanging painting.
STUDY_REFLECTIONS = [
    APPROVE,
    {
        "satisfactory": False,
        "critique": "the painting hangs too low and intersects the desk",
        "adjustments": [
            {"objkey": "painting_1", "action": "scale", "value": 0.5},
            {"objkey": "painting_1", "action": "translate", "value": [0.5, 1.6, 0.25]},
        ],
    },
]

CONVERSATIONS = [
    {
        "name": "bedroom",
        "room": [4.0, 4.0, 2.6],
        "turns": [
            "Add a double bed against the top wall",
            "add a nightstand and a wardrobe",
            "Move the wardrobe.",
        ],
        "reflections": [],
    },
    {
        "name": "study",
        "room": [3.5, 3.0, 2.7],
        "turns": [
            "add a desk",
            "hang a painting on the wall",
            "place a lamp on the desk",
        ],
        "reflections": STUDY_REFLECTIONS,
    },
    {
        "name": "lounge",
        "room": [5.0, 4.0, 2.8],
        "turns": [
            "add a sofa and a coffee table",
            "remove the coffee table",
            "rotate the sofa to face the top wall",
        ],
        "reflections": [],
    },
]


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def record(convo: dict, root: Path) -> None:
    out = root / convo["name"]
    out.mkdir(parents=True, exist_ok=True)
    scripted = ScriptedBackend(reflection_scripts=deque(convo["reflections"]))
    backend = RecordingBackend(scripted, out / "replay.jsonl")
    deps = default_deps(backend)
    w, d, h = convo["room"]
    session = new_session(
        Scene(room=make_rectangular_room(w, d, h)), session_id=convo["name"]
    )
    turns = []
    for text in convo["turns"]:
        result = handle_turn(text, session, deps)
        turns.append(
            {
                "text": text,
                "actions": [type(a).__name__ for a in result.actions],
                "warnings": list(result.warnings),
                "scene_digest": sha256(scene_canonical_bytes(session.scene)),
            }
        )
    final = scene_canonical_bytes(session.scene)
    (out / "final_scene.json").write_bytes(final)
    (out / "script.txt").write_text("".join(t + "\n" for t in convo["turns"]), encoding="utf-8")
    (out / "room.json").write_text(
        json.dumps({"width": w, "depth": d, "height": h, "tagged": ["top", "left"]}) + "\n",
        encoding="utf-8",
    )
    manifest = {
        "room": convo["room"],
        "reflections": convo["reflections"],
        "turns": turns,
        "final_scene_digest": sha256(final),
        "exchanges": scripted.calls,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    size = (out / "replay.jsonl").stat().st_size
    print(f"{convo['name']}: {scripted.calls} exchanges, replay {size/1024:.0f} KiB")
    for t in turns:
        print(f"  {t['text']!r}: {t['actions']} warnings={t['warnings']}")


def main() -> None:
    root = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "golden"
    for convo in CONVERSATIONS:
        record(convo, root)


if __name__ == "__main__":
    main()
