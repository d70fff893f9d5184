"""Regenerate the shipped reference-example databases.

One database per question kind, written to src/roomsmith/data/<kind>.json.
Each record pairs an input text (u, optional scene text t) with a worked
output payload (y) in exactly the format the matching response schema
accepts. Category sizes are chosen so a k=8 index keeps full support sets
for every category.

    python3 tools/make_example_dbs.py
"""

import json
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "src" / "roomsmith" / "data"

SCENES = (
    "",
    "a 4 by 3 m bedroom with a bed along the far wall",
    "an empty 5 by 5 m studio",
    "a 6 by 4 m living room with a sofa and a coffee table",
    "",
    "a 3 by 3 m study with a desk under the window",
)

BEDS = ("bed", "double bed", "bunk bed", "king-size bed")
SEATS = ("sofa", "armchair", "dining chair", "stool", "bench", "office chair")
TABLES = ("table", "desk", "coffee table", "nightstand", "dining table", "side table")
STORAGE = ("wardrobe", "bookshelf", "dresser", "cabinet", "sideboard", "chest")
LIGHTS = ("floor lamp", "table lamp", "pendant light", "reading lamp")
WALL_DECOR = ("painting", "mirror", "wall shelf", "clock", "poster", "tapestry")
TABLETOP = ("vase", "potted plant", "stack of books", "fruit bowl", "candle", "desk lamp")


def slug(noun):
    return noun.replace(" ", "_").replace("-", "_") + "_1"


def records(prefix, rows):
    out = []
    for i, (category, u, t, y) in enumerate(rows):
        out.append({"id": f"{prefix}{i:03d}", "category": category, "u": u, "t": t, "y": y})
    return out


def pick(pool, i):
    return pool[i % len(pool)]


def task_decomposition():
    rows = []
    for i in range(8):  # "0": removal
        noun = pick(SEATS + TABLES, i)
        u = pick((f"Remove the {noun}", f"Take the {noun} out of the room",
                  f"Get rid of the {noun}", f"I don't want the {noun} anymore"), i)
        rows.append(("0", u, pick(SCENES, i),
                     {"tasks": [{"category": "0", "instruction": f"remove the {noun}"}]}))
    moods = ("cozier", "brighter", "more formal", "better for reading",
             "more spacious", "ready for guests", "like a studio", "calmer")
    fixes = (("floor lamp", "armchair"), ("table lamp", "mirror"), ("dining table", "sideboard"),
             ("reading lamp", "armchair"), ("wall shelf", "stool"), ("sofa", "coffee table"),
             ("desk", "office chair"), ("potted plant", "bench"))
    for i in range(8):  # "1": abstract addition
        a, b = fixes[i]
        rows.append(("1", f"Make the room feel {moods[i]}", pick(SCENES, i + 1), {
            "tasks": [
                {"category": "2", "instruction": f"add a {a}"},
                {"category": "2", "instruction": f"add a {b}"},
                {"category": "4", "instruction": f"move the {b} next to the {a}"},
            ]}))
    for i in range(8):  # "2": explicit single addition
        noun = pick(BEDS + STORAGE, i)
        u = pick((f"Add a {noun}", f"Put a {noun} in the room",
                  f"Place a {noun} here", f"I'd like a {noun}"), i)
        rows.append(("2", u, pick(SCENES, i + 2),
                     {"tasks": [{"category": "2", "instruction": f"add a {noun}"}]}))
    for i in range(8):  # "3": multi-item addition
        a, b = pick(TABLES, i), pick(SEATS, i + 1)
        rows.append(("3", f"Add a {a} and a {b}", pick(SCENES, i), {
            "tasks": [
                {"category": "2", "instruction": f"add a {a}"},
                {"category": "2", "instruction": f"add a {b}"},
            ]}))
    spots = ("to the corner", "under the window", "next to the bed",
             "against the left wall", "toward the door", "to the middle of the room",
             "away from the doorway", "closer to the desk")
    for i in range(8):  # "4": translate
        noun = pick(SEATS + STORAGE, i + 2)
        rows.append(("4", f"Move the {noun} {spots[i]}", pick(SCENES, i + 3),
                     {"tasks": [{"category": "4", "instruction": f"move the {noun} {spots[i]}"}]}))
    for i in range(8):  # "5": rotate
        noun = pick(SEATS + BEDS, i)
        target = pick(("the window", "the door", "the sofa", "the television",
                       "the desk", "the center of the room"), i)
        rows.append(("5", f"Turn the {noun} to face {target}", pick(SCENES, i),
                     {"tasks": [{"category": "5",
                                 "instruction": f"rotate the {noun} to face {target}"}]}))
    for i in range(8):  # "6": scale
        noun = pick(TABLES + STORAGE, i + 1)
        how = "bigger" if i % 2 else "smaller"
        rows.append(("6", f"Make the {noun} {how}", pick(SCENES, i + 4),
                     {"tasks": [{"category": "6", "instruction": f"scale the {noun} {how}"}]}))
    for i in range(8):  # "7": compound edits
        a, b = pick(SEATS, i), pick(STORAGE, i + 3)
        rows.append(("7", f"Replace the {a} with a {b}", pick(SCENES, i + 5), {
            "tasks": [
                {"category": "0", "instruction": f"remove the {a}"},
                {"category": "2", "instruction": f"add a {b}"},
                {"category": "4", "instruction": f"move the {b} where the {a} was"},
            ]}))
    return [str(c) for c in range(8)], records("td", rows)


def scale_factor():
    bands = (
        ("tiny", TABLETOP, (0.12, 0.18, 0.22, 0.25, 0.3, 0.14, 0.2, 0.26, 0.16, 0.28)),
        ("small", LIGHTS + ("stool", "side table"), (0.45, 0.55, 0.6, 0.7, 0.8, 0.5, 0.65, 0.75, 0.6, 0.85)),
        ("medium", SEATS[1:] + ("nightstand",), (0.9, 1.0, 1.05, 0.95, 1.1, 1.0, 0.9, 1.15, 1.05, 1.0)),
        ("large", STORAGE, (1.5, 1.7, 1.8, 1.6, 2.0, 1.55, 1.9, 1.75, 1.65, 1.85)),
        ("huge", BEDS + ("dining table", "sofa"), (2.0, 2.2, 2.4, 2.1, 2.6, 2.3, 2.5, 2.15, 2.35, 2.45)),
    )
    rows = []
    for category, pool, factors in bands:
        for i in range(10):
            noun = pick(pool, i)
            w, d = 3 + i % 4, 3 + (i + 1) % 3
            rows.append((category,
                         f"A generated {noun} currently spans 1.0 m; the room is {w} by {d} m",
                         pick(SCENES, i), {"scale": factors[i]}))
    return [b[0] for b in bands], records("sf", rows)


def placement_category():
    groups = (
        ("seating", BEDS + SEATS, "Floor"),
        ("surfaces", TABLES + ("piano", "treadmill", "bathtub", "rug"), "Floor"),
        ("storage", STORAGE + ("shoe rack", "filing cabinet", "wine rack", "coat stand"), "Floor"),
        ("wall_decor", WALL_DECOR + ("sconce", "television", "curtain", "shelf bracket"), "Wall"),
        ("tabletop", TABLETOP + ("alarm clock", "photo frame", "keyboard", "mug"), "Other"),
    )
    rows = []
    for category, pool, placement in groups:
        for i in range(10):
            noun = pick(pool, i)
            u = pick((f"Where does a {noun} belong?",
                      f"Classify the placement surface for a {noun}",
                      f"Should the {noun} stand on the floor, hang on a wall, or rest on furniture?"), i)
            rows.append((category, u, pick(SCENES, i + 1), {"placement": placement}))
    return [g[0] for g in groups], records("pc", rows)


def cell_assignment():
    def rect(col0, row0, cols, rows_n):
        cells = []
        for r in range(rows_n):
            for c in range(cols):
                cells.append(f"{chr(ord('A') + col0 + c)}{row0 + r}")
        return cells

    groups = []
    for i in range(10):  # large_single: beds and sofas, 3x2 cells
        noun = pick(BEDS + ("sofa",), i)
        key = slug(noun)
        groups.append(("large_single",
                       f"Assign cells for a {noun} needing 3 x 2 cells; keep clear of walls",
                       pick(SCENES, i),
                       {"cells": {key: rect(1 + i % 3, 2 + i % 2, 3, 2)},
                        "facing": {key: pick(("Down", "Up", "Left", "Right"), i)}}))
    for i in range(10):  # medium_single: 2x2
        noun = pick(TABLES, i)
        key = slug(noun)
        groups.append(("medium_single",
                       f"Assign cells for a {noun} covering 2 x 2 cells on the free floor",
                       pick(SCENES, i + 1),
                       {"cells": {key: rect(2 + i % 4, 2 + i % 3, 2, 2)},
                        "facing": {key: pick(("Down", "Left", "Up", "Right"), i + 1)}}))
    for i in range(10):  # small_single: 1x1
        noun = pick(TABLETOP + LIGHTS, i)
        key = slug(noun)
        groups.append(("small_single",
                       f"Assign one free interior cell for a {noun}",
                       pick(SCENES, i + 2),
                       {"cells": {key: rect(2 + i % 5, 3 + i % 4, 1, 1)},
                        "facing": {key: "Down"}}))
    for i in range(10):  # pair: two items at once
        a, b = slug(pick(SEATS, i)), slug(pick(TABLES, i + 2))
        groups.append(("pair",
                       "Assign non-overlapping rectangles for two items placed together",
                       pick(SCENES, i + 3),
                       {"cells": {a: rect(1, 2 + i % 3, 2, 2), b: rect(4 + i % 2, 2 + i % 3, 2, 1)},
                        "facing": {a: pick(("Right", "Down"), i), b: pick(("Left", "Down"), i + 1)}}))
    for i in range(10):  # wall_item: row near the top of a wall grid
        noun = pick(WALL_DECOR, i)
        key = slug(noun)
        groups.append(("wall_item",
                       f"Assign wall-grid cells for a {noun} hung at eye level",
                       pick(SCENES, i + 4),
                       {"cells": {key: rect(2 + i % 4, 1 + i % 2, 2, 1)},
                        "facing": {key: "Down"}}))
    taxonomy = ["large_single", "medium_single", "small_single", "pair", "wall_item"]
    return taxonomy, records("ca", groups)


def frontal_face():
    groups = (
        ("seating", SEATS), ("beds", BEDS), ("storage", STORAGE),
        ("desks", TABLES), ("decor", WALL_DECOR),
    )
    rows = []
    for g, (category, pool) in enumerate(groups):
        for i in range(10):
            noun = pick(pool, i)
            face = "Front" if i < 8 else ("Back", "Left", "Right")[(g + i) % 3]
            rows.append((category,
                         f"Four views of a {noun} are attached; pick the frontal face",
                         pick(SCENES, i), {"face": face}))
    return [g[0] for g in groups], records("ff", rows)


def rotation_angle():
    bands = (
        ("face_down", 0.0, "toward the viewer"),
        ("face_up", 180.0, "away from the viewer"),
        ("face_left", 90.0, "toward the left wall"),
        ("face_right", 270.0, "toward the right wall"),
        ("angled", None, "at an angle"),
    )
    rows = []
    for category, theta, desc in bands:
        for i in range(10):
            noun = pick(SEATS + BEDS + STORAGE, i)
            value = theta if theta is not None else float((45 + 30 * i) % 360)
            rows.append((category,
                         f"The {noun} should face {desc}; give the rotation in degrees",
                         pick(SCENES, i), {"theta": value}))
    return [b[0] for b in bands], records("ra", rows)


def reflection():
    rows = []
    for i in range(10):
        rows.append(("approve", "Review the layout against the request",
                     pick(SCENES, i),
                     {"satisfactory": True, "critique": "placement meets the request", "adjustments": []}))
    for i in range(10):
        a, b = slug(pick(SEATS, i)), slug(pick(TABLES, i + 1))
        rows.append(("fix_overlap", f"The render shows the {a} overlapping the {b}",
                     pick(SCENES, i),
                     {"satisfactory": False, "critique": f"{a} intersects {b}",
                      "adjustments": [{"objkey": a, "action": "translate",
                                       "value": [0.5 + 0.1 * i, 0.0, 1.0 + 0.2 * i]}]}))
    for i in range(10):
        key = slug(pick(STORAGE, i))
        rows.append(("fix_out_of_room", f"The render shows the {key} poking through a wall",
                     pick(SCENES, i + 1),
                     {"satisfactory": False, "critique": f"{key} leaves the room",
                      "adjustments": [{"objkey": key, "action": "translate",
                                       "value": [1.0 + 0.1 * i, 0.0, 1.2]}]}))
    for i in range(10):
        key = slug(pick(SEATS + BEDS, i))
        rows.append(("fix_facing", f"The {key} faces the wall in the capture",
                     pick(SCENES, i + 2),
                     {"satisfactory": False, "critique": f"{key} faces the wrong way",
                      "adjustments": [{"objkey": key, "action": "rotate",
                                       "value": float((180 + 10 * i) % 360)}]}))
    for i in range(10):
        key = slug(pick(TABLES + STORAGE, i))
        factor = 0.8 if i % 2 else 1.2
        rows.append(("fix_scale", f"The {key} looks out of proportion in the capture",
                     pick(SCENES, i + 3),
                     {"satisfactory": False, "critique": f"{key} is the wrong size",
                      "adjustments": [{"objkey": key, "action": "scale", "value": factor}]}))
    taxonomy = ["approve", "fix_overlap", "fix_out_of_room", "fix_facing", "fix_scale"]
    return taxonomy, records("rf", rows)


def candidate_pick():
    groups = (
        ("beds", BEDS), ("seating", SEATS), ("tables", TABLES),
        ("storage", STORAGE), ("lighting", LIGHTS),
    )
    rows = []
    for g, (category, pool) in enumerate(groups):
        for i in range(10):
            noun = pick(pool, i)
            style = pick(("modern", "rustic", "minimal", "classic", "industrial"), i + g)
            rows.append((category,
                         f"Sixteen candidate renders are attached; pick the best {style} {noun}",
                         pick(SCENES, i), {"choice": (3 * i + g) % 16}))
    return [g[0] for g in groups], records("cp", rows)


BUILDERS = {
    "task_decomposition": task_decomposition,
    "scale_factor": scale_factor,
    "placement_category": placement_category,
    "cell_assignment": cell_assignment,
    "frontal_face": frontal_face,
    "rotation_angle": rotation_angle,
    "reflection": reflection,
    "candidate_pick": candidate_pick,
}


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    for name, build in BUILDERS.items():
        taxonomy, recs = build()
        assert 50 <= len(recs) <= 100, (name, len(recs))
        path = DATA / f"{name}.json"
        path.write_text(json.dumps({"taxonomy": taxonomy, "records": recs}, indent=1) + "\n")
        per = {c: sum(1 for r in recs if r["category"] == c) for c in taxonomy}
        print(f"{name}: {len(recs)} records, per-category {per}")


if __name__ == "__main__":
    main()
