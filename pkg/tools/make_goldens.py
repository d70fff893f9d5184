"""Regenerate the committed renderer golden digests.

Run from the repo root after any *intentional* renderer change:

    python3 tools/make_goldens.py

and commit the updated tests/fixtures/golden_digests.json together with the
renderer diff.  The acceptance suite treats a digest drift as a regression.
"""

import json
from pathlib import Path

from roomsmith.grids import build_floor_grid
from roomsmith.primitives import cube
from roomsmith.render import RenderSpec, WallElevation, render, render_four_views
from roomsmith.scene import FurnitureItem, Placement, Scene, make_rectangular_room
from roomsmith.geometry import Aabb, Vec3

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden_digests.json"


def _bed():
    return FurnitureItem(
        objkey="bed_1",
        label="bed",
        aabb_local=Aabb(Vec3(-0.6, 0.0, -0.4), Vec3(0.6, 0.6, 0.4)),
        placement=Placement(position=Vec3(2.0, 0.0, 2.0), theta=0.0),
        category="Floor",
    )


def main() -> None:
    scene = Scene(room=make_rectangular_room(4.0, 4.0))
    grid = build_floor_grid(scene.room)
    furnished = Scene(room=scene.room, items=(_bed(),))
    goldens = {
        "topdown_empty_4x4_grid": render(scene, grid, RenderSpec()).digest,
        "topdown_bed_4x4_grid": render(furnished, grid, RenderSpec()).digest,
        "wall_top_empty": render(scene, None, RenderSpec(view=WallElevation("wall_top"))).digest,
        "cube_four_views": [v.digest for v in render_four_views(_bed(), cube())],
    }
    OUT.write_text(json.dumps(goldens, indent=2) + "\n")
    print(f"wrote {OUT}")
    for key, val in goldens.items():
        print(f"  {key}: {val if isinstance(val, str) else len(val)} ")


if __name__ == "__main__":
    main()
