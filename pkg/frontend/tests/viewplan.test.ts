import { describe, expect, it } from "vitest";

import { frontalDirection } from "../src/geometry.js";
import { buildTopDownPlan, buildWallPlan, hitTest, tooltipText } from "../src/viewplan.js";
import { makeItem, makeScene } from "./helpers.js";

const wardrobe = makeItem({
  objkey: "wardrobe_1",
  label: "wardrobe",
  position: [3, 0, 2],
  theta: 90,
  scale: [2, 1, 2],
  aabb_local: { min: [-0.6, 0, -0.2], max: [0.6, 1, 0.4] },
});

describe("top-down plan", () => {
  it("carries every scene item with its label", () => {
    const scene = makeScene([wardrobe, makeItem({ objkey: "crate_1", label: "crate" })]);
    const plan = buildTopDownPlan(scene);
    expect(plan.items.length).toBe(scene.items.length);
    expect(plan.items.map((i) => i.objkey)).toEqual(["wardrobe_1", "crate_1"]);
    expect(plan.items.map((i) => i.label)).toEqual(["wardrobe", "crate"]);
    expect(plan.outline).toEqual(scene.room.floor_polygon);
  });

  it("rotates the footprint: scale first, then theta about vertical", () => {
    const plan = buildTopDownPlan(makeScene([wardrobe]));
    const corners = plan.items[0].corners;
    // local floor corners scaled by (2, 2): x in ±1.2, z in [-0.4, 0.8];
    // theta=90 maps (x, z) -> (3 - z, 2 + x)
    const expected = [
      [3.4, 0.8],
      [3.4, 3.2],
      [2.2, 3.2],
      [2.2, 0.8],
    ];
    corners.forEach((c, i) => {
      expect(c[0]).toBeCloseTo(expected[i][0], 9);
      expect(c[1]).toBeCloseTo(expected[i][1], 9);
    });
  });

  it.each([
    [0, [0, 1]],
    [90, [-1, 0]],
    [180, [0, -1]],
    [270, [1, 0]],
  ])("theta %d points the facing arrow along %j", (theta, dir) => {
    const scene = makeScene([makeItem({ theta: theta as number })]);
    const arrow = buildTopDownPlan(scene, { arrows: true }).items[0].arrow!;
    expect(arrow.dir[0]).toBeCloseTo((dir as number[])[0], 12);
    expect(arrow.dir[1]).toBeCloseTo((dir as number[])[1], 12);
    // the drawn segment leaves the item center along the same direction
    expect(arrow.to[0] - arrow.from[0]).toBeCloseTo((dir as number[])[0] * 0.6, 9);
    expect(arrow.to[1] - arrow.from[1]).toBeCloseTo((dir as number[])[1] * 0.6, 9);
  });

  it("matches the frontal convention for arbitrary theta", () => {
    for (const theta of [15, 37.5, 123, 301]) {
      const arrow = buildTopDownPlan(makeScene([makeItem({ theta })])).items[0].arrow!;
      const [fx, fz] = frontalDirection(theta);
      expect(arrow.dir[0]).toBeCloseTo(fx, 12);
      expect(arrow.dir[1]).toBeCloseTo(fz, 12);
    }
  });

  it("omits arrows when toggled off", () => {
    const plan = buildTopDownPlan(makeScene([makeItem()]), { arrows: false });
    expect(plan.items[0].arrow).toBeNull();
  });

  it("draws one grid line per cell boundary", () => {
    const scene = makeScene();
    // 4x4 m room at 0.5 m cells: 9 vertical + 9 horizontal boundaries
    expect(buildTopDownPlan(scene, { grid: true }).gridLines.length).toBe(18);
    expect(buildTopDownPlan(scene, { grid: false }).gridLines.length).toBe(0);
    expect(buildTopDownPlan(scene, { grid: true, cellSize: 1 }).gridLines.length).toBe(10);
  });

  it("shades exactly the cells touching a tagged wall", () => {
    const plan = buildTopDownPlan(makeScene(), { shading: true });
    // 8x8 grid, walls on the z=0 and x=0 edges: row 0 plus column 0, shared corner once
    expect(plan.shadedCells.length).toBe(15);
    expect(plan.shadedCells.filter((c) => c.row === 0).length).toBe(8);
    expect(plan.shadedCells.filter((c) => c.col === 0).length).toBe(8);
    expect(plan.shadedCells.filter((c) => c.row === 0 && c.col === 0).length).toBe(1);
    expect(buildTopDownPlan(makeScene(), { shading: false }).shadedCells.length).toBe(0);
  });
});

describe("hit testing and tooltips", () => {
  const crate = makeItem({ objkey: "crate_1", label: "crate", position: [1, 0, 1] });
  const scene = makeScene([crate, wardrobe]);
  const plan = buildTopDownPlan(scene);

  it("finds the item under the cursor", () => {
    expect(hitTest(plan, 3.0, 2.0)?.objkey).toBe("wardrobe_1");
    expect(hitTest(plan, 1.2, 1.2)?.objkey).toBe("crate_1");
    expect(hitTest(plan, 0.2, 3.8)).toBeNull();
  });

  it("prefers the item drawn last when footprints overlap", () => {
    const a = makeItem({ objkey: "a", position: [2, 0, 2] });
    const b = makeItem({ objkey: "b", position: [2, 0, 2] });
    expect(hitTest(buildTopDownPlan(makeScene([a, b])), 2, 2)?.objkey).toBe("b");
  });

  it("tooltip reports objkey, position, and world dimensions", () => {
    const text = tooltipText(wardrobe);
    expect(text).toContain("wardrobe_1");
    expect(text).toContain("pos (3, 0, 2)");
    expect(text).toContain("θ 90");
    expect(text).toContain("2.4 × 1 × 1.2 m");
  });
});

describe("wall elevation plan", () => {
  const painting = makeItem({
    objkey: "painting_1",
    label: "painting",
    position: [1.5, 1.2, 0.1],
    theta: 0,
    aabb_local: { min: [-0.5, 0, -0.05], max: [0.5, 0.8, 0.05] },
    category: "Wall",
  });
  const farPainting = makeItem({
    objkey: "painting_2",
    label: "painting",
    position: [1.5, 1.2, 3.9],
    theta: 180,
    aabb_local: { min: [-0.5, 0, -0.05], max: [0.5, 0.8, 0.05] },
    category: "Wall",
  });
  const sofa = makeItem({ objkey: "sofa_1", label: "sofa", position: [2, 0, 0.5] });

  it("shows only Wall items within reach of the chosen wall", () => {
    const plan = buildWallPlan(makeScene([painting, farPainting, sofa]), "wall_top");
    expect(plan.items.map((r) => r.objkey)).toEqual(["painting_1"]);
    expect(plan.width).toBeCloseTo(4, 12);
    expect(plan.height).toBeCloseTo(2.8, 12);
  });

  it("projects the item onto wall coordinates", () => {
    const rect = buildWallPlan(makeScene([painting]), "wall_top").items[0];
    expect(rect.u0).toBeCloseTo(1.0, 9);
    expect(rect.u1).toBeCloseTo(2.0, 9);
    expect(rect.y0).toBeCloseTo(1.2, 12);
    expect(rect.y1).toBeCloseTo(2.0, 12);
  });

  it("rejects unknown wall ids", () => {
    expect(() => buildWallPlan(makeScene(), "wall_east")).toThrow(/no wall/);
  });
});

describe("room shapes", () => {
  it("keeps shaded cells inside an L-shaped floor", () => {
    const room = {
      floor_polygon: [
        [0, 0],
        [4, 0],
        [4, 2],
        [2, 2],
        [2, 4],
        [0, 4],
      ] as [number, number][],
      height: 2.8,
      walls: [{ id: "wall_top", a: [0, 0] as [number, number], b: [4, 0] as [number, number] }],
    };
    const plan = buildTopDownPlan(makeScene([], 0, room), { shading: true });
    // only the z=0 wall is tagged: its full row of 8 cells, nothing else
    expect(plan.shadedCells.length).toBe(8);
    expect(plan.shadedCells.every((c) => c.row === 0)).toBe(true);
    // the notch x>2, z>2 holds no cells at all
    for (const c of plan.shadedCells) {
      expect(c.rect[1]).toBeLessThan(2);
    }
  });
});
