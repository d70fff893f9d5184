/** Scene JSON -> drawable plan. Pure data in metres; canvas.ts owns pixels.
 *
 * The rules here deliberately mirror the service's renderer so the canvas and
 * the PNG views agree: a cell is wall-adjacent when its box touches a wall
 * segment, an elevation shows Wall-category items whose box center lies within
 * 0.6 m of the wall line.
 */

import {
  footprintCorners,
  frontalDirection,
  pointInCorners,
  pointInPolygon,
  polygonBounds,
  rectToSegmentDistance,
  verticalExtent,
  worldDims,
  type Pt,
} from "./geometry.js";
import type { ItemJson, SceneJson } from "./types.js";

export interface PlanOptions {
  grid?: boolean;
  shading?: boolean;
  arrows?: boolean;
  cellSize?: number;
}

export interface GridLine {
  a: Pt;
  b: Pt;
}

export interface ShadedCell {
  row: number;
  col: number;
  rect: [number, number, number, number]; // x0, z0, x1, z1
}

export interface PlanArrow {
  from: Pt;
  to: Pt;
  dir: Pt; // unit frontal direction in (x, z)
}

export interface PlanItem {
  objkey: string;
  label: string;
  category: string;
  corners: Pt[];
  center: Pt;
  arrow: PlanArrow | null;
}

export interface TopDownPlan {
  kind: "topdown";
  outline: Pt[];
  bounds: { minX: number; minZ: number; maxX: number; maxZ: number };
  gridLines: GridLine[];
  shadedCells: ShadedCell[];
  items: PlanItem[];
}

export interface WallRect {
  objkey: string;
  label: string;
  u0: number;
  y0: number;
  u1: number;
  y1: number;
}

export interface WallPlan {
  kind: "wall";
  wallId: string;
  width: number; // metres along the wall
  height: number; // room height
  items: WallRect[];
}

const DEFAULT_CELL = 0.5;
const TOUCH_EPS = 1e-9;

export function buildTopDownPlan(scene: SceneJson, opts: PlanOptions = {}): TopDownPlan {
  const cell = opts.cellSize ?? DEFAULT_CELL;
  const outline = scene.room.floor_polygon.map(([x, z]): Pt => [x, z]);
  const bounds = polygonBounds(outline);
  const nCols = Math.max(1, Math.ceil((bounds.maxX - bounds.minX) / cell - 1e-9));
  const nRows = Math.max(1, Math.ceil((bounds.maxZ - bounds.minZ) / cell - 1e-9));

  const gridLines: GridLine[] = [];
  if (opts.grid) {
    for (let c = 0; c <= nCols; c++) {
      const x = bounds.minX + c * cell;
      gridLines.push({ a: [x, bounds.minZ], b: [x, bounds.minZ + nRows * cell] });
    }
    for (let r = 0; r <= nRows; r++) {
      const z = bounds.minZ + r * cell;
      gridLines.push({ a: [bounds.minX, z], b: [bounds.minX + nCols * cell, z] });
    }
  }

  const shadedCells: ShadedCell[] = [];
  if (opts.shading) {
    for (let r = 0; r < nRows; r++) {
      for (let c = 0; c < nCols; c++) {
        const x0 = bounds.minX + c * cell;
        const z0 = bounds.minZ + r * cell;
        const x1 = x0 + cell;
        const z1 = z0 + cell;
        if (!cellInsideRoom(x0, z0, x1, z1, outline)) continue;
        const touches = scene.room.walls.some(
          (w) => rectToSegmentDistance(x0, z0, x1, z1, w.a[0], w.a[1], w.b[0], w.b[1]) < TOUCH_EPS,
        );
        if (touches) shadedCells.push({ row: r, col: c, rect: [x0, z0, x1, z1] });
      }
    }
  }

  const items = scene.items.map((item) => planItem(item, opts.arrows ?? true));
  return { kind: "topdown", outline, bounds, gridLines, shadedCells, items };
}

function cellInsideRoom(x0: number, z0: number, x1: number, z1: number, outline: Pt[]): boolean {
  // Shrink by epsilon so edge cells count as inside; rooms are rectilinear so
  // checking the corners and the center is exact.
  const e = 1e-6;
  const probes: Pt[] = [
    [x0 + e, z0 + e],
    [x1 - e, z0 + e],
    [x1 - e, z1 - e],
    [x0 + e, z1 - e],
    [(x0 + x1) / 2, (z0 + z1) / 2],
  ];
  return probes.every(([x, z]) => pointInPolygon(x, z, outline));
}

function planItem(item: ItemJson, withArrow: boolean): PlanItem {
  const corners = footprintCorners(item);
  const center: Pt = [item.position[0], item.position[2]];
  let arrow: PlanArrow | null = null;
  if (withArrow) {
    const dir = frontalDirection(item.theta);
    const [w, , d] = worldDims(item);
    const len = Math.max(0.2, Math.min(w, d) * 0.6);
    arrow = {
      from: center,
      to: [center[0] + dir[0] * len, center[1] + dir[1] * len],
      dir,
    };
  }
  return { objkey: item.objkey, label: item.label, category: item.category, corners, center, arrow };
}

export function buildWallPlan(scene: SceneJson, wallId: string): WallPlan {
  const wall = scene.room.walls.find((w) => w.id === wallId);
  if (!wall) throw new Error(`no wall with id ${wallId}`);
  const [ax, az] = wall.a;
  const [bx, bz] = wall.b;
  const ulen = Math.hypot(bx - ax, bz - az);
  const ux = (bx - ax) / ulen;
  const uz = (bz - az) / ulen;

  const rects: WallRect[] = [];
  for (const item of scene.items) {
    if (item.category !== "Wall") continue;
    const corners = footprintCorners(item);
    const b = polygonBounds(corners);
    const cx = (b.minX + b.maxX) / 2;
    const cz = (b.minZ + b.maxZ) / 2;
    const dist = Math.abs((cx - ax) * -uz + (cz - az) * ux);
    if (dist > 0.6) continue;
    const uMid = (cx - ax) * ux + (cz - az) * uz;
    const halfU = Math.max(b.maxX - b.minX, b.maxZ - b.minZ) / 2;
    const [y0, y1] = verticalExtent(item);
    rects.push({ objkey: item.objkey, label: item.label, u0: uMid - halfU, y0, u1: uMid + halfU, y1 });
  }
  return { kind: "wall", wallId, width: ulen, height: scene.room.height, items: rects };
}

/** Topmost item under the cursor (later items draw on top). */
export function hitTest(plan: TopDownPlan, x: number, z: number): PlanItem | null {
  for (let i = plan.items.length - 1; i >= 0; i--) {
    if (pointInCorners(x, z, plan.items[i].corners)) return plan.items[i];
  }
  return null;
}

export function tooltipText(item: ItemJson): string {
  const [w, h, d] = worldDims(item);
  const [px, py, pz] = item.position;
  const fmt = (v: number) => (Math.round(v * 100) / 100).toString();
  return (
    `${item.objkey} — ${item.label}\n` +
    `pos (${fmt(px)}, ${fmt(py)}, ${fmt(pz)}) m, θ ${fmt(item.theta)}°\n` +
    `dims ${fmt(w)} × ${fmt(h)} × ${fmt(d)} m`
  );
}
