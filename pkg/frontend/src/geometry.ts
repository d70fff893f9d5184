/** Pure scene-JSON geometry, mirroring the service's placement semantics:
 *  scale per axis, then rotate theta degrees about vertical (counter-clockwise
 *  in the x/z plane), then translate. The frontal face points along local +z.
 */

import type { ItemJson, RoomJson } from "./types.js";

export type Pt = [number, number]; // (x, z) floor coordinates, metres

export function deg2rad(deg: number): number {
  return (deg * Math.PI) / 180;
}

/** Unit (x, z) direction the item's front faces at the given theta. */
export function frontalDirection(theta: number): Pt {
  const r = deg2rad(theta);
  return [-Math.sin(r), Math.cos(r)];
}

/** Floor-plane corners of the item's box, in drawing order. */
export function footprintCorners(item: ItemJson): Pt[] {
  const [sx, , sz] = item.scale;
  const [px, , pz] = item.position;
  const r = deg2rad(item.theta);
  const cos = Math.cos(r);
  const sin = Math.sin(r);
  const lo = item.aabb_local.min;
  const hi = item.aabb_local.max;
  const local: Pt[] = [
    [lo[0] * sx, lo[2] * sz],
    [hi[0] * sx, lo[2] * sz],
    [hi[0] * sx, hi[2] * sz],
    [lo[0] * sx, hi[2] * sz],
  ];
  return local.map(([x, z]) => [px + x * cos - z * sin, pz + x * sin + z * cos]);
}

/** World-space vertical extent [yMin, yMax] of the item's box. */
export function verticalExtent(item: ItemJson): [number, number] {
  const sy = item.scale[1];
  const py = item.position[1];
  return [py + item.aabb_local.min[1] * sy, py + item.aabb_local.max[1] * sy];
}

/** World-space dimensions (width x height x depth) after scaling. */
export function worldDims(item: ItemJson): [number, number, number] {
  const lo = item.aabb_local.min;
  const hi = item.aabb_local.max;
  return [
    (hi[0] - lo[0]) * item.scale[0],
    (hi[1] - lo[1]) * item.scale[1],
    (hi[2] - lo[2]) * item.scale[2],
  ];
}

export function polygonBounds(poly: Pt[]): { minX: number; minZ: number; maxX: number; maxZ: number } {
  let minX = Infinity, minZ = Infinity, maxX = -Infinity, maxZ = -Infinity;
  for (const [x, z] of poly) {
    minX = Math.min(minX, x);
    minZ = Math.min(minZ, z);
    maxX = Math.max(maxX, x);
    maxZ = Math.max(maxZ, z);
  }
  return { minX, minZ, maxX, maxZ };
}

/** Even-odd point-in-polygon; boundary points count as inside via epsilon. */
export function pointInPolygon(x: number, z: number, poly: Pt[], eps = 1e-9): boolean {
  let inside = false;
  for (let i = 0, j = poly.length - 1; i < poly.length; j = i++) {
    const [xi, zi] = poly[i];
    const [xj, zj] = poly[j];
    if (distToSegment(x, z, xi, zi, xj, zj) <= eps) return true;
    if (zi > z !== zj > z && x < ((xj - xi) * (z - zi)) / (zj - zi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

export function distToSegment(x: number, z: number, ax: number, az: number, bx: number, bz: number): number {
  const dx = bx - ax;
  const dz = bz - az;
  const len2 = dx * dx + dz * dz;
  const t = len2 === 0 ? 0 : Math.max(0, Math.min(1, ((x - ax) * dx + (z - az) * dz) / len2));
  return Math.hypot(x - (ax + t * dx), z - (az + t * dz));
}

/** Min distance between an axis-aligned rect and a segment (exact for
 *  axis-aligned segments, corner-sampled otherwise — room walls are always
 *  axis-aligned in practice). */
export function rectToSegmentDistance(
  x0: number, z0: number, x1: number, z1: number,
  ax: number, az: number, bx: number, bz: number,
): number {
  const gap = (lo: number, hi: number, a: number, b: number) =>
    Math.max(0, Math.max(Math.min(a, b), lo) - Math.min(Math.max(a, b), hi));
  if (ax === bx) return Math.hypot(gap(x0, x1, ax, ax), gap(z0, z1, az, bz));
  if (az === bz) return Math.hypot(gap(x0, x1, ax, bx), gap(z0, z1, az, az));
  return Math.min(
    distToSegment(x0, z0, ax, az, bx, bz),
    distToSegment(x1, z0, ax, az, bx, bz),
    distToSegment(x1, z1, ax, az, bx, bz),
    distToSegment(x0, z1, ax, az, bx, bz),
  );
}

export function pointInCorners(x: number, z: number, corners: Pt[]): boolean {
  return pointInPolygon(x, z, corners);
}

/** Project a floor point onto a wall: distance along the wall from `a`. */
export function wallU(room: RoomJson, wallId: string, x: number, z: number): number {
  const wall = room.walls.find((w) => w.id === wallId);
  if (!wall) throw new Error(`unknown wall ${wallId}`);
  const dx = wall.b[0] - wall.a[0];
  const dz = wall.b[1] - wall.a[1];
  const len = Math.hypot(dx, dz);
  return ((x - wall.a[0]) * dx + (z - wall.a[1]) * dz) / len;
}
