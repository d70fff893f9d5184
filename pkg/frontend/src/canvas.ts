/** Canvas drawing for view plans. Everything upstream is in metres; this file
 *  owns the single metres->pixels transform so hit-testing stays exact.
 */

import type { Pt } from "./geometry.js";
import type { TopDownPlan, WallPlan } from "./viewplan.js";

const MARGIN = 24; // px
const ITEM_FILLS = ["#9ecae9", "#f2c894", "#b5d6a7", "#d9b8d9", "#f0b3ab", "#c9c9e8"];

interface Frame {
  scale: number; // px per metre
  ox: number; // px offset of world origin
  oy: number;
  flipY: boolean; // wall elevations draw y upward
}

export class PlanCanvas {
  private readonly canvas: HTMLCanvasElement;
  private readonly ctx: CanvasRenderingContext2D;
  private frame: Frame | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
  }

  draw(plan: TopDownPlan | WallPlan): void {
    const { ctx, canvas } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (plan.kind === "topdown") {
      this.frame = fitFrame(canvas, plan.bounds.minX, plan.bounds.minZ, plan.bounds.maxX, plan.bounds.maxZ, false);
      this.drawTopDown(plan);
    } else {
      this.frame = fitFrame(canvas, 0, 0, plan.width, plan.height, true);
      this.drawWall(plan);
    }
  }

  /** Canvas pixel -> world metres for the current plan, or null before draw. */
  worldFromPixel(px: number, py: number): Pt | null {
    const f = this.frame;
    if (!f) return null;
    const x = (px - f.ox) / f.scale;
    const y = f.flipY ? (f.oy - py) / f.scale : (py - f.oy) / f.scale;
    return [x, y];
  }

  private px(x: number): number {
    const f = this.frame!;
    return f.ox + x * f.scale;
  }

  private py(y: number): number {
    const f = this.frame!;
    return f.flipY ? f.oy - y * f.scale : f.oy + y * f.scale;
  }

  private path(points: Pt[]): void {
    const { ctx } = this;
    ctx.beginPath();
    points.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(this.px(x), this.py(y));
      else ctx.lineTo(this.px(x), this.py(y));
    });
    ctx.closePath();
  }

  private drawTopDown(plan: TopDownPlan): void {
    const { ctx } = this;
    this.path(plan.outline);
    ctx.fillStyle = "#fbf7ef";
    ctx.fill();

    ctx.strokeStyle = "#d8d2c4";
    ctx.lineWidth = 1;
    for (const line of plan.gridLines) {
      ctx.beginPath();
      ctx.moveTo(this.px(line.a[0]), this.py(line.a[1]));
      ctx.lineTo(this.px(line.b[0]), this.py(line.b[1]));
      ctx.stroke();
    }

    ctx.fillStyle = "rgba(214, 158, 70, 0.25)";
    for (const cell of plan.shadedCells) {
      const [x0, z0, x1, z1] = cell.rect;
      ctx.fillRect(this.px(x0), this.py(z0), (x1 - x0) * this.frame!.scale, (z1 - z0) * this.frame!.scale);
    }

    this.path(plan.outline);
    ctx.strokeStyle = "#4a443a";
    ctx.lineWidth = 2;
    ctx.stroke();

    plan.items.forEach((item, i) => {
      this.path(item.corners);
      ctx.fillStyle = ITEM_FILLS[i % ITEM_FILLS.length];
      ctx.fill();
      ctx.strokeStyle = "#55504a";
      ctx.lineWidth = 1.5;
      ctx.stroke();
      if (item.arrow) this.drawArrow(item.arrow.from, item.arrow.to);
      ctx.fillStyle = "#2e2a24";
      ctx.font = "11px system-ui, sans-serif";
      ctx.textAlign = "center";
      ctx.textBaseline = "middle";
      ctx.fillText(item.label, this.px(item.center[0]), this.py(item.center[1]));
    });
  }

  private drawArrow(from: Pt, to: Pt): void {
    const { ctx } = this;
    const x0 = this.px(from[0]);
    const y0 = this.py(from[1]);
    const x1 = this.px(to[0]);
    const y1 = this.py(to[1]);
    ctx.strokeStyle = "#a33b2e";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
    const angle = Math.atan2(y1 - y0, x1 - x0);
    const head = 6;
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x1 - head * Math.cos(angle - 0.5), y1 - head * Math.sin(angle - 0.5));
    ctx.moveTo(x1, y1);
    ctx.lineTo(x1 - head * Math.cos(angle + 0.5), y1 - head * Math.sin(angle + 0.5));
    ctx.stroke();
  }

  private drawWall(plan: WallPlan): void {
    const { ctx } = this;
    ctx.fillStyle = "#fbf7ef";
    ctx.fillRect(this.px(0), this.py(plan.height), plan.width * this.frame!.scale, plan.height * this.frame!.scale);
    ctx.strokeStyle = "#4a443a";
    ctx.lineWidth = 2;
    ctx.strokeRect(this.px(0), this.py(plan.height), plan.width * this.frame!.scale, plan.height * this.frame!.scale);

    plan.items.forEach((item, i) => {
      const x = this.px(item.u0);
      const y = this.py(item.y1);
      const w = (item.u1 - item.u0) * this.frame!.scale;
      const h = (item.y1 - item.y0) * this.frame!.scale;
      ctx.fillStyle = ITEM_FILLS[i % ITEM_FILLS.length];
      ctx.fillRect(x, y, w, h);
      ctx.strokeStyle = "#55504a";
      ctx.lineWidth = 1.5;
      ctx.strokeRect(x, y, w, h);
      ctx.fillStyle = "#2e2a24";
      ctx.font = "11px system-ui, sans-serif";
      ctx.textAlign = "center";
      ctx.textBaseline = "middle";
      ctx.fillText(item.label, x + w / 2, y + h / 2);
    });
  }
}

function fitFrame(
  canvas: HTMLCanvasElement,
  minX: number,
  minY: number,
  maxX: number,
  maxY: number,
  flipY: boolean,
): Frame {
  const w = Math.max(maxX - minX, 1e-6);
  const h = Math.max(maxY - minY, 1e-6);
  const scale = Math.min((canvas.width - 2 * MARGIN) / w, (canvas.height - 2 * MARGIN) / h);
  const ox = (canvas.width - w * scale) / 2 - minX * scale;
  const topPad = (canvas.height - h * scale) / 2;
  // flipY: py(y) = oy - y*scale and minY sits at the bottom edge of the content
  const oy = flipY ? canvas.height - topPad + minY * scale : topPad - minY * scale;
  return { scale, ox, oy, flipY };
}
