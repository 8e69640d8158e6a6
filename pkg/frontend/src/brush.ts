// Brush strokes over a mask buffer: values move toward 1 (add) or 0 (erase)
// with a hardness falloff, clamped to [0,1]. Out-of-bounds segments clip.

import { MaskBuffer } from "./maskBuffer";

export type BrushMode = "add" | "erase";

export interface BrushState {
  radius: number; // pixels, > 0
  hardness: number; // [0,1]: fraction of the radius at full strength
  mode: BrushMode;
}

export interface Point {
  x: number;
  y: number;
}

function segmentDistance(px: number, py: number, a: Point, b: Point): number {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const lengthSq = dx * dx + dy * dy;
  let t = 0;
  if (lengthSq > 0) {
    t = Math.min(1, Math.max(0, ((px - a.x) * dx + (py - a.y) * dy) / lengthSq));
  }
  const cx = a.x + t * dx;
  const cy = a.y + t * dy;
  return Math.hypot(px - cx, py - cy);
}

function influence(dist: number, radius: number, hardness: number): number {
  if (dist > radius) return 0;
  const core = radius * hardness;
  if (dist <= core) return 1;
  return 1 - (dist - core) / (radius - core);
}

export function applyStroke(mask: MaskBuffer, stroke: Point[], brush: BrushState): void {
  if (brush.radius <= 0) throw new Error(`brush radius must be positive, got ${brush.radius}`);
  if (brush.hardness < 0 || brush.hardness > 1) {
    throw new Error(`brush hardness must be in [0,1], got ${brush.hardness}`);
  }
  if (stroke.length === 0) return;
  const segments: Array<[Point, Point]> = [];
  if (stroke.length === 1) {
    segments.push([stroke[0], stroke[0]]);
  } else {
    for (let i = 1; i < stroke.length; i++) segments.push([stroke[i - 1], stroke[i]]);
  }
  const sign = brush.mode === "add" ? 1 : -1;
  for (const [a, b] of segments) {
    const x0 = Math.max(0, Math.floor(Math.min(a.x, b.x) - brush.radius));
    const x1 = Math.min(mask.width - 1, Math.ceil(Math.max(a.x, b.x) + brush.radius));
    const y0 = Math.max(0, Math.floor(Math.min(a.y, b.y) - brush.radius));
    const y1 = Math.min(mask.height - 1, Math.ceil(Math.max(a.y, b.y) + brush.radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const w = influence(segmentDistance(x, y, a, b), brush.radius, brush.hardness);
        if (w > 0) {
          mask.set(x, y, mask.get(x, y) + sign * w);
        }
      }
    }
  }
}
