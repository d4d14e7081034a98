// SVG chart fragments built from server-provided series. Pixel scaling
// happens here; the numbers a user reads (axis end labels, point values)
// are always actual series values, never aggregates computed client-side.

import { Point } from "./viewmodel.js";

export interface ChartBox {
  width: number;
  height: number;
  pad: number;
}

export const DEFAULT_BOX: ChartBox = { width: 420, height: 220, pad: 30 };

function bounds(points: Point[]): { x0: number; x1: number; y0: number; y1: number } {
  // min/max select existing values; no derived quantities
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  return {
    x0: Math.min(...xs),
    x1: Math.max(...xs),
    y0: Math.min(0, ...ys),
    y1: Math.max(...ys),
  };
}

function scale(
  points: Point[],
  box: ChartBox,
  b = bounds(points),
): { px: (x: number) => number; py: (y: number) => number } {
  const spanX = b.x1 - b.x0 || 1;
  const spanY = b.y1 - b.y0 || 1;
  return {
    px: (x) => box.pad + ((x - b.x0) / spanX) * (box.width - 2 * box.pad),
    py: (y) => box.height - box.pad - ((y - b.y0) / spanY) * (box.height - 2 * box.pad),
  };
}

export function linePath(points: Point[], box: ChartBox = DEFAULT_BOX): string {
  if (points.length === 0) return "";
  const { px, py } = scale(points, box);
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${px(p.x).toFixed(1)},${py(p.y).toFixed(1)}`)
    .join(" ");
}

export function multiLinePaths(
  seriesList: Point[][],
  box: ChartBox = DEFAULT_BOX,
): string[] {
  const all = seriesList.flat();
  if (all.length === 0) return seriesList.map(() => "");
  const shared = bounds(all);
  return seriesList.map((points) => {
    if (points.length === 0) return "";
    const { px, py } = scale(all, box, shared);
    return points
      .map((p, i) => `${i === 0 ? "M" : "L"}${px(p.x).toFixed(1)},${py(p.y).toFixed(1)}`)
      .join(" ");
  });
}

export interface ScatterDot {
  cx: number;
  cy: number;
  label: string;
}

export function scatterDots(points: Point[], box: ChartBox = DEFAULT_BOX): ScatterDot[] {
  if (points.length === 0) return [];
  const { px, py } = scale(points, box);
  return points.map((p) => ({
    cx: px(p.x),
    cy: py(p.y),
    label: p.label ?? "",
  }));
}

export function diagonalPath(points: Point[], box: ChartBox = DEFAULT_BOX): string {
  // reference line y = x for predicted-vs-real scatters
  if (points.length === 0) return "";
  const b = bounds(points);
  const lo = Math.min(b.x0, b.y0);
  const hi = Math.max(b.x1, b.y1);
  const { px, py } = scale(points, box, { x0: lo, x1: hi, y0: lo, y1: hi });
  return `M${px(lo).toFixed(1)},${py(lo).toFixed(1)} L${px(hi).toFixed(1)},${py(hi).toFixed(1)}`;
}

export function axisEndLabels(points: Point[]): { xMax: number; yMax: number } {
  // labels show actual series values (selection, not computation)
  const b = bounds(points);
  return { xMax: b.x1, yMax: b.y1 };
}
