/**
 * 2-D rendering: filled zero-superlevel sets of the three fields with the
 * usual color assignment: A blue, B green, C orange, on white.
 *
 * Pure function of the grid file contents; pixel masks are exposed so tests
 * can check containment and component counts directly.
 */

import { GridFile, requireField, sample2d, ScalarField } from "./gridfile.js";

export const COLORS = {
  background: [255, 255, 255, 255],
  a: [66, 114, 196, 255], // blue
  b: [98, 172, 86, 255], // green
  c: [244, 153, 54, 255], // orange
} as const;

export interface Render2dResult {
  width: number;
  height: number;
  rgba: Uint8Array;
  masks: { a: Uint8Array; b: Uint8Array; c: Uint8Array };
}

export function render2d(grid: GridFile, widthPx = 800, threshold = 0): Render2dResult {
  const a = requireField(grid, "a");
  const b = requireField(grid, "b");
  const c = requireField(grid, "cmin");
  if (a.axes.length !== 2) throw new Error("render2d needs 2-D fields");

  const [ax, ay] = a.axes;
  const aspect = (ay.hi - ay.lo) / (ax.hi - ax.lo);
  const width = widthPx;
  const height = Math.max(2, Math.round(widthPx * aspect));
  const rgba = new Uint8Array(width * height * 4);
  const masks = {
    a: new Uint8Array(width * height),
    b: new Uint8Array(width * height),
    c: new Uint8Array(width * height),
  };

  for (let py = 0; py < height; py++) {
    // image rows run top to bottom; world y runs bottom to top
    const wy = ay.hi - ((py + 0.5) / height) * (ay.hi - ay.lo);
    for (let px = 0; px < width; px++) {
      const wx = ax.lo + ((px + 0.5) / width) * (ax.hi - ax.lo);
      const p = py * width + px;
      let color: readonly number[] = COLORS.background;
      const va = sample2d(a, wx, wy);
      if (va >= threshold) {
        masks.a[p] = 1;
        color = COLORS.a;
      }
      const vc = sample2d(c, wx, wy);
      if (vc >= threshold) {
        masks.c[p] = 1;
        color = COLORS.c;
      }
      const vb = sample2d(b, wx, wy);
      if (!Number.isNaN(vb) && vb >= threshold) {
        masks.b[p] = 1;
        color = COLORS.b;
      }
      rgba[4 * p] = color[0];
      rgba[4 * p + 1] = color[1];
      rgba[4 * p + 2] = color[2];
      rgba[4 * p + 3] = color[3];
    }
  }
  return { width, height, rgba, masks };
}

/** Number of 4-connected components among nonzero mask pixels. */
export function connectedComponents(mask: Uint8Array, width: number, height: number): number {
  const seen = new Uint8Array(mask.length);
  const stack: number[] = [];
  let components = 0;
  for (let start = 0; start < mask.length; start++) {
    if (!mask[start] || seen[start]) continue;
    components += 1;
    stack.push(start);
    seen[start] = 1;
    while (stack.length) {
      const p = stack.pop()!;
      const x = p % width;
      const y = (p - x) / width;
      const neighbors = [
        x > 0 ? p - 1 : -1,
        x < width - 1 ? p + 1 : -1,
        y > 0 ? p - width : -1,
        y < height - 1 ? p + width : -1,
      ];
      for (const q of neighbors) {
        if (q >= 0 && mask[q] && !seen[q]) {
          seen[q] = 1;
          stack.push(q);
        }
      }
    }
  }
  return components;
}

/** True when every nonzero pixel of inner is also nonzero in outer. */
export function maskContained(inner: Uint8Array, outer: Uint8Array): boolean {
  for (let i = 0; i < inner.length; i++) {
    if (inner[i] && !outer[i]) return false;
  }
  return true;
}
