/**
 * Parser for the sospdiff grid export format.
 *
 * Layout (plain text, one value per line, row-major with the last axis
 * fastest):
 *
 *     sospdiff-grid 1
 *     field <name> <dim> <lo1> <hi1> <n1> [<lo2> <hi2> <n2> ...]
 *     <n1*n2*... value lines>
 *     field ...
 */

export interface GridAxis {
  lo: number;
  hi: number;
  n: number;
}

export interface ScalarField {
  name: string;
  axes: GridAxis[];
  values: Float64Array;
}

export interface GridFile {
  fields: Map<string, ScalarField>;
}

export const GRID_MAGIC = "sospdiff-grid 1";

export function parseGridFile(text: string): GridFile {
  const lines = text.split(/\r?\n/);
  if (lines[0]?.trim() !== GRID_MAGIC) {
    throw new Error(`not a sospdiff grid file (got ${JSON.stringify(lines[0])})`);
  }
  const fields = new Map<string, ScalarField>();
  let i = 1;
  while (i < lines.length) {
    const line = lines[i].trim();
    if (line === "") {
      i += 1;
      continue;
    }
    const parts = line.split(/\s+/);
    if (parts[0] !== "field") {
      throw new Error(`expected a field header at line ${i + 1}: ${line}`);
    }
    const name = parts[1];
    const dim = Number(parts[2]);
    if (!Number.isInteger(dim) || dim < 1 || parts.length !== 3 + 3 * dim) {
      throw new Error(`malformed field header at line ${i + 1}`);
    }
    const axes: GridAxis[] = [];
    for (let k = 0; k < dim; k++) {
      const lo = Number(parts[3 + 3 * k]);
      const hi = Number(parts[4 + 3 * k]);
      const n = Number(parts[5 + 3 * k]);
      if (!Number.isFinite(lo) || !Number.isFinite(hi) || !Number.isInteger(n) || n < 2) {
        throw new Error(`malformed axis ${k} in field ${name}`);
      }
      axes.push({ lo, hi, n });
    }
    const count = axes.reduce((acc, ax) => acc * ax.n, 1);
    const values = new Float64Array(count);
    i += 1;
    for (let v = 0; v < count; v++) {
      const raw = lines[i + v];
      if (raw === undefined) {
        throw new Error(`field ${name}: expected ${count} values, file ended early`);
      }
      const num = Number(raw);
      if (!Number.isFinite(num)) {
        throw new Error(`field ${name}: bad value at line ${i + v + 1}: ${raw}`);
      }
      values[v] = num;
    }
    i += count;
    fields.set(name, { name, axes, values });
  }
  return { fields };
}

export function requireField(grid: GridFile, name: string): ScalarField {
  const f = grid.fields.get(name);
  if (!f) throw new Error(`grid file is missing the ${name} field`);
  return f;
}

/** Row-major flat index, last axis fastest. */
export function flatIndex(field: ScalarField, idx: number[]): number {
  let flat = 0;
  for (let k = 0; k < field.axes.length; k++) {
    flat = flat * field.axes[k].n + idx[k];
  }
  return flat;
}

/** Bilinear sample of a 2-D field at world coordinates; NaN outside. */
export function sample2d(field: ScalarField, x: number, y: number): number {
  const [ax, ay] = field.axes;
  const fx = ((x - ax.lo) / (ax.hi - ax.lo)) * (ax.n - 1);
  const fy = ((y - ay.lo) / (ay.hi - ay.lo)) * (ay.n - 1);
  if (fx < 0 || fy < 0 || fx > ax.n - 1 || fy > ay.n - 1) return NaN;
  const i0 = Math.min(Math.floor(fx), ax.n - 2);
  const j0 = Math.min(Math.floor(fy), ay.n - 2);
  const tx = fx - i0;
  const ty = fy - j0;
  const v00 = field.values[i0 * ay.n + j0];
  const v01 = field.values[i0 * ay.n + j0 + 1];
  const v10 = field.values[(i0 + 1) * ay.n + j0];
  const v11 = field.values[(i0 + 1) * ay.n + j0 + 1];
  return (
    v00 * (1 - tx) * (1 - ty) +
    v01 * (1 - tx) * ty +
    v10 * tx * (1 - ty) +
    v11 * tx * ty
  );
}
