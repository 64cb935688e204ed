/** Grid-field file I/O shared with the inversion toolkit.
 *
 * Text form: "GFLD <rows> <cols>" then one whitespace-separated line per
 * row. Binary form: "GFLB", little-endian uint32 rows/cols, float64 cells
 * in row-major order.
 */

import { readFileSync, writeFileSync } from 'node:fs';

export interface GridField {
  rows: number;
  cols: number;
  values: Float64Array; // row-major
}

export function makeField(rows: number, cols: number, values?: ArrayLike<number>): GridField {
  const out = new Float64Array(rows * cols);
  if (values !== undefined) {
    if (values.length !== rows * cols) {
      throw new Error(`expected ${rows * cols} values, got ${values.length}`);
    }
    out.set(Array.from(values));
  }
  return { rows, cols, values: out };
}

export function writeGridField(path: string, field: GridField): void {
  const lines = [`GFLD ${field.rows} ${field.cols}`];
  for (let r = 0; r < field.rows; r++) {
    const row: string[] = [];
    for (let c = 0; c < field.cols; c++) {
      row.push(formatDouble(field.values[r * field.cols + c]));
    }
    lines.push(row.join(' '));
  }
  writeFileSync(path, lines.join('\n') + '\n');
}

export function readGridField(path: string): GridField {
  const buf = readFileSync(path);
  if (buf.length >= 4 && buf.toString('latin1', 0, 4) === 'GFLB') {
    const rows = buf.readUInt32LE(4);
    const cols = buf.readUInt32LE(8);
    const values = new Float64Array(rows * cols);
    for (let i = 0; i < rows * cols; i++) values[i] = buf.readDoubleLE(12 + 8 * i);
    return { rows, cols, values };
  }
  const text = buf.toString('utf8');
  const lines = text.split('\n').filter((l) => l.trim().length > 0);
  const header = lines[0].trim().split(/\s+/);
  if (header[0] !== 'GFLD' || header.length !== 3) {
    throw new Error(`${path}: not a grid-field file`);
  }
  const rows = parseInt(header[1], 10);
  const cols = parseInt(header[2], 10);
  if (lines.length - 1 !== rows) {
    throw new Error(`${path}: header says ${rows} rows, body has ${lines.length - 1}`);
  }
  const values = new Float64Array(rows * cols);
  for (let r = 0; r < rows; r++) {
    const parts = lines[r + 1].trim().split(/\s+/);
    if (parts.length !== cols) {
      throw new Error(`${path}: row ${r} has ${parts.length} values, expected ${cols}`);
    }
    for (let c = 0; c < cols; c++) values[r * cols + c] = Number(parts[c]);
  }
  return { rows, cols, values };
}

/** Shortest decimal that round-trips, like Python's repr(float). */
function formatDouble(v: number): string {
  if (Number.isInteger(v) && Math.abs(v) < 1e16) return `${v}.0`;
  return `${v}`;
}
