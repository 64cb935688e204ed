import { execFileSync } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { makeField, readGridField, writeGridField } from '../src/gridfield.js';

describe('grid-field files', () => {
  it('round-trips text fields exactly', () => {
    const dir = mkdtempSync(join(tmpdir(), 'gfld-'));
    const values = Array.from({ length: 12 }, (_, i) => Math.sin(i) * 10 ** (i % 5 - 2));
    const field = makeField(3, 4, values);
    const path = join(dir, 'f.gfld');
    writeGridField(path, field);
    const back = readGridField(path);
    expect(back.rows).toBe(3);
    expect(back.cols).toBe(4);
    expect(Array.from(back.values)).toEqual(values);
  });

  it('reads fields written by the inversion toolkit, both forms', () => {
    const dir = mkdtempSync(join(tmpdir(), 'gfld-'));
    const script = [
      'import numpy as np',
      'from gwlatent.gridfield import write_gridfield',
      'f = np.arange(6, dtype=float).reshape(2, 3) / 7.0',
      `write_gridfield(${JSON.stringify(join(dir, 't.gfld'))}, f)`,
      `write_gridfield(${JSON.stringify(join(dir, 'b.gfld'))}, f, binary=True)`,
    ].join('\n');
    execFileSync('python3', ['-c', script]);
    for (const name of ['t.gfld', 'b.gfld']) {
      const field = readGridField(join(dir, name));
      expect(field.rows).toBe(2);
      expect(Array.from(field.values)).toEqual([0, 1, 2, 3, 4, 5].map((v) => v / 7.0));
    }
  });

  it('rejects malformed files', () => {
    const dir = mkdtempSync(join(tmpdir(), 'gfld-'));
    const path = join(dir, 'bad.gfld');
    writeGridField(path, makeField(2, 2, [1, 2, 3, 4]));
    expect(() => readGridField(join(dir, 'missing.gfld'))).toThrow();
    expect(() => makeField(2, 2, [1, 2, 3])).toThrow(/expected 4 values/);
  });
});
