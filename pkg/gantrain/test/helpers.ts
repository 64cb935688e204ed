import { execFileSync } from 'node:child_process';
import { mkdirSync, mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { GridField, writeGridField } from '../src/gridfield.js';

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/** Invoke the inversion toolkit's CLI (the primary's external interface). */
export function gwlatent(args: string[]): string {
  return execFileSync('python3', ['-m', 'gwlatent', ...args]).toString();
}

export function makeFractureDataset(dir: string, n: number, seed: number): string {
  const cfgPath = join(dir, 'fields.cfg');
  writeFileSync(cfgPath, [
    'grid.rows=32',
    'grid.cols=32',
    'fields.kind=fractures',
    `fields.n=${n}`,
    `fields.seed=${seed}`,
    'truth.fractures.count=6',
    '',
  ].join('\n'));
  const out = join(dir, 'data');
  gwlatent(['gen-fields', '--config', cfgPath, '--out', out]);
  return out;
}

export function writeFieldDir(dir: string, fields: GridField[]): string {
  mkdirSync(dir, { recursive: true });
  fields.forEach((field, i) => {
    writeGridField(join(dir, `field_${String(i).padStart(4, '0')}.gfld`), field);
  });
  return dir;
}

/** Leave-one-out 1-NN two-sample accuracy via the toolkit's nn-test command. */
export function nnAccuracy(workDir: string, realDir: string, genDir: string): number {
  const cfgPath = join(workDir, 'nn.cfg');
  writeFileSync(cfgPath, `nn.real_dir=${realDir}\nnn.gen_dir=${genDir}\n`);
  const out = gwlatent(['nn-test', '--config', cfgPath, '--out', join(workDir, 'nn-out')]);
  const match = out.match(/nn_accuracy=([0-9.eE+-]+)/);
  if (!match) throw new Error(`nn-test output had no accuracy: ${out}`);
  return Number(match[1]);
}
