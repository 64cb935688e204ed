/** CLI: `train --config PATH [--out DIR]` runs WGAN-GP training with
 * per-epoch checkpoints; `export --checkpoint PATH --out PATH` validates a
 * WGGW checkpoint and copies it to its destination. */

import { copyFileSync, mkdirSync } from 'node:fs';
import { dirname } from 'node:path';

import { loadConfig } from './config.js';
import { loadWeights, saveWeights } from './weights.js';
import { saveCheckpoint, trainWganGp } from './train.js';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got '${argv[i]}'`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

function cmdTrain(argv: string[]): number {
  const flags = parseFlags(argv);
  const configPath = flags.get('config');
  if (!configPath) {
    console.error('train requires --config PATH');
    return 2;
  }
  const cfg = loadConfig(configPath);
  if (flags.has('out')) cfg.outDir = flags.get('out')!;
  if (!cfg.dataDir) {
    console.error("config error: key 'data.dir' is required");
    return 2;
  }
  const result = trainWganGp(cfg, (epoch, partial) => {
    const path = saveCheckpoint(cfg.outDir, epoch, partial);
    console.log(`epoch ${epoch}: checkpoint ${path}`);
  });
  const last = result.history[result.history.length - 1];
  console.log(`done: ${result.history.length} generator steps, `
    + `critic loss ${last.criticLoss.toFixed(4)}, gen loss ${last.genLoss.toFixed(4)}`);
  return 0;
}

function cmdExport(argv: string[]): number {
  const flags = parseFlags(argv);
  const checkpoint = flags.get('checkpoint');
  const out = flags.get('out');
  if (!checkpoint || !out) {
    console.error('export requires --checkpoint PATH and --out PATH');
    return 2;
  }
  const layers = loadWeights(checkpoint); // validates format and shapes
  mkdirSync(dirname(out) || '.', { recursive: true });
  copyFileSync(checkpoint, out);
  console.log(`exported ${layers.length}-layer generator to ${out}`);
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === 'train') return cmdTrain(rest);
    if (command === 'export') return cmdExport(rest);
    console.error('usage: gantrain <train|export> [flags]');
    return 2;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
