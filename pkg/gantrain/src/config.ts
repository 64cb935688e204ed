/** Flat key=value training configuration (same file style as the
 * inversion toolkit's configs). */

import { readFileSync } from 'node:fs';

export interface TrainConfig {
  dataDir: string;
  epochs: number;
  batchSize: number;
  learningRate: number;
  lambda: number;
  criticIters: number;
  seed: number;
  arch: 'gaussian-6x6' | 'channel-3x3' | 'custom';
  customLatent: [number, number];
  customWidths: number[];
  outDir: string;
  sampleCount: number;
}

const DEFAULTS: TrainConfig = {
  dataDir: '',
  epochs: 1,
  batchSize: 32,
  learningRate: 1e-4,
  lambda: 10,
  criticIters: 5,
  seed: 0,
  arch: 'custom',
  customLatent: [4, 4],
  customWidths: [32, 16],
  outDir: 'out',
  sampleCount: 4,
};

export function parseConfig(text: string): TrainConfig {
  const cfg: TrainConfig = { ...DEFAULTS, customLatent: [4, 4], customWidths: [32, 16] };
  const problems: string[] = [];
  text.split('\n').forEach((line, idx) => {
    const stripped = line.split('#', 1)[0].trim();
    if (!stripped) return;
    const eq = stripped.indexOf('=');
    if (eq < 0) {
      problems.push(`line ${idx + 1}: expected key=value`);
      return;
    }
    const key = stripped.slice(0, eq).trim();
    const value = stripped.slice(eq + 1).trim();
    try {
      applyKey(cfg, key, value);
    } catch (err) {
      problems.push(`line ${idx + 1}: ${(err as Error).message}`);
    }
  });
  if (problems.length > 0) throw new Error(problems.join('; '));
  if (cfg.epochs < 1 || cfg.batchSize < 1 || cfg.learningRate <= 0
      || cfg.lambda < 0 || cfg.criticIters < 1) {
    throw new Error('hyperparameters must be positive (lambda may be 0)');
  }
  return cfg;
}

function applyKey(cfg: TrainConfig, key: string, value: string): void {
  switch (key) {
    case 'data.dir': cfg.dataDir = value; break;
    case 'epochs': cfg.epochs = int(value); break;
    case 'batch_size': cfg.batchSize = int(value); break;
    case 'learning_rate': cfg.learningRate = num(value); break;
    case 'lambda': cfg.lambda = num(value); break;
    case 'critic_iters': cfg.criticIters = int(value); break;
    case 'seed': cfg.seed = int(value); break;
    case 'arch':
      if (!['gaussian-6x6', 'channel-3x3', 'custom'].includes(value)) {
        throw new Error(`unknown arch ${value}`);
      }
      cfg.arch = value as TrainConfig['arch'];
      break;
    case 'custom.latent': {
      const parts = value.toLowerCase().split('x').map((p) => int(p));
      if (parts.length !== 2) throw new Error(`expected ROWSxCOLS, got ${value}`);
      cfg.customLatent = [parts[0], parts[1]];
      break;
    }
    case 'custom.widths':
      cfg.customWidths = value.split(',').map((p) => int(p));
      break;
    case 'out.dir': cfg.outDir = value; break;
    case 'sample_count': cfg.sampleCount = int(value); break;
    default:
      throw new Error(`unknown key '${key}'`);
  }
}

function int(v: string): number {
  const n = Number(v);
  if (!Number.isInteger(n)) throw new Error(`not an integer: ${v}`);
  return n;
}

function num(v: string): number {
  const n = Number(v);
  if (!Number.isFinite(n)) throw new Error(`not a number: ${v}`);
  return n;
}

export function loadConfig(path: string): TrainConfig {
  return parseConfig(readFileSync(path, 'utf8'));
}
