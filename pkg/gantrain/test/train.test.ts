import { existsSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { parseConfig } from '../src/config.js';
import { buildModels, generatorSamples, saveCheckpoint, trainWganGp } from '../src/train.js';
import { gwlatent, makeFractureDataset, nnAccuracy, tempDir, writeFieldDir } from './helpers.js';

function toyConfig(dataDir: string, overrides: string[] = []) {
  return parseConfig([
    `data.dir=${dataDir}`,
    'epochs=1',
    'batch_size=32',
    'critic_iters=5',
    'seed=3',
    'arch=custom',
    'custom.latent=4x4',
    'custom.widths=8,4',
    ...overrides,
  ].join('\n'));
}

describe('training smoke', () => {
  it('one epoch on 64 toy fracture images completes with finite losses', () => {
    const dir = tempDir('smoke-');
    const dataDir = makeFractureDataset(dir, 64, 5);
    const cfg = toyConfig(dataDir);
    const result = trainWganGp(cfg);
    expect(result.history.length).toBe(2); // floor(64 / 32) generator steps
    for (const row of result.history) {
      expect(Number.isFinite(row.criticLoss)).toBe(true);
      expect(Number.isFinite(row.genLoss)).toBe(true);
      expect(row.penalty).toBeGreaterThanOrEqual(0);
    }
    // checkpoint layout
    const ckptDir = join(dir, 'ckpt');
    saveCheckpoint(ckptDir, 1, result);
    expect(existsSync(join(ckptDir, 'generator_epoch_1.wggw'))).toBe(true);
    expect(existsSync(join(ckptDir, 'critic_epoch_1.json'))).toBe(true);
    expect(existsSync(join(ckptDir, 'losses.csv'))).toBe(true);
    // generator output matches the dataset raster size at the checkpoint
    const samples = generatorSamples(result.generator, 2, 1);
    expect(samples[0].rows).toBe(32);
    expect(samples[0].cols).toBe(32);
  });

  it('same-seed runs reproduce the loss history', () => {
    const dir = tempDir('determinism-');
    // 16x16 rasters keep ten steps cheap
    const cfgPath = join(dir, 'fields.cfg');
    writeFileSync(cfgPath, [
      'grid.rows=16', 'grid.cols=16', 'fields.kind=grf', 'fields.n=40',
      'fields.seed=2', '',
    ].join('\n'));
    gwlatent(['gen-fields', '--config', cfgPath, '--out', join(dir, 'data')]);
    const make = () => parseConfig([
      `data.dir=${join(dir, 'data')}`,
      'epochs=2',
      'batch_size=8',
      'critic_iters=5',
      'seed=21',
      'arch=custom',
      'custom.latent=4x4',
      'custom.widths=8',
    ].join('\n'));
    const a = trainWganGp(make());
    const b = trainWganGp(make());
    expect(a.history.length).toBe(10);
    const rel = (x: number, y: number) =>
      Math.abs(x - y) / Math.max(1e-12, Math.abs(x));
    const lastA = a.history[9];
    const lastB = b.history[9];
    expect(rel(lastA.criticLoss, lastB.criticLoss)).toBeLessThan(1e-3);
    expect(rel(lastA.genLoss, lastB.genLoss)).toBeLessThan(1e-3);
  });
});

describe('training direction', () => {
  it('1-NN accuracy after training falls strictly below the pre-training '
      + 'accuracy on 256 fracture images', () => {
    const dir = tempDir('direction-');
    const dataDir = makeFractureDataset(dir, 256, 7);
    const cfg = toyConfig(dataDir, ['custom.widths=16,8', 'seed=13', 'epochs=4']);

    // pre-training: samples from the generator exactly as training initializes it
    const untrained = buildModels(cfg).generator;
    const preDir = writeFieldDir(join(dir, 'gen_pre'), generatorSamples(untrained, 256, 31));
    const accPre = nnAccuracy(dir, dataDir, preDir);

    let accPost = accPre;
    trainWganGp(cfg, (epoch, partial) => {
      const postDir = writeFieldDir(join(dir, `gen_epoch_${epoch}`),
                                    generatorSamples(partial.generator, 256, 31));
      accPost = nnAccuracy(dir, dataDir, postDir);
      console.log(`epoch ${epoch}: 1-NN accuracy ${accPost} (pre-training ${accPre})`);
      return accPost < accPre; // stop as soon as the direction is established
    });
    expect(accPost).toBeLessThan(accPre);
  });
});
