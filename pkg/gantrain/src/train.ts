/** WGAN-GP training loop.
 *
 * Alternates criticIters critic updates (Wasserstein loss plus gradient
 * penalty) with one generator update, using Adam(beta1=0, beta2=0.9) on
 * both networks. Checkpoints per epoch: generator in the WGGW interchange
 * format, critic snapshot as JSON, sample rasters as grid fields, and a
 * cumulative loss-history CSV.
 */

import { mkdirSync, readdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { TrainConfig } from './config.js';
import { gradientPenalty } from './gp.js';
import { makeField, readGridField, writeGridField, GridField } from './gridfield.js';
import { Architecture, architecture, Critic, Generator, imageSize } from './model.js';
import { Rng } from './rng.js';
import { saveWeights } from './weights.js';

export interface LossRow {
  step: number;
  epoch: number;
  criticLoss: number;
  genLoss: number;
  penalty: number;
}

export interface TrainResult {
  generator: Generator;
  critic: Critic;
  history: LossRow[];
  arch: Architecture;
}

export function loadDataset(dir: string, side: number): tf.Tensor4D {
  const files = readdirSync(dir).filter((f) => f.endsWith('.gfld')).sort();
  if (files.length === 0) throw new Error(`no .gfld files in ${dir}`);
  const data = new Float32Array(files.length * side * side);
  files.forEach((name, i) => {
    const field = readGridField(join(dir, name));
    if (field.rows !== side || field.cols !== side) {
      throw new Error(`${name}: ${field.rows}x${field.cols}, expected ${side}x${side}`);
    }
    data.set(Float32Array.from(field.values), i * side * side);
  });
  return tf.tensor4d(data, [files.length, side, side, 1]);
}

class BatchStream {
  private order: number[] = [];
  private cursor = 0;

  constructor(private n: number, private rng: Rng) {}

  next(count: number): number[] {
    const out: number[] = [];
    while (out.length < count) {
      if (this.cursor >= this.order.length) {
        this.order = this.rng.shuffle(this.n);
        this.cursor = 0;
      }
      out.push(this.order[this.cursor]);
      this.cursor += 1;
    }
    return out;
  }
}

export function latentBatch(
  rng: Rng, batch: number, latent: [number, number],
): tf.Tensor4D {
  return tf.tensor4d(rng.normals(batch * latent[0] * latent[1]),
                     [batch, latent[0], latent[1], 1]);
}

/** Networks exactly as trainWganGp initializes them for cfg.seed. */
export function buildModels(cfg: TrainConfig): { generator: Generator; critic: Critic; arch: Architecture } {
  const arch = architecture(cfg.arch, { latent: cfg.customLatent, widths: cfg.customWidths });
  const initRng = new Rng(cfg.seed ^ 0x9e3779b9);
  const generator = Generator.createRandom(arch, initRng);
  const critic = Critic.createRandom(arch, initRng);
  return { generator, critic, arch };
}

export function trainWganGp(
  cfg: TrainConfig,
  onEpoch?: (epoch: number, result: TrainResult) => boolean | void,
): TrainResult {
  const { generator, critic, arch } = buildModels(cfg);
  const side = imageSize(arch);
  const dataset = loadDataset(cfg.dataDir, side);
  const n = dataset.shape[0];
  if (n < cfg.batchSize) {
    throw new Error(`dataset of ${n} images is smaller than one batch (${cfg.batchSize})`);
  }
  const drawRng = new Rng(cfg.seed + 1);
  const stream = new BatchStream(n, new Rng(cfg.seed + 2));

  const criticOpt = tf.train.adam(cfg.learningRate, 0.0, 0.9);
  const genOpt = tf.train.adam(cfg.learningRate, 0.0, 0.9);
  const history: LossRow[] = [];
  const stepsPerEpoch = Math.floor(n / cfg.batchSize);
  let step = 0;

  const gatherBatch = () =>
    tf.gather(dataset, tf.tensor1d(stream.next(cfg.batchSize), 'int32')) as tf.Tensor4D;

  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    for (let s = 0; s < stepsPerEpoch; s++) {
      let lastCritic = 0;
      let lastPenalty = 0;
      for (let c = 0; c < cfg.criticIters; c++) {
        tf.tidy(() => {
          const real = gatherBatch();
          const z = latentBatch(drawRng, cfg.batchSize, arch.latent);
          const t = tf.tensor1d(drawRng.uniforms(cfg.batchSize));
          let penaltyVal = 0;
          const value = criticOpt.minimize(() => {
            const fake = generator.forward(z);
            const dFake = tf.mean(critic.forward(fake));
            const dReal = tf.mean(critic.forward(real));
            const penalty = cfg.lambda > 0
              ? gradientPenalty((x) => critic.forward(x), real, fake, cfg.lambda, t)
              : tf.scalar(0);
            penaltyVal = penalty.dataSync()[0];
            return tf.add(tf.sub(dFake, dReal), penalty) as tf.Scalar;
          }, true, critic.variables()) as tf.Scalar;
          lastCritic = value.dataSync()[0];
          lastPenalty = penaltyVal;
        });
      }

      let genLoss = 0;
      tf.tidy(() => {
        const z = latentBatch(drawRng, cfg.batchSize, arch.latent);
        const value = genOpt.minimize(
          () => tf.neg(tf.mean(critic.forward(generator.forward(z)))) as tf.Scalar,
          true, generator.variables(),
        ) as tf.Scalar;
        genLoss = value.dataSync()[0];
      });

      step += 1;
      if (!Number.isFinite(lastCritic) || !Number.isFinite(genLoss)) {
        throw new Error(`non-finite loss at epoch ${epoch} step ${step}`);
      }
      history.push({ step, epoch, criticLoss: lastCritic, genLoss, penalty: lastPenalty });
    }
    if (onEpoch && onEpoch(epoch, { generator, critic, history, arch }) === true) {
      break;  // caller asked to stop early
    }
  }
  dataset.dispose();
  return { generator, critic, history, arch };
}

export function generatorSamples(
  generator: Generator, count: number, seed: number,
): GridField[] {
  const rng = new Rng(seed);
  const z = latentBatch(rng, count, generator.arch.latent);
  const imgs = generator.forward(z);
  const side = imgs.shape[1];
  const flat = imgs.dataSync();
  const out: GridField[] = [];
  for (let i = 0; i < count; i++) {
    out.push(makeField(side, side, flat.subarray(i * side * side, (i + 1) * side * side)));
  }
  return out;
}

export function saveCheckpoint(dir: string, epoch: number, result: TrainResult): string {
  mkdirSync(dir, { recursive: true });
  const wggw = join(dir, `generator_epoch_${epoch}.wggw`);
  saveWeights(wggw, result.generator.toLayerWeights());
  writeFileSync(join(dir, `critic_epoch_${epoch}.json`),
                JSON.stringify(result.critic.snapshot()));
  generatorSamples(result.generator, 4, 1000 + epoch).forEach((field, i) => {
    writeGridField(join(dir, `sample_epoch_${epoch}_${i}.gfld`), field);
  });
  const lines = ['step,epoch,critic_loss,gen_loss,gradient_penalty'];
  for (const row of result.history) {
    lines.push(`${row.step},${row.epoch},${row.criticLoss},${row.genLoss},${row.penalty}`);
  }
  writeFileSync(join(dir, 'losses.csv'), lines.join('\n') + '\n');
  return wggw;
}
