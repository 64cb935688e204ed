/** Generator and critic networks.
 *
 * The generator stacks transposed convolutions (kernel 4, stride 2, same
 * padding: output doubles per layer) with instance normalization and ReLU,
 * closing with a sigmoid layer; the critic mirrors it with stride-2
 * convolutions, instance normalization and LeakyReLU(0.2), ending in a
 * linear 1-channel map whose mean is the critic value.
 */

import * as tf from '@tensorflow/tfjs';

import { Rng } from './rng.js';
import { LayerWeights, expectedBlockShapes } from './weights.js';

export interface Architecture {
  latent: [number, number];
  genWidths: number[];    // hidden tconv widths; a final 1-channel layer is implied
  criticWidths: number[]; // hidden conv widths; a final 1-channel layer is implied
}

export function architecture(
  name: string,
  custom?: { latent: [number, number]; widths: number[] },
): Architecture {
  switch (name) {
    case 'gaussian-6x6':
      return { latent: [6, 6], genWidths: [512, 256, 128], criticWidths: [128, 256, 512] };
    case 'channel-3x3':
      return {
        latent: [3, 3], genWidths: [512, 256, 128, 64], criticWidths: [64, 128, 256, 512],
      };
    case 'custom': {
      if (!custom) throw new Error('custom architecture needs latent shape and widths');
      const widths = [...custom.widths];
      return { latent: custom.latent, genWidths: widths, criticWidths: widths.slice().reverse() };
    }
    default:
      throw new Error(`unknown architecture ${name}`);
  }
}

export function imageSize(arch: Architecture): number {
  return arch.latent[0] * 2 ** (arch.genWidths.length + 1);
}

/** leakyRelu composed from relu so its second derivative path exists
 * (tf.leakyRelu's gradient uses Greater, which has no gradient). */
export function leakyRelu(x: tf.Tensor, alpha = 0.2): tf.Tensor {
  return tf.sub(tf.relu(x), tf.mul(alpha, tf.relu(tf.neg(x))));
}

export function instanceNorm(
  x: tf.Tensor4D, gamma: tf.Tensor1D, beta: tf.Tensor1D, eps = 1e-5,
): tf.Tensor4D {
  const { mean, variance } = tf.moments(x, [1, 2], true);
  const normed = tf.div(tf.sub(x, mean), tf.sqrt(tf.add(variance, eps)));
  return tf.add(tf.mul(normed, gamma), beta) as tf.Tensor4D;
}

interface TConvLayer {
  kind: 'tconv';
  kernel: tf.Variable; // [4, 4, out, in]
  bias: tf.Variable;   // [out]
  inChannels: number;
  outChannels: number;
}

interface INormLayer {
  kind: 'inorm';
  gamma: tf.Variable;
  beta: tf.Variable;
  channels: number;
}

type GenLayer = TConvLayer | INormLayer | { kind: 'relu' } | { kind: 'sigmoid' };

export class Generator {
  layers: GenLayer[] = [];

  constructor(public arch: Architecture) {}

  static createRandom(arch: Architecture, rng: Rng, scale = 0.05): Generator {
    const gen = new Generator(arch);
    const channels = [1, ...arch.genWidths];
    for (let i = 0; i < channels.length - 1; i++) {
      gen.pushTConv(channels[i], channels[i + 1], rng, scale);
      gen.pushINorm(channels[i + 1]);
      gen.layers.push({ kind: 'relu' });
    }
    gen.pushTConv(channels[channels.length - 1], 1, rng, scale);
    gen.layers.push({ kind: 'sigmoid' });
    return gen;
  }

  private pushTConv(cin: number, cout: number, rng: Rng, scale: number): void {
    const data = rng.normals(16 * cout * cin).map((v) => v * scale);
    this.layers.push({
      kind: 'tconv',
      kernel: tf.variable(tf.tensor4d(data, [4, 4, cout, cin])),
      bias: tf.variable(tf.zeros([cout])),
      inChannels: cin,
      outChannels: cout,
    });
  }

  private pushINorm(channels: number): void {
    this.layers.push({
      kind: 'inorm',
      gamma: tf.variable(tf.ones([channels])),
      beta: tf.variable(tf.zeros([channels])),
      channels,
    });
  }

  /** z: [batch, latentH, latentW, 1] -> image [batch, s, s, 1] in (0,1). */
  forward(z: tf.Tensor4D): tf.Tensor4D {
    let x = z;
    for (const layer of this.layers) {
      if (layer.kind === 'tconv') {
        const [n, h, w] = [x.shape[0], x.shape[1], x.shape[2]];
        x = tf.add(
          tf.conv2dTranspose(
            x, layer.kernel as tf.Tensor4D, [n, 2 * h, 2 * w, layer.outChannels], 2, 'same',
          ),
          layer.bias,
        ) as tf.Tensor4D;
      } else if (layer.kind === 'inorm') {
        x = instanceNorm(x, layer.gamma as tf.Tensor1D, layer.beta as tf.Tensor1D);
      } else if (layer.kind === 'relu') {
        x = tf.relu(x);
      } else {
        x = tf.sigmoid(x);
      }
    }
    return x;
  }

  variables(): tf.Variable[] {
    const out: tf.Variable[] = [];
    for (const layer of this.layers) {
      if (layer.kind === 'tconv') out.push(layer.kernel, layer.bias);
      else if (layer.kind === 'inorm') out.push(layer.gamma, layer.beta);
    }
    return out;
  }

  /** Convert to the WGGW block layout: kernels as (in, out, 4, 4) row-major. */
  toLayerWeights(): LayerWeights[] {
    const out: LayerWeights[] = [];
    for (const layer of this.layers) {
      if (layer.kind === 'tconv') {
        const cin = layer.inChannels;
        const cout = layer.outChannels;
        const src = layer.kernel.dataSync() as Float32Array; // [di, dj, co, ci]
        const kernel = new Float32Array(cin * cout * 16);
        for (let di = 0; di < 4; di++)
          for (let dj = 0; dj < 4; dj++)
            for (let co = 0; co < cout; co++)
              for (let ci = 0; ci < cin; ci++) {
                kernel[((ci * cout + co) * 4 + di) * 4 + dj] =
                  src[((di * 4 + dj) * cout + co) * cin + ci];
              }
        out.push({
          spec: { kind: 'tconv', inChannels: cin, outChannels: cout },
          blocks: [kernel, new Float32Array(layer.bias.dataSync())],
        });
      } else if (layer.kind === 'inorm') {
        out.push({
          spec: { kind: 'inorm', channels: layer.channels },
          blocks: [
            new Float32Array(layer.gamma.dataSync()),
            new Float32Array(layer.beta.dataSync()),
          ],
        });
      } else {
        out.push({ spec: { kind: layer.kind }, blocks: [] });
      }
    }
    return out;
  }

  static fromLayerWeights(latent: [number, number], layers: LayerWeights[]): Generator {
    const widths: number[] = [];
    for (const lw of layers) {
      if (lw.spec.kind === 'tconv' && lw.spec.outChannels > 1) widths.push(lw.spec.outChannels);
    }
    const gen = new Generator({ latent, genWidths: widths, criticWidths: widths.slice().reverse() });
    for (const lw of layers) {
      const want = expectedBlockShapes(lw.spec);
      if (lw.blocks.length !== want.length || lw.blocks.some((b, i) => b.length !== want[i])) {
        throw new Error(`layer ${lw.spec.kind}: inconsistent parameter blocks`);
      }
      if (lw.spec.kind === 'tconv') {
        const { inChannels: cin, outChannels: cout } = lw.spec;
        const dst = new Float32Array(16 * cout * cin);
        for (let di = 0; di < 4; di++)
          for (let dj = 0; dj < 4; dj++)
            for (let co = 0; co < cout; co++)
              for (let ci = 0; ci < cin; ci++) {
                dst[((di * 4 + dj) * cout + co) * cin + ci] =
                  lw.blocks[0][((ci * cout + co) * 4 + di) * 4 + dj];
              }
        gen.layers.push({
          kind: 'tconv',
          kernel: tf.variable(tf.tensor4d(dst, [4, 4, cout, cin])),
          bias: tf.variable(tf.tensor1d(lw.blocks[1])),
          inChannels: cin,
          outChannels: cout,
        });
      } else if (lw.spec.kind === 'inorm') {
        gen.layers.push({
          kind: 'inorm',
          gamma: tf.variable(tf.tensor1d(lw.blocks[0])),
          beta: tf.variable(tf.tensor1d(lw.blocks[1])),
          channels: lw.spec.channels,
        });
      } else if (lw.spec.kind === 'relu' || lw.spec.kind === 'sigmoid') {
        gen.layers.push({ kind: lw.spec.kind });
      } else {
        throw new Error('leakyrelu layers are not used by this generator family');
      }
    }
    return gen;
  }
}

interface ConvLayer {
  kind: 'conv';
  kernel: tf.Variable; // [4, 4, in, out]
  bias: tf.Variable;
  normalize: boolean;
  gamma?: tf.Variable;
  beta?: tf.Variable;
}

export class Critic {
  layers: ConvLayer[] = [];

  constructor(public arch: Architecture) {}

  static createRandom(arch: Architecture, rng: Rng, scale = 0.05): Critic {
    const critic = new Critic(arch);
    const channels = [1, ...arch.criticWidths, 1];
    for (let i = 0; i < channels.length - 1; i++) {
      const cin = channels[i];
      const cout = channels[i + 1];
      const last = i === channels.length - 2;
      const data = rng.normals(16 * cin * cout).map((v) => v * scale);
      critic.layers.push({
        kind: 'conv',
        kernel: tf.variable(tf.tensor4d(data, [4, 4, cin, cout])),
        bias: tf.variable(tf.zeros([cout])),
        normalize: !last,
        gamma: last ? undefined : tf.variable(tf.ones([cout])),
        beta: last ? undefined : tf.variable(tf.zeros([cout])),
      });
    }
    return critic;
  }

  /** x: [batch, s, s, 1] -> critic values [batch]. */
  forward(x: tf.Tensor4D): tf.Tensor1D {
    let h: tf.Tensor4D = x;
    for (const [i, layer] of this.layers.entries()) {
      h = tf.add(
        tf.conv2d(h, layer.kernel as tf.Tensor4D, 2, 'same'), layer.bias,
      ) as tf.Tensor4D;
      if (i < this.layers.length - 1) {
        if (layer.normalize) {
          h = instanceNorm(h, layer.gamma as tf.Tensor1D, layer.beta as tf.Tensor1D);
        }
        h = leakyRelu(h) as tf.Tensor4D;
      }
    }
    return tf.mean(h, [1, 2, 3]) as tf.Tensor1D;
  }

  variables(): tf.Variable[] {
    const out: tf.Variable[] = [];
    for (const layer of this.layers) {
      out.push(layer.kernel, layer.bias);
      if (layer.gamma) out.push(layer.gamma, layer.beta as tf.Variable);
    }
    return out;
  }

  snapshot(): number[][] {
    return this.variables().map((v) => Array.from(v.dataSync()));
  }

  restore(data: number[][]): void {
    const vars = this.variables();
    if (data.length !== vars.length) throw new Error('critic snapshot does not match');
    vars.forEach((v, i) => v.assign(tf.tensor(data[i], v.shape as number[])));
  }
}
