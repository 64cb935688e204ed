/** WGGW generator-weights interchange format.
 *
 * Layout: magic "WGGW", uint32 version (=1), uint32 layer count; then per
 * layer a uint8 type code (0 tconv, 1 inorm, 2 relu, 3 leakyrelu,
 * 4 sigmoid), four uint32 shape fields (in, out, kH, kW; zeros where
 * unused) and the float32 parameter blocks: tconv kernels in
 * (in, out, kH, kW) row-major order then per-output-channel biases;
 * instance-norm scale then shift. Everything little-endian.
 */

import { readFileSync, writeFileSync } from 'node:fs';

export const WEIGHTS_MAGIC = 'WGGW';
export const WEIGHTS_VERSION = 1;

export type LayerSpec =
  | { kind: 'tconv'; inChannels: number; outChannels: number }
  | { kind: 'inorm'; channels: number }
  | { kind: 'relu' }
  | { kind: 'leakyrelu' }
  | { kind: 'sigmoid' };

export interface LayerWeights {
  spec: LayerSpec;
  /** tconv: [kernel(in*out*16), bias(out)]; inorm: [scale, shift]; else []. */
  blocks: Float32Array[];
}

const CODE: Record<LayerSpec['kind'], number> = {
  tconv: 0, inorm: 1, relu: 2, leakyrelu: 3, sigmoid: 4,
};

export function expectedBlockShapes(spec: LayerSpec): number[] {
  switch (spec.kind) {
    case 'tconv':
      return [spec.inChannels * spec.outChannels * 16, spec.outChannels];
    case 'inorm':
      return [spec.channels, spec.channels];
    default:
      return [];
  }
}

export function saveWeights(path: string, layers: LayerWeights[]): void {
  let size = 4 + 8;
  for (const layer of layers) {
    size += 17;
    for (const block of layer.blocks) size += 4 * block.length;
  }
  const buf = Buffer.alloc(size);
  buf.write(WEIGHTS_MAGIC, 0, 'latin1');
  buf.writeUInt32LE(WEIGHTS_VERSION, 4);
  buf.writeUInt32LE(layers.length, 8);
  let off = 12;
  for (const layer of layers) {
    const want = expectedBlockShapes(layer.spec);
    if (layer.blocks.length !== want.length
        || layer.blocks.some((b, i) => b.length !== want[i])) {
      throw new Error(`layer ${layer.spec.kind}: parameter blocks do not match`);
    }
    buf.writeUInt8(CODE[layer.spec.kind], off);
    const shape = headerShape(layer.spec);
    for (let i = 0; i < 4; i++) buf.writeUInt32LE(shape[i], off + 1 + 4 * i);
    off += 17;
    for (const block of layer.blocks) {
      for (let i = 0; i < block.length; i++) buf.writeFloatLE(block[i], off + 4 * i);
      off += 4 * block.length;
    }
  }
  writeFileSync(path, buf);
}

function headerShape(spec: LayerSpec): [number, number, number, number] {
  if (spec.kind === 'tconv') return [spec.inChannels, spec.outChannels, 4, 4];
  if (spec.kind === 'inorm') return [spec.channels, 0, 0, 0];
  return [0, 0, 0, 0];
}

export function loadWeights(path: string): LayerWeights[] {
  const buf = readFileSync(path);
  if (buf.toString('latin1', 0, 4) !== WEIGHTS_MAGIC) {
    throw new Error(`${path}: not a WGGW weights file`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== WEIGHTS_VERSION) {
    throw new Error(`${path}: unsupported WGGW version ${version}`);
  }
  const count = buf.readUInt32LE(8);
  const layers: LayerWeights[] = [];
  let off = 12;
  for (let k = 0; k < count; k++) {
    const code = buf.readUInt8(off);
    const shape = [0, 1, 2, 3].map((i) => buf.readUInt32LE(off + 1 + 4 * i));
    off += 17;
    let spec: LayerSpec;
    if (code === 0) spec = { kind: 'tconv', inChannels: shape[0], outChannels: shape[1] };
    else if (code === 1) spec = { kind: 'inorm', channels: shape[0] };
    else if (code === 2) spec = { kind: 'relu' };
    else if (code === 3) spec = { kind: 'leakyrelu' };
    else if (code === 4) spec = { kind: 'sigmoid' };
    else throw new Error(`${path}: unknown layer code ${code} at layer ${k}`);
    const blocks: Float32Array[] = [];
    for (const len of expectedBlockShapes(spec)) {
      const block = new Float32Array(len);
      for (let i = 0; i < len; i++) block[i] = buf.readFloatLE(off + 4 * i);
      off += 4 * len;
      blocks.push(block);
    }
    layers.push({ spec, blocks });
  }
  return layers;
}
