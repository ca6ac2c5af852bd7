/**
 * Weight container: magic "NDW1", u32 layer count, then per layer
 * u32 in_dim, u32 out_dim, float32 weights row-major (out x in),
 * float32 biases; one trailing u8 activation code (0 relu, 1 silu).
 * Little-endian throughout. The reader validates the full grammar so a
 * freshly exported file can be checked without the consumer.
 */

import * as fs from "node:fs";

const MAGIC = "NDW1";

export type Activation = "relu" | "silu";
export const ACTIVATION_CODES: Activation[] = ["relu", "silu"];

export interface MlpParams {
  weights: Float64Array[]; // row-major out x in
  biases: Float64Array[];
  dims: number[]; // [in, hidden..., out]
  activation: Activation;
}

export function writeNdw(path: string, p: MlpParams): void {
  let size = 4 + 4;
  for (let l = 0; l < p.weights.length; l++) {
    const inDim = p.dims[l];
    const outDim = p.dims[l + 1];
    size += 8 + 4 * (inDim * outDim + outDim);
  }
  size += 1;
  const buf = Buffer.alloc(size);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(p.weights.length, 4);
  let off = 8;
  for (let l = 0; l < p.weights.length; l++) {
    const inDim = p.dims[l];
    const outDim = p.dims[l + 1];
    buf.writeUInt32LE(inDim, off);
    buf.writeUInt32LE(outDim, off + 4);
    off += 8;
    const W = p.weights[l];
    for (let i = 0; i < outDim * inDim; i++) {
      buf.writeFloatLE(W[i], off);
      off += 4;
    }
    const b = p.biases[l];
    for (let i = 0; i < outDim; i++) {
      buf.writeFloatLE(b[i], off);
      off += 4;
    }
  }
  buf.writeUInt8(ACTIVATION_CODES.indexOf(p.activation), off);
  fs.writeFileSync(path, buf);
}

export function readNdw(path: string): MlpParams {
  const buf = fs.readFileSync(path);
  if (buf.length < 4 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic, expected ${MAGIC}`);
  }
  if (buf.length < 8) throw new Error(`${path}: truncated header`);
  const count = buf.readUInt32LE(4);
  if (count < 1 || count > 1024) throw new Error(`${path}: implausible layer count ${count}`);
  let off = 8;
  const weights: Float64Array[] = [];
  const biases: Float64Array[] = [];
  const dims: number[] = [];
  let prevOut = -1;
  for (let l = 0; l < count; l++) {
    if (buf.length < off + 8) throw new Error(`${path}: layer ${l}: truncated dims`);
    const inDim = buf.readUInt32LE(off);
    const outDim = buf.readUInt32LE(off + 4);
    off += 8;
    if (inDim < 1 || outDim < 1 || inDim > 65536 || outDim > 65536) {
      throw new Error(`${path}: layer ${l}: implausible dims ${inDim}x${outDim}`);
    }
    if (prevOut >= 0 && inDim !== prevOut) {
      throw new Error(`${path}: layer ${l}: in_dim ${inDim} != previous out ${prevOut}`);
    }
    const need = 4 * (inDim * outDim + outDim);
    if (buf.length < off + need) throw new Error(`${path}: layer ${l}: truncated payload`);
    const W = new Float64Array(outDim * inDim);
    for (let i = 0; i < W.length; i++) W[i] = buf.readFloatLE(off + 4 * i);
    off += 4 * W.length;
    const b = new Float64Array(outDim);
    for (let i = 0; i < outDim; i++) b[i] = buf.readFloatLE(off + 4 * i);
    off += 4 * outDim;
    for (const v of W) if (!Number.isFinite(v)) throw new Error(`${path}: layer ${l}: non-finite weight`);
    for (const v of b) if (!Number.isFinite(v)) throw new Error(`${path}: layer ${l}: non-finite bias`);
    if (l === 0) dims.push(inDim);
    dims.push(outDim);
    weights.push(W);
    biases.push(b);
    prevOut = outDim;
  }
  if (buf.length !== off + 1) {
    throw new Error(`${path}: expected single trailing activation byte, file has ${buf.length - off}`);
  }
  const code = buf.readUInt8(off);
  if (code >= ACTIVATION_CODES.length) throw new Error(`${path}: unknown activation code ${code}`);
  return { weights, biases, dims, activation: ACTIVATION_CODES[code] };
}
