/**
 * Tensor container files: magic "NDT1", u8 rank (1..3), rank u32
 * little-endian dims, then float32 payload. Rank 3 is a frame stack
 * (frames, height, width) with each frame stored row-major.
 */

import * as fs from "node:fs";

const MAGIC = "NDT1";

export interface NdtTensor {
  dims: number[];
  data: Float64Array;
}

export function writeNdt(path: string, dims: number[], data: ArrayLike<number>): void {
  if (dims.length < 1 || dims.length > 3) {
    throw new Error(`rank ${dims.length} not supported`);
  }
  let count = 1;
  for (const d of dims) count *= d;
  if (count !== data.length) {
    throw new Error(`dims ${dims} need ${count} values, got ${data.length}`);
  }
  const buf = Buffer.alloc(4 + 1 + 4 * dims.length + 4 * count);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt8(dims.length, 4);
  let off = 5;
  for (const d of dims) {
    buf.writeUInt32LE(d, off);
    off += 4;
  }
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(data[i], off);
    off += 4;
  }
  fs.writeFileSync(path, buf);
}

export function readNdt(path: string): NdtTensor {
  const buf = fs.readFileSync(path);
  if (buf.length < 4 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic, expected ${MAGIC}`);
  }
  if (buf.length < 5) throw new Error(`${path}: truncated header`);
  const rank = buf.readUInt8(4);
  if (rank < 1 || rank > 3) throw new Error(`${path}: unsupported rank ${rank}`);
  let off = 5;
  if (buf.length < off + 4 * rank) throw new Error(`${path}: truncated dims`);
  const dims: number[] = [];
  let count = 1;
  for (let i = 0; i < rank; i++) {
    const d = buf.readUInt32LE(off);
    off += 4;
    if (d === 0) throw new Error(`${path}: zero dimension`);
    dims.push(d);
    count *= d;
  }
  if (buf.length - off !== 4 * count) {
    throw new Error(`${path}: payload is ${buf.length - off} bytes, expected ${4 * count}`);
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(off + 4 * i);
  return { dims, data };
}

/** Split a rank-3 tensor into per-frame vectors of length h*w. */
export function frameStack(t: NdtTensor): { frames: Float64Array[]; height: number; width: number } {
  if (t.dims.length !== 3) {
    throw new Error(`expected a rank-3 frame stack, got rank ${t.dims.length}`);
  }
  const [p, h, w] = t.dims;
  const n = h * w;
  const frames: Float64Array[] = [];
  for (let k = 0; k < p; k++) frames.push(t.data.slice(k * n, (k + 1) * n));
  return { frames, height: h, width: w };
}
