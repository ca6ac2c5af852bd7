/**
 * Fully connected noise predictor, small enough that hand-rolled
 * backprop over flat Float64Arrays is the whole story. Hidden layers
 * use relu or silu, the output layer is linear. Input layout is the
 * flattened frame followed by one time channel.
 */

import { Rng } from "./rng.js";
import { Activation, MlpParams } from "./ndw.js";

function act(a: Activation, z: number): number {
  if (a === "relu") return z > 0 ? z : 0;
  return z / (1 + Math.exp(-z)); // silu
}

function actGrad(a: Activation, z: number): number {
  if (a === "relu") return z > 0 ? 1 : 0;
  const s = 1 / (1 + Math.exp(-z));
  return s * (1 + z * (1 - s));
}

export class Mlp {
  dims: number[];
  activation: Activation;
  W: Float64Array[];
  b: Float64Array[];
  private gW: Float64Array[];
  private gb: Float64Array[];
  private mW: Float64Array[];
  private vW: Float64Array[];
  private mB: Float64Array[];
  private vB: Float64Array[];
  private adamT = 0;

  constructor(dims: number[], activation: Activation, rng: Rng) {
    if (dims.length < 2) throw new Error("need at least input and output dims");
    for (const d of dims) if (d < 1) throw new Error(`bad layer dim ${d}`);
    this.dims = dims.slice();
    this.activation = activation;
    this.W = [];
    this.b = [];
    this.gW = [];
    this.gb = [];
    this.mW = [];
    this.vW = [];
    this.mB = [];
    this.vB = [];
    for (let l = 0; l + 1 < dims.length; l++) {
      const fanIn = dims[l];
      const out = dims[l + 1];
      const scale = Math.sqrt(2 / fanIn); // He, fine for both activations here
      const W = new Float64Array(out * fanIn);
      for (let i = 0; i < W.length; i++) W[i] = scale * rng.normal();
      this.W.push(W);
      this.b.push(new Float64Array(out));
      this.gW.push(new Float64Array(out * fanIn));
      this.gb.push(new Float64Array(out));
      this.mW.push(new Float64Array(out * fanIn));
      this.vW.push(new Float64Array(out * fanIn));
      this.mB.push(new Float64Array(out));
      this.vB.push(new Float64Array(out));
    }
  }

  static fromParams(p: MlpParams): Mlp {
    const m = new Mlp(p.dims, p.activation, new Rng(0));
    for (let l = 0; l < p.weights.length; l++) {
      m.W[l].set(p.weights[l]);
      m.b[l].set(p.biases[l]);
    }
    return m;
  }

  params(): MlpParams {
    return {
      weights: this.W.map((w) => w.slice()),
      biases: this.b.map((v) => v.slice()),
      dims: this.dims.slice(),
      activation: this.activation,
    };
  }

  forward(x: Float64Array): Float64Array {
    if (x.length !== this.dims[0]) {
      throw new Error(`input length ${x.length} != ${this.dims[0]}`);
    }
    let z = x;
    for (let l = 0; l < this.W.length; l++) {
      const out = this.dims[l + 1];
      const inDim = this.dims[l];
      const next = new Float64Array(out);
      const W = this.W[l];
      const b = this.b[l];
      for (let i = 0; i < out; i++) {
        let s = b[i];
        const row = i * inDim;
        for (let j = 0; j < inDim; j++) s += W[row + j] * z[j];
        next[i] = l + 1 < this.W.length ? act(this.activation, s) : s;
      }
      z = next;
    }
    return z;
  }

  zeroGrads(): void {
    for (let l = 0; l < this.W.length; l++) {
      this.gW[l].fill(0);
      this.gb[l].fill(0);
    }
  }

  /**
   * Accumulate gradients of ||pred - target||^2 (summed over output
   * components) for one sample; returns the sample loss.
   */
  accumulate(x: Float64Array, target: Float64Array): number {
    const L = this.W.length;
    // forward, keeping pre-activations and layer inputs
    const inputs: Float64Array[] = [x];
    const pres: Float64Array[] = [];
    let z = x;
    for (let l = 0; l < L; l++) {
      const out = this.dims[l + 1];
      const inDim = this.dims[l];
      const pre = new Float64Array(out);
      const W = this.W[l];
      const b = this.b[l];
      for (let i = 0; i < out; i++) {
        let s = b[i];
        const row = i * inDim;
        for (let j = 0; j < inDim; j++) s += W[row + j] * z[j];
        pre[i] = s;
      }
      pres.push(pre);
      if (l + 1 < L) {
        const a = new Float64Array(out);
        for (let i = 0; i < out; i++) a[i] = act(this.activation, pre[i]);
        inputs.push(a);
        z = a;
      }
    }
    const pred = pres[L - 1];
    let loss = 0;
    let delta = new Float64Array(pred.length);
    for (let i = 0; i < pred.length; i++) {
      const d = pred[i] - target[i];
      loss += d * d;
      delta[i] = 2 * d;
    }
    // backward
    for (let l = L - 1; l >= 0; l--) {
      const out = this.dims[l + 1];
      const inDim = this.dims[l];
      const inp = inputs[l];
      const gW = this.gW[l];
      const gb = this.gb[l];
      for (let i = 0; i < out; i++) {
        const row = i * inDim;
        const d = delta[i];
        gb[i] += d;
        for (let j = 0; j < inDim; j++) gW[row + j] += d * inp[j];
      }
      if (l > 0) {
        const W = this.W[l];
        const pre = pres[l - 1];
        const prev = new Float64Array(inDim);
        for (let j = 0; j < inDim; j++) {
          let s = 0;
          for (let i = 0; i < out; i++) s += W[i * inDim + j] * delta[i];
          prev[j] = s * actGrad(this.activation, pre[j]);
        }
        delta = prev;
      }
    }
    return loss;
  }

  /** Adam update from the accumulated gradients divided by batchSize. */
  adamStep(lr: number, batchSize: number): void {
    const b1 = 0.9;
    const b2 = 0.999;
    const eps = 1e-8;
    this.adamT += 1;
    const c1 = 1 - Math.pow(b1, this.adamT);
    const c2 = 1 - Math.pow(b2, this.adamT);
    for (let l = 0; l < this.W.length; l++) {
      const upd = (p: Float64Array, g: Float64Array, m: Float64Array, v: Float64Array) => {
        for (let i = 0; i < p.length; i++) {
          const gi = g[i] / batchSize;
          m[i] = b1 * m[i] + (1 - b1) * gi;
          v[i] = b2 * v[i] + (1 - b2) * gi * gi;
          p[i] -= (lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + eps);
        }
      };
      upd(this.W[l], this.gW[l], this.mW[l], this.vW[l]);
      upd(this.b[l], this.gb[l], this.mB[l], this.vB[l]);
    }
  }
}
