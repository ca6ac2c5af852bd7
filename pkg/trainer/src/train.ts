/**
 * Training entry point. Reads a stack of clean frames, fits the noise
 * predictor by denoising score matching, then writes the weight file
 * and a golden fixture (noisy input frame, noise level, expected
 * prediction) that the consumer can replay against its own forward
 * pass.
 *
 * The objective per sample is ||eps - net(alpha_tau x0 + sigma_tau eps,
 * tau)||^2 summed over pixels, so predicting zero scores exactly n (the
 * pixel count) in expectation. That is the bar a trained net has to
 * beat on held-out frames.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Rng } from "./rng.js";
import { frameStack, readNdt, writeNdt } from "./ndt.js";
import { MlpParams, writeNdw, Activation } from "./ndw.js";
import { Mlp } from "./mlp.js";
import { makeSchedule, ScheduleKind } from "./schedule.js";

export interface TrainSpec {
  frameHeight: number;
  frameWidth: number;
  layerDims: number[];
  activation: Activation;
  scheduleKind: ScheduleKind;
  totalNoiseSteps: number;
  batchSize: number;
  learningRate: number;
  epochs: number;
  seed: number;
  weightsOut: string;
  fixtureOut: string; // fixture json path; tensors land next to it
}

export interface TrainResult {
  valLoss: number[]; // one entry per epoch; empty when epochs == 0
  finalValLoss: number;
  zeroPredictorLoss: number; // = pixel count
  trainFrames: number;
  valFrames: number;
}

export type EpochHook = (epoch: number, valLoss: number, net: Mlp) => void;

function checkSpec(spec: TrainSpec): void {
  const n = spec.frameHeight * spec.frameWidth;
  if (spec.frameHeight < 1 || spec.frameWidth < 1) throw new Error("bad frame size");
  if (spec.layerDims.length < 2) throw new Error("layerDims needs input and output");
  if (spec.layerDims[0] !== n + 1) {
    throw new Error(
      `layerDims[0] must be pixels + 1 time channel = ${n + 1}, got ${spec.layerDims[0]}`,
    );
  }
  if (spec.layerDims[spec.layerDims.length - 1] !== n) {
    throw new Error(`last layer dim must equal pixel count ${n}, got ${spec.layerDims[spec.layerDims.length - 1]}`);
  }
  if (spec.batchSize < 1) throw new Error("batchSize must be positive");
  if (spec.learningRate <= 0) throw new Error("learningRate must be positive");
  if (spec.epochs < 0) throw new Error("epochs must be >= 0");
  if (spec.totalNoiseSteps < 1) throw new Error("totalNoiseSteps must be positive");
}

/** f32 round trip, so fixture outputs reflect what the file stores. */
function throughF32(p: MlpParams): MlpParams {
  const f = (a: Float64Array) => Float64Array.from(Float32Array.from(a));
  return {
    weights: p.weights.map(f),
    biases: p.biases.map(f),
    dims: p.dims.slice(),
    activation: p.activation,
  };
}

export function train(spec: TrainSpec, cleanFramesPath: string, onEpoch?: EpochHook): TrainResult {
  checkSpec(spec);
  const stack = frameStack(readNdt(cleanFramesPath));
  if (stack.height !== spec.frameHeight || stack.width !== spec.frameWidth) {
    throw new Error(
      `frames are ${stack.height}x${stack.width}, spec says ${spec.frameHeight}x${spec.frameWidth}`,
    );
  }
  const frames = stack.frames;
  const n = spec.frameHeight * spec.frameWidth;
  const sched = makeSchedule(spec.scheduleKind, spec.totalNoiseSteps);
  const rng = new Rng(spec.seed);
  const net = new Mlp(spec.layerDims, spec.activation, rng);

  // held-out split; tiny inputs fall back to validating on the train set
  const order = frames.map((_, i) => i);
  rng.shuffle(order);
  const valCount = Math.max(1, Math.floor(frames.length / 5));
  const valIdx = frames.length >= 2 ? order.slice(0, valCount) : order.slice();
  const trainIdx = frames.length >= 2 ? order.slice(valCount) : order.slice();

  // frozen validation draws, so epoch numbers are comparable
  const VAL_DRAWS = 8;
  const valSamples: Array<{ x: Float64Array; eps: Float64Array }> = [];
  for (const fi of valIdx) {
    for (let k = 0; k < VAL_DRAWS; k++) {
      const tau = 1 + rng.int(sched.totalSteps);
      const eps = rng.normals(n);
      const x = new Float64Array(n + 1);
      for (let i = 0; i < n; i++) x[i] = sched.alpha[tau] * frames[fi][i] + sched.sigma[tau] * eps[i];
      x[n] = tau / sched.totalSteps;
      valSamples.push({ x, eps });
    }
  }

  const valLoss = (): number => {
    let total = 0;
    for (const s of valSamples) {
      const pred = net.forward(s.x);
      for (let i = 0; i < n; i++) {
        const d = pred[i] - s.eps[i];
        total += d * d;
      }
    }
    return total / valSamples.length;
  };

  const history: number[] = [];
  const input = new Float64Array(n + 1);
  for (let epoch = 0; epoch < spec.epochs; epoch++) {
    rng.shuffle(trainIdx);
    for (let start = 0; start < trainIdx.length; start += spec.batchSize) {
      const batch = trainIdx.slice(start, start + spec.batchSize);
      net.zeroGrads();
      let batchLoss = 0;
      for (const fi of batch) {
        const tau = 1 + rng.int(sched.totalSteps);
        const eps = rng.normals(n);
        for (let i = 0; i < n; i++) {
          input[i] = sched.alpha[tau] * frames[fi][i] + sched.sigma[tau] * eps[i];
        }
        input[n] = tau / sched.totalSteps;
        batchLoss += net.accumulate(input, eps);
      }
      if (!Number.isFinite(batchLoss)) {
        throw new Error(`training diverged: loss is not finite at epoch ${epoch}`);
      }
      net.adamStep(spec.learningRate, batch.length);
    }
    const v = valLoss();
    history.push(v);
    if (onEpoch) onEpoch(epoch, v, net);
  }

  const finalVal = history.length > 0 ? history[history.length - 1] : valLoss();

  // export at file precision and build the fixture from the same params
  const stored = throughF32(net.params());
  fs.mkdirSync(path.dirname(path.resolve(spec.weightsOut)), { recursive: true });
  writeNdw(spec.weightsOut, stored);

  const fixDir = path.dirname(path.resolve(spec.fixtureOut));
  fs.mkdirSync(fixDir, { recursive: true });
  const tau = Math.max(1, Math.round(sched.totalSteps / 2));
  const src = frames[valIdx[0]];
  const eps = rng.normals(n);
  const noisy = new Float64Array(n);
  for (let i = 0; i < n; i++) noisy[i] = sched.alpha[tau] * src[i] + sched.sigma[tau] * eps[i];
  // the f32 cast happens on write; recompute the forward from values as stored
  const storedNoisy = Float64Array.from(Float32Array.from(noisy));
  const fixIn = new Float64Array(n + 1);
  fixIn.set(storedNoisy);
  fixIn[n] = tau / sched.totalSteps;
  const expected = Mlp.fromParams(stored).forward(fixIn);

  writeNdt(path.join(fixDir, "input.ndt"), [spec.frameHeight, spec.frameWidth], storedNoisy);
  writeNdt(path.join(fixDir, "expected.ndt"), [spec.frameHeight, spec.frameWidth], expected);
  fs.writeFileSync(
    spec.fixtureOut,
    JSON.stringify(
      {
        input: "input.ndt",
        tau,
        total_noise_steps: sched.totalSteps,
        expected: "expected.ndt",
      },
      null,
      2,
    ) + "\n",
  );

  return {
    valLoss: history,
    finalValLoss: finalVal,
    zeroPredictorLoss: n,
    trainFrames: trainIdx.length,
    valFrames: valIdx.length,
  };
}
