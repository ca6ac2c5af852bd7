import * as path from "node:path";

import { Rng } from "../src/rng.js";
import { writeNdt } from "../src/ndt.js";
import { TrainSpec } from "../src/train.js";

/** Gaussian frames x0 ~ N(mean, std^2 I), written as a rank-3 stack. */
export function gaussianFrames(
  file: string,
  count: number,
  h: number,
  w: number,
  mean: Float64Array,
  std: number,
  seed: number,
): void {
  const rng = new Rng(seed);
  const n = h * w;
  const all = new Float64Array(count * n);
  for (let k = 0; k < count; k++) {
    for (let i = 0; i < n; i++) all[k * n + i] = mean[i] + std * rng.normal();
  }
  writeNdt(file, [count, h, w], all);
}

export function baseSpec(dir: string, over: Partial<TrainSpec> = {}): TrainSpec {
  return {
    frameHeight: 4,
    frameWidth: 4,
    layerDims: [17, 24, 24, 16],
    activation: "silu",
    scheduleKind: "variance-preserving-linear",
    totalNoiseSteps: 10,
    batchSize: 16,
    learningRate: 3e-3,
    epochs: 25,
    seed: 11,
    weightsOut: path.join(dir, "weights.ndw"),
    fixtureOut: path.join(dir, "fixture.json"),
    ...over,
  };
}
