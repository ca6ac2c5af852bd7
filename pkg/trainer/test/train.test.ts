import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { Mlp } from "../src/mlp.js";
import { readNdt } from "../src/ndt.js";
import { readNdw } from "../src/ndw.js";
import { Rng } from "../src/rng.js";
import { train } from "../src/train.js";
import { baseSpec, gaussianFrames } from "./helpers.js";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "train-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function freshDir(name: string): string {
  const d = path.join(tmp, name);
  fs.mkdirSync(d, { recursive: true });
  return d;
}

const MEAN = (() => {
  const rng = new Rng(99);
  const m = new Float64Array(16);
  for (let i = 0; i < 16; i++) m[i] = 1.5 * rng.normal();
  return m;
})();

function makeData(dir: string, count = 240, seed = 5): string {
  const f = path.join(dir, "frames.ndt");
  gaussianFrames(f, count, 4, 4, MEAN, 0.5, seed);
  return f;
}

describe("train", () => {
  it("beats the zero predictor on held-out frames", () => {
    const dir = freshDir("beats");
    const res = train(baseSpec(dir), makeData(dir));
    // zero predictor scores exactly n = 16 in expectation
    expect(res.zeroPredictorLoss).toBe(16);
    expect(res.valLoss).toHaveLength(25);
    expect(res.finalValLoss).toBeLessThan(13);
  });

  it("zero-epoch run still exports a valid file and fixture", () => {
    const dir = freshDir("zeroep");
    const res = train(baseSpec(dir, { epochs: 0 }), makeData(dir));
    expect(res.valLoss).toHaveLength(0);

    const params = readNdw(path.join(dir, "weights.ndw"));
    expect(params.dims).toEqual([17, 24, 24, 16]);
    expect(params.activation).toBe("silu");

    const meta = JSON.parse(fs.readFileSync(path.join(dir, "fixture.json"), "utf8"));
    expect(meta.input).toBe("input.ndt");
    expect(meta.expected).toBe("expected.ndt");
    expect(meta.total_noise_steps).toBe(10);
    expect(meta.tau).toBeGreaterThanOrEqual(1);
    expect(meta.tau).toBeLessThanOrEqual(10);

    // replay the fixture with the file's own parameters
    const input = readNdt(path.join(dir, "input.ndt"));
    const expected = readNdt(path.join(dir, "expected.ndt"));
    expect(input.dims).toEqual([4, 4]);
    expect(expected.dims).toEqual([4, 4]);
    const z = new Float64Array(17);
    z.set(input.data);
    z[16] = meta.tau / meta.total_noise_steps;
    const out = Mlp.fromParams(params).forward(z);
    for (let i = 0; i < 16; i++) {
      expect(Math.abs(out[i] - expected.data[i])).toBeLessThan(1e-6);
    }
  });

  it("is reproducible under a fixed seed", () => {
    const d1 = freshDir("rep1");
    const d2 = freshDir("rep2");
    const data = makeData(freshDir("repdata"));
    train(baseSpec(d1, { epochs: 3 }), data);
    train(baseSpec(d2, { epochs: 3 }), data);
    for (const f of ["weights.ndw", "input.ndt", "expected.ndt", "fixture.json"]) {
      const a = fs.readFileSync(path.join(d1, f));
      const b = fs.readFileSync(path.join(d2, f));
      expect(a.equals(b), f).toBe(true);
    }
    const d3 = freshDir("rep3");
    train(baseSpec(d3, { epochs: 3, seed: 12 }), data);
    const a = fs.readFileSync(path.join(d1, "weights.ndw"));
    const c = fs.readFileSync(path.join(d3, "weights.ndw"));
    expect(a.equals(c)).toBe(false);
  });

  it("aborts with a message when the loss diverges", () => {
    const dir = freshDir("diverge");
    // adam-normalized updates stay finite at merely silly rates, so
    // push the weights past float range to force a non-finite loss
    expect(() => train(baseSpec(dir, { learningRate: 1e155, epochs: 5 }), makeData(dir))).toThrow(
      /diverged/,
    );
  });

  it("rejects frames that do not match the spec size", () => {
    const dir = freshDir("size");
    const f = path.join(dir, "frames.ndt");
    gaussianFrames(f, 8, 3, 3, new Float64Array(9), 0.5, 1);
    expect(() => train(baseSpec(dir), f)).toThrow(/frames are 3x3/);
  });

  it("rejects layer dims without the time channel", () => {
    const dir = freshDir("dims");
    expect(() => train(baseSpec(dir, { layerDims: [16, 24, 16] }), makeData(dir))).toThrow(
      /pixels \+ 1/,
    );
  });
});
