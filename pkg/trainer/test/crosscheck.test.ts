import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { train } from "../src/train.js";
import { baseSpec, gaussianFrames } from "./helpers.js";

// Golden round trip against the consumer: the exported weight file and
// fixture must reproduce through the other implementation's forward
// pass within the agreed 1e-5. Skipped when the consumer package is
// not importable.

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "xchk-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

const REPLAY = `
import json, os, sys
import numpy as np
from nucdiff import load_weights, read_tensor
from nucdiff.diffusion import make_schedule

root, weights = sys.argv[1], sys.argv[2]
with open(os.path.join(root, "fixture.json")) as fh:
    meta = json.load(fh)
model = load_weights(weights)
sched = make_schedule("variance-preserving-linear", meta["total_noise_steps"])
x = read_tensor(os.path.join(root, meta["input"])).values
expected = read_tensor(os.path.join(root, meta["expected"])).values
got = model.predict_noise(x, meta["tau"], sched)
print(float(np.max(np.abs(got - expected))))
`;

function haveConsumer(): boolean {
  try {
    execFileSync("python3", ["-c", "import nucdiff"], { stdio: "pipe" });
    return true;
  } catch {
    return false;
  }
}

describe("cross-implementation golden test", () => {
  it.skipIf(!haveConsumer())("consumer replays the fixture within 1e-5", () => {
    const dir = fs.mkdtempSync(path.join(tmp, "run-"));
    const dataFile = path.join(dir, "frames.ndt");
    const rng16 = new Float64Array(16).fill(0.8);
    gaussianFrames(dataFile, 120, 4, 4, rng16, 0.5, 3);
    train(baseSpec(dir, { epochs: 3 }), dataFile);

    const out = execFileSync(
      "python3",
      ["-c", REPLAY, dir, path.join(dir, "weights.ndw")],
      { encoding: "utf8" },
    );
    const deviation = parseFloat(out.trim());
    console.log(`consumer forward deviation: ${deviation}`);
    expect(Number.isFinite(deviation)).toBe(true);
    expect(deviation).toBeLessThanOrEqual(1e-5);
  });
});
