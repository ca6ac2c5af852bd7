// Batch entry point: node dist/main.js <spec.json> <clean_frames.ndt>
// The spec file holds the TrainSpec fields as plain JSON.

import * as fs from "node:fs";
import { train, TrainSpec } from "./train.js";

const [specPath, framesPath] = process.argv.slice(2);
if (!specPath || !framesPath) {
  console.error("usage: main.js <spec.json> <clean_frames.ndt>");
  process.exit(2);
}

try {
  const spec = JSON.parse(fs.readFileSync(specPath, "utf8")) as TrainSpec;
  const res = train(spec, framesPath, (epoch, v) => {
    console.log(`epoch ${epoch}: val loss ${v.toFixed(4)}`);
  });
  console.log(
    `done: final val ${res.finalValLoss.toFixed(4)} vs zero predictor ${res.zeroPredictorLoss}` +
      ` (${res.trainFrames} train / ${res.valFrames} val frames)`,
  );
  if (res.valLoss.length > 0 && res.finalValLoss >= res.zeroPredictorLoss) {
    console.error("warning: trained net does not beat the zero predictor");
    process.exit(1);
  }
} catch (e) {
  console.error(e instanceof Error ? e.message : String(e));
  process.exit(1);
}
