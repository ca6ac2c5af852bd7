// Variance preserving noise schedules, indexed 0..T with alpha[0] = 1
// and sigma[0] = 0. Linear: beta ramps from 0.1/T to 20/T so the
// endpoint corruption does not depend on T. Cosine: squared-cosine
// cumulative signal with the 0.008 offset.

export interface Schedule {
  totalSteps: number;
  alpha: Float64Array;
  sigma: Float64Array;
}

export type ScheduleKind = "variance-preserving-linear" | "variance-preserving-cosine";

export function makeSchedule(kind: ScheduleKind, steps: number): Schedule {
  if (steps < 1) throw new Error("steps must be positive");
  const abar = new Float64Array(steps);
  if (kind === "variance-preserving-linear") {
    let prod = 1;
    for (let i = 0; i < steps; i++) {
      const frac = steps === 1 ? 0 : i / (steps - 1);
      let beta = 0.1 / steps + (20.0 / steps - 0.1 / steps) * frac;
      beta = Math.min(Math.max(beta, 1e-8), 0.999);
      prod *= 1 - beta;
      abar[i] = prod;
    }
  } else if (kind === "variance-preserving-cosine") {
    const s = 0.008;
    const f0 = Math.cos((s / (1 + s)) * (Math.PI / 2)) ** 2;
    let lo = 1;
    for (let i = 0; i < steps; i++) {
      const t = (i + 1) / steps;
      const f = Math.cos(((t + s) / (1 + s)) * (Math.PI / 2)) ** 2;
      let v = Math.min(Math.max(f / f0, 1e-12), 1 - 1e-12);
      lo = Math.min(lo, v);
      abar[i] = lo;
    }
  } else {
    throw new Error(`unknown schedule kind ${kind}`);
  }
  const alpha = new Float64Array(steps + 1);
  const sigma = new Float64Array(steps + 1);
  alpha[0] = 1;
  sigma[0] = 0;
  for (let i = 0; i < steps; i++) {
    alpha[i + 1] = Math.sqrt(abar[i]);
    sigma[i + 1] = Math.sqrt(1 - abar[i]);
  }
  return { totalSteps: steps, alpha, sigma };
}
