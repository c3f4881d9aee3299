// Finite-difference validation of the bias-projection gradients: central
// differences with step 1e-4 against the analytic backward pass, on the
// projection entries that actually receive gradient.

import { ToyDbNnlm } from "./model.js";

export interface GradCheckResult {
  maxRelError: number;
  checked: number;
}

export function gradientCheckBiasProjection(
  model: ToyDbNnlm,
  tokens: number[],
  bitsPerStep: number[][],
  entries = 40,
  eps = 1e-4,
  corrupt = false,
): GradCheckResult {
  model.zeroGrads();
  model.backward(tokens, bitsPerStep);
  const analytic = Float64Array.from(model.grads.wb);

  // check the largest-magnitude entries plus a few zero-gradient ones
  const idx = [...analytic.keys()].sort((a, b) => Math.abs(analytic[b]) - Math.abs(analytic[a]));
  const picks = idx.slice(0, entries).concat(idx.slice(-5));
  if (corrupt) {
    for (const i of picks.slice(0, 5)) analytic[i] += 0.1;
  }

  let maxRel = 0;
  for (const i of picks) {
    const keep = model.wb[i];
    model.wb[i] = keep + eps;
    const up = model.sequenceLoss(tokens, bitsPerStep);
    model.wb[i] = keep - eps;
    const down = model.sequenceLoss(tokens, bitsPerStep);
    model.wb[i] = keep;
    const numeric = (up - down) / (2 * eps);
    const rel = Math.abs(analytic[i] - numeric) / Math.max(Math.abs(analytic[i]) + Math.abs(numeric), 1e-2);
    if (rel > maxRel) maxRel = rel;
  }
  return { maxRelError: maxRel, checked: picks.length };
}
