// Probability-vs-list-size acceptance: averaged over three training seeds,
// an in-list rare word scores above its unbiased probability, the advantage
// shrinks monotonically from 100 to 2000 distractors, and the first piece of
// the word stays the least confident (the within-word profile).

import { describe, expect, test } from "vitest";

import { fig3Trend, TrendRow } from "../src/fig3.js";
import { SplitMix64 } from "../src/rng.js";
import { DEFAULT_TRAIN, TrainConfig, train } from "../src/train.js";

const SEEDS = [101, 202, 303];
const SIZES = [-1, 100, 500, 1000, 2000];

function trainedTrend(seed: number): TrendRow[] {
  const cfg: TrainConfig = JSON.parse(JSON.stringify(DEFAULT_TRAIN));
  cfg.seed = seed;
  const result = train(cfg);
  const gen = new SplitMix64(7);
  const words = gen.sample(result.grammar.rarePool, 20);
  return fig3Trend(result.model, result.grammar, words, SIZES, 99);
}

describe("list-size probability trend", () => {
  test(
    "in-list beats absent, dilutes with list size, first piece lags",
    () => {
      const bySize = new Map<number, number[]>(SIZES.map((s) => [s, []]));
      let firstSum = 0;
      let laterSum = 0;
      for (const seed of SEEDS) {
        const rows = trainedTrend(seed);
        for (const r of rows) bySize.get(r.listSize)!.push(r.meanPieceProb);
        const at100 = rows.find((r) => r.listSize === 100)!;
        firstSum += at100.firstPieceProb;
        laterSum += at100.laterPieceProb;
      }
      const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
      const absent = mean(bySize.get(-1)!);
      const at100 = mean(bySize.get(100)!);
      const at2000 = mean(bySize.get(2000)!);
      expect(at100).toBeGreaterThan(absent);
      expect(at2000).toBeLessThanOrEqual(at100);
      // within-word profile: the first piece is the least confident
      expect(firstSum / SEEDS.length).toBeLessThan(laterSum / SEEDS.length);
    },
    { timeout: 870_000 },
  );
});
