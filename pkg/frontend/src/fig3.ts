// Probability-vs-list-size evaluation: how the mean per-WordPiece
// probability of a rare word moves as its biasing list grows, plus the
// within-word profile (first piece vs later pieces).

import { readFileSync } from "node:fs";
import { Grammar } from "./grammar.js";
import { ToyDbNnlm } from "./model.js";
import { SplitMix64 } from "./rng.js";
import { BiasTrie, DETACHED } from "./trie.js";

export interface TrendRow {
  listSize: number; // distractor count; -1 means the word is absent
  meanPieceProb: number;
  firstPieceProb: number;
  laterPieceProb: number;
}

/** Evaluation list: the word itself plus n distractors (n = -1: absent). */
function evalList(grammar: Grammar, word: string, n: number, gen: SplitMix64): string[] {
  if (n < 0) return [];
  const pool = grammar.rarePool.filter((w) => w !== word);
  return [word].concat(gen.sample(pool, Math.min(n, pool.length)));
}

export function wordProbability(
  model: ToyDbNnlm,
  grammar: Grammar,
  word: string,
  listWords: string[],
  context: string[],
): { pieces: number[]; mean: number } {
  const vocab = grammar.vocab;
  const trie = new BiasTrie(listWords.map((w) => vocab.tokenize(w)), vocab);
  const ctxTokens = context.flatMap((w) => vocab.tokenize(w));
  const wordTokens = vocab.tokenize(word);
  const probs: number[] = [];
  const emitted = [...ctxTokens];
  let cursor = DETACHED;
  for (const t of emitted) cursor = trie.advance(cursor, t);
  for (const tok of wordTokens) {
    const bits: number[][] = [];
    let cur = DETACHED;
    bits.push(trie.activeBits(cur));
    for (const t of emitted) {
      cur = trie.advance(cur, t);
      bits.push(trie.activeBits(cur));
    }
    const logp = model.scoreDistribution(emitted, bits);
    probs.push(Math.exp(logp[tok]));
    emitted.push(tok);
  }
  return { pieces: probs, mean: probs.reduce((a, b) => a + b, 0) / probs.length };
}

export function fig3Trend(
  model: ToyDbNnlm,
  grammar: Grammar,
  words: string[],
  listSizes: number[],
  listSeed: number,
): TrendRow[] {
  const rows: TrendRow[] = [];
  for (const n of listSizes) {
    const gen = new SplitMix64(listSeed + 1000 * (n + 1));
    let mean = 0;
    let first = 0;
    let later = 0;
    let laterCount = 0;
    for (const w of words) {
      const list = evalList(grammar, w, n, gen);
      const ctx = [grammar.commons[0]];
      const { pieces, mean: m } = wordProbability(model, grammar, w, list, ctx);
      mean += m;
      first += pieces[0];
      for (let i = 1; i < pieces.length; i++) {
        later += pieces[i];
        laterCount++;
      }
    }
    rows.push({
      listSize: n,
      meanPieceProb: mean / words.length,
      firstPieceProb: first / words.length,
      laterPieceProb: laterCount ? later / laterCount : 0,
    });
  }
  return rows;
}

const isMain = process.argv[1]?.endsWith("fig3.js");
if (isMain) {
  const modelPath = process.argv[2];
  const payload = JSON.parse(readFileSync(modelPath, "utf-8"));
  const model = ToyDbNnlm.fromJSON(JSON.stringify(payload));
  const grammar = new Grammar(payload.grammar);
  const gen = new SplitMix64(7);
  const words = gen.sample(grammar.rarePool, 20);
  const rows = fig3Trend(model, grammar, words, [-1, 100, 500, 1000, 2000], 99);
  console.log("list-size  mean-piece-P  first-piece-P  later-piece-P");
  for (const r of rows) {
    const label = r.listSize < 0 ? "absent" : String(r.listSize);
    console.log(
      `${label.padStart(8)}  ${r.meanPieceProb.toFixed(5)}       ${r.firstPieceProb.toFixed(5)}        ${r.laterPieceProb.toFixed(5)}`,
    );
  }
}
