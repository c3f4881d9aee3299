// Synthetic grammar: short sentences of common filler words with a rare-word
// slot, so rare-word probabilities are controllable and the biasing trend is
// observable without any real corpus. Rare words are two pieces, sharing a
// limited set of start and continuation pieces; biasing lists therefore get
// denser (and the per-word signal weaker) as they grow.

import { SplitMix64 } from "./rng.js";
import { BiasTrie, DETACHED } from "./trie.js";
import { MARKER, Vocab } from "./vocab.js";

export interface GrammarConfig {
  nStarts: number; // rare-word start pieces
  nConts: number; // rare-word continuation pieces
  nCommons: number; // single-piece filler words
  rareSlotProb: number; // fraction of sentences with a rare-word slot
}

export const DEFAULT_GRAMMAR: GrammarConfig = {
  nStarts: 600,
  nConts: 8,
  nCommons: 12,
  rareSlotProb: 0.8,
};

export class Grammar {
  readonly vocab: Vocab;
  readonly commons: string[];
  readonly rarePool: string[];

  constructor(readonly cfg: GrammarConfig = DEFAULT_GRAMMAR) {
    this.commons = [];
    for (let i = 0; i < cfg.nCommons; i++) {
      this.commons.push("c" + String.fromCharCode(97 + (i % 26)) + (i >= 26 ? String(i) : ""));
    }
    const pieces: string[] = this.commons.map((w) => MARKER + w);
    for (let i = 0; i < cfg.nStarts; i++) pieces.push(MARKER + `r${String(i).padStart(3, "0")}`);
    for (let j = 0; j < cfg.nConts; j++) pieces.push(`k${j}`);
    this.vocab = new Vocab(pieces);
    this.rarePool = [];
    for (let i = 0; i < cfg.nStarts; i++) {
      for (let j = 0; j < cfg.nConts; j++) {
        this.rarePool.push(`r${String(i).padStart(3, "0")}k${j}`);
      }
    }
  }

  /** One sentence as words; rare slot words are drawn from the pool. */
  sentence(gen: SplitMix64): { words: string[]; rare: string | null } {
    const a = this.commons[gen.randBelow(this.commons.length)];
    const b = this.commons[gen.randBelow(this.commons.length)];
    if (gen.uniform() < this.cfg.rareSlotProb) {
      const rare = this.rarePool[gen.randBelow(this.rarePool.length)];
      return { words: [a, rare, b], rare };
    }
    return { words: [a, b], rare: null };
  }
}

export interface TrainingSample {
  tokens: number[];
  bitsPerStep: number[][];
  zeroed: boolean;
}

export const DISTRACTOR_RANGE: [number, number] = [400, 800];
export const KEEP_PROB = 0.6;
export const ZERO_PROB = 0.1;

/**
 * Training-time biasing list with the decoder-side augmentation semantics:
 * 400..800 distractors (uniform), each rare reference word kept with
 * probability 0.6, whole bias vector zeroed with probability 0.1.
 */
export function sampleTrainingList(
  grammar: Grammar,
  rare: string | null,
  gen: SplitMix64,
): { words: string[]; zeroed: boolean; keptReference: string[] } {
  const n = gen.randInt(DISTRACTOR_RANGE[0], DISTRACTOR_RANGE[1]);
  const zeroed = gen.bernoulli(ZERO_PROB);
  const kept: string[] = [];
  if (rare !== null && gen.bernoulli(KEEP_PROB)) kept.push(rare);
  const pool = grammar.rarePool.filter((w) => !kept.includes(w));
  const distractors = gen.sample(pool, Math.min(n, pool.length));
  return { words: kept.concat(distractors), zeroed, keptReference: kept };
}

/** Per-step active bias bits for a token sequence under a trie. */
export function bitsForSequence(trie: BiasTrie, tokens: number[]): number[][] {
  const out: number[][] = [];
  let cursor = DETACHED;
  // one entry per prediction step: bits before each token, plus one more
  // for the end-of-sequence prediction
  for (let t = 0; t <= tokens.length; t++) {
    out.push(trie.activeBits(cursor));
    if (t < tokens.length) cursor = trie.advance(cursor, tokens[t]);
  }
  return out;
}

export function makeTrainingSample(grammar: Grammar, gen: SplitMix64): TrainingSample {
  const { words, rare } = grammar.sentence(gen);
  const tokens = words.flatMap((w) => grammar.vocab.tokenize(w));
  const list = sampleTrainingList(grammar, rare, gen);
  if (list.zeroed) {
    const empty: number[][] = [];
    for (let t = 0; t <= tokens.length; t++) empty.push([]);
    return { tokens, bitsPerStep: empty, zeroed: true };
  }
  const trie = new BiasTrie(list.words.map((w) => grammar.vocab.tokenize(w)), grammar.vocab);
  return { tokens, bitsPerStep: bitsForSequence(trie, tokens), zeroed: false };
}
