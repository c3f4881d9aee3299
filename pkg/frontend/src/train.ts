// Training entry point: fits the toy deep-biasing LM on the synthetic
// grammar and writes a checkpoint the protocol server can load.

import { writeFileSync } from "node:fs";
import { Grammar, GrammarConfig, DEFAULT_GRAMMAR, makeTrainingSample } from "./grammar.js";
import { ModelConfig, ToyDbNnlm } from "./model.js";
import { SplitMix64 } from "./rng.js";
import { MARKER } from "./vocab.js";

export interface TrainConfig {
  seed: number;
  sentences: number;
  epochs: number;
  lr: number;
  model: Omit<ModelConfig, "d">;
  grammar: GrammarConfig;
  logEvery: number;
}

export const DEFAULT_TRAIN: TrainConfig = {
  seed: 12345,
  sentences: 3000,
  epochs: 2,
  lr: 3e-3,
  model: { de: 16, hidden: 48, dlm: 24 },
  grammar: DEFAULT_GRAMMAR,
  logEvery: 200,
};

export interface TrainResult {
  model: ToyDbNnlm;
  grammar: Grammar;
  losses: number[];
  finalLoss: number;
}

export function train(cfg: TrainConfig, log: (msg: string) => void = () => {}): TrainResult {
  const grammar = new Grammar(cfg.grammar);
  const gen = new SplitMix64(cfg.seed);
  const model = ToyDbNnlm.init({ d: grammar.vocab.size, ...cfg.model }, cfg.seed);
  const corpus = [];
  for (let i = 0; i < cfg.sentences; i++) corpus.push(makeTrainingSample(grammar, gen));

  const losses: number[] = [];
  let step = 0;
  let running = 0;
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    for (const sample of corpus) {
      model.zeroGrads();
      const loss = model.backward(sample.tokens, sample.bitsPerStep) / (sample.tokens.length + 1);
      if (!Number.isFinite(loss)) {
        throw new Error(`training diverged: non-finite loss at step ${step} (seed ${cfg.seed})`);
      }
      model.adamStep(cfg.lr);
      losses.push(loss);
      running += loss;
      step += 1;
      if (step % cfg.logEvery === 0) {
        log(`step ${step} mean-loss ${(running / cfg.logEvery).toFixed(4)}`);
        running = 0;
      }
    }
  }
  const tail = losses.slice(-100);
  return { model, grammar, losses, finalLoss: tail.reduce((a, b) => a + b, 0) / tail.length };
}

export function saveCheckpoint(path: string, result: TrainResult, cfg: TrainConfig): void {
  const payload = JSON.parse(result.model.toJSON());
  payload.grammar = cfg.grammar;
  writeFileSync(path, JSON.stringify(payload));
}

export function saveVocab(path: string, grammar: Grammar): void {
  writeFileSync(path, grammar.vocab.pieces.join("\n") + "\n");
}

function parseArgs(argv: string[]): { out: string; vocabOut: string | null; cfg: TrainConfig } {
  const cfg: TrainConfig = JSON.parse(JSON.stringify(DEFAULT_TRAIN));
  let out = "model.json";
  let vocabOut: string | null = null;
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const val = argv[i + 1];
    if (key === "--out") out = val;
    else if (key === "--vocab-out") vocabOut = val;
    else if (key === "--seed") cfg.seed = Number(val);
    else if (key === "--sentences") cfg.sentences = Number(val);
    else if (key === "--epochs") cfg.epochs = Number(val);
    else if (key === "--lr") cfg.lr = Number(val);
    else if (key === "--hidden") cfg.model.hidden = Number(val);
    else if (key === "--dlm") cfg.model.dlm = Number(val);
    else if (key === "--nstarts") cfg.grammar.nStarts = Number(val);
    else throw new Error(`unknown flag ${key}`);
  }
  return { out, vocabOut, cfg };
}

const isMain = process.argv[1]?.endsWith("train.js");
if (isMain) {
  const { out, vocabOut, cfg } = parseArgs(process.argv.slice(2));
  const result = train(cfg, (m) => console.error(m));
  saveCheckpoint(out, result, cfg);
  if (vocabOut) saveVocab(vocabOut, result.grammar);
  console.error(`final loss ${result.finalLoss.toFixed(4)}; wrote ${out}`);
}

export { MARKER };
