// External scorer protocol server: loads a trained checkpoint and answers
// the decoder's HELLO / BIAS / SCORE / BYE line protocol on stdio.
//
//   node dist/serve.js --model model.json [--vocab vocab.txt]
//
// Per-bias-id tries are built from the registered word lists; every SCORE
// request replays its context through the trie so each step of the forward
// pass sees the bias bits the model saw in training.

import { readFileSync } from "node:fs";
import { createInterface } from "node:readline";
import { Grammar } from "./grammar.js";
import { ToyDbNnlm } from "./model.js";
import { BiasTrie, DETACHED } from "./trie.js";
import { Vocab } from "./vocab.js";

function parseArgs(argv: string[]): { model: string; vocab: string | null } {
  let model = "";
  let vocab: string | null = null;
  for (let i = 0; i < argv.length; i += 2) {
    if (argv[i] === "--model") model = argv[i + 1];
    else if (argv[i] === "--vocab") vocab = argv[i + 1];
    else throw new Error(`unknown flag ${argv[i]}`);
  }
  if (!model) throw new Error("--model is required");
  return { model, vocab };
}

export function serve(modelPath: string, vocabPath: string | null): void {
  const payload = JSON.parse(readFileSync(modelPath, "utf-8"));
  const model = ToyDbNnlm.fromJSON(JSON.stringify(payload));
  const vocab = vocabPath
    ? Vocab.fromFile(readFileSync(vocabPath, "utf-8"))
    : new Grammar(payload.grammar).vocab;
  if (vocab.size !== model.cfg.d) {
    throw new Error(`vocab size ${vocab.size} does not match model d=${model.cfg.d}`);
  }
  const tries = new Map<string, BiasTrie>();
  const emptyTrie = new BiasTrie([], vocab);

  const rl = createInterface({ input: process.stdin, terminal: false });
  const out = (line: string) => process.stdout.write(line + "\n");

  rl.on("line", (line) => {
    const parts = line.split(" ");
    const cmd = parts[0];
    if (cmd === "HELLO") {
      const d = Number(parts[2]?.slice(2));
      if (parts[1] !== "v1" || !Number.isFinite(d)) {
        out("ERR bad handshake");
        return;
      }
      out(`OK v1 D=${model.cfg.d}`);
    } else if (cmd === "BIAS") {
      const id = parts[1];
      const words = (parts[2] ?? "").split(",").filter((w) => w.length > 0);
      try {
        tries.set(id, new BiasTrie(words.map((w) => vocab.tokenize(w)), vocab));
        out(`OK ${id}`);
      } catch (e) {
        out(`ERR ${(e as Error).message}`);
      }
    } else if (cmd === "SCORE") {
      const reqId = parts[1];
      const biasId = parts[2];
      const trie = biasId === "-" ? emptyTrie : tries.get(biasId);
      if (trie === undefined) {
        out(`ERR unknown bias id ${biasId}`);
        return;
      }
      const context = parts.slice(3).filter((p) => p.length > 0).map(Number);
      if (context.some((t) => !Number.isInteger(t) || t < 0 || t >= vocab.size)) {
        out(`ERR bad context token`);
        return;
      }
      const bits: number[][] = [];
      let cursor = DETACHED;
      bits.push(trie.activeBits(cursor));
      for (const t of context) {
        cursor = trie.advance(cursor, t);
        bits.push(trie.activeBits(cursor));
      }
      const logp = model.scoreDistribution(context, bits);
      out(`SCORES ${reqId} ${Array.from(logp).join(" ")}`);
    } else if (cmd === "BYE") {
      rl.close();
      process.exit(0);
    } else if (line.trim().length > 0) {
      out("ERR unknown command");
    }
  });
}

const isMain = process.argv[1]?.endsWith("serve.js");
if (isMain) {
  const { model, vocab } = parseArgs(process.argv.slice(2));
  serve(model, vocab);
}
