// Biasing trie over tokenized words. A query returns the dense binary bias
// vector [h_start; h_continue] of length 2D that feeds the bias projection.

import { Vocab } from "./vocab.js";

export const DETACHED = -1;

export class BiasTrie {
  children: Map<number, number>[] = [new Map()];
  endFlags: boolean[] = [false];
  readonly d: number;
  private startBits: number[] = [];

  constructor(words: number[][], readonly vocab: Vocab) {
    this.d = vocab.size;
    for (const seq of words) this.insert(seq);
    this.startBits = [...this.children[0].keys()];
  }

  private insert(seq: number[]): void {
    if (seq.length === 0) throw new Error("empty token sequence");
    let node = 0;
    for (const tok of seq) {
      let next = this.children[node].get(tok);
      if (next === undefined) {
        next = this.children.length;
        this.children.push(new Map());
        this.endFlags.push(false);
        this.children[node].set(tok, next);
      }
      node = next;
    }
    this.endFlags[node] = true;
  }

  advance(cursor: number, token: number): number {
    if (this.vocab.isStart[token]) {
      return this.children[0].get(token) ?? DETACHED;
    }
    if (cursor === DETACHED) return DETACHED;
    return this.children[cursor].get(token) ?? DETACHED;
  }

  /** Dense {0,1}^{2D} bias vector for the current cursor. */
  biasVector(cursor: number): Float64Array {
    const h = new Float64Array(2 * this.d);
    for (const p of this.startBits) h[p] = 1;
    if (cursor !== DETACHED) {
      for (const p of this.children[cursor].keys()) h[this.d + p] = 1;
    }
    return h;
  }

  /** Indices of set bits; the bias projection only touches these columns. */
  activeBits(cursor: number): number[] {
    const out = this.startBits.slice();
    if (cursor !== DETACHED) {
      for (const p of this.children[cursor].keys()) out.push(this.d + p);
    }
    return out;
  }
}

export const EMPTY_BITS: number[] = [];
