// Toy deep-biasing neural LM.
//
// Two LSTM layers over WordPiece embeddings; the biasing trie's binary
// vector is projected to a small dense vector that gets concatenated with
// every hidden layer output (after the nonlinearity, before the next layer
// and before the softmax). The projection has no bias term, so an all-zero
// bias vector contributes exactly nothing and its gradient vanishes exactly.
// Output is a softmax over the D pieces plus end-of-sequence.
//
// Everything is explicit Float64Array math with manual backprop; no
// framework, so finite-difference checks see the same arithmetic the
// training loop uses.

import { SplitMix64 } from "./rng.js";

export interface ModelConfig {
  d: number; // WordPiece vocabulary size
  de: number; // embedding dim
  hidden: number; // LSTM hidden size (both layers)
  dlm: number; // bias projection output dim
}

export const DEFAULT_CONFIG = { de: 16, hidden: 128, dlm: 32 };

function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

interface StepCache {
  input: number;
  bits: number[];
  x: Float64Array;
  b: Float64Array;
  u2: Float64Array;
  // per layer: gates and cells
  i1: Float64Array; f1: Float64Array; g1: Float64Array; o1: Float64Array;
  c1: Float64Array; hc1: Float64Array; h1: Float64Array; c1prev: Float64Array; h1prev: Float64Array;
  i2: Float64Array; f2: Float64Array; g2: Float64Array; o2: Float64Array;
  c2: Float64Array; hc2: Float64Array; h2: Float64Array; c2prev: Float64Array; h2prev: Float64Array;
  p: Float64Array;
  target: number;
}

export class ToyDbNnlm {
  cfg: ModelConfig;
  emb: Float64Array; // (d+1) x de, row d = sentence start
  w1: Float64Array; // 4h x (de + h)
  b1: Float64Array;
  w2: Float64Array; // 4h x (h + dlm + h)
  b2: Float64Array;
  wb: Float64Array; // dlm x 2d, no bias term
  wo: Float64Array; // (d+1) x (h + dlm)
  bo: Float64Array;

  grads: Record<string, Float64Array> = {};
  private adamM: Record<string, Float64Array> = {};
  private adamV: Record<string, Float64Array> = {};
  private adamT = 0;

  constructor(cfg: ModelConfig) {
    this.cfg = cfg;
    const { d, de, hidden: h, dlm } = cfg;
    this.emb = new Float64Array((d + 1) * de);
    this.w1 = new Float64Array(4 * h * (de + h));
    this.b1 = new Float64Array(4 * h);
    this.w2 = new Float64Array(4 * h * (h + dlm + h));
    this.b2 = new Float64Array(4 * h);
    this.wb = new Float64Array(dlm * 2 * d);
    this.wo = new Float64Array((d + 1) * (h + dlm));
    this.bo = new Float64Array(d + 1);
  }

  static init(cfg: ModelConfig, seed: number): ToyDbNnlm {
    const m = new ToyDbNnlm(cfg);
    const gen = new SplitMix64(seed);
    const fill = (a: Float64Array, fanIn: number) => {
      const r = 1 / Math.sqrt(fanIn);
      for (let i = 0; i < a.length; i++) a[i] = gen.symmetric(r);
    };
    const { d, de, hidden: h, dlm } = cfg;
    fill(m.emb, de);
    fill(m.w1, de + h);
    fill(m.w2, h + dlm + h);
    fill(m.wb, 64);
    fill(m.wo, h + dlm);
    // open the forget gates at the start of training
    for (let j = h; j < 2 * h; j++) {
      m.b1[j] = 1.0;
      m.b2[j] = 1.0;
    }
    return m;
  }

  params(): Record<string, Float64Array> {
    return {
      emb: this.emb,
      w1: this.w1,
      b1: this.b1,
      w2: this.w2,
      b2: this.b2,
      wb: this.wb,
      wo: this.wo,
      bo: this.bo,
    };
  }

  /** b = wb * hbias, computed over the set bits only. */
  private biasProject(bits: number[]): Float64Array {
    const { dlm, d } = this.cfg;
    const out = new Float64Array(dlm);
    const cols = 2 * d;
    for (const c of bits) {
      for (let r = 0; r < dlm; r++) out[r] += this.wb[r * cols + c];
    }
    return out;
  }

  private lstmStep(
    w: Float64Array,
    bias: Float64Array,
    h: number,
    u: Float64Array,
    hprev: Float64Array,
    cprev: Float64Array,
  ) {
    const inDim = u.length + h;
    const pre = new Float64Array(4 * h);
    for (let r = 0; r < 4 * h; r++) {
      let acc = bias[r];
      const row = r * inDim;
      for (let c = 0; c < u.length; c++) acc += w[row + c] * u[c];
      for (let c = 0; c < h; c++) acc += w[row + u.length + c] * hprev[c];
      pre[r] = acc;
    }
    const i = new Float64Array(h);
    const f = new Float64Array(h);
    const g = new Float64Array(h);
    const o = new Float64Array(h);
    const c = new Float64Array(h);
    const hc = new Float64Array(h);
    const hOut = new Float64Array(h);
    for (let j = 0; j < h; j++) {
      i[j] = sigmoid(pre[j]);
      f[j] = sigmoid(pre[h + j]);
      g[j] = Math.tanh(pre[2 * h + j]);
      o[j] = sigmoid(pre[3 * h + j]);
      c[j] = f[j] * cprev[j] + i[j] * g[j];
      hc[j] = Math.tanh(c[j]);
      hOut[j] = o[j] * hc[j];
    }
    return { i, f, g, o, c, hc, h: hOut };
  }

  /**
   * Forward over one sequence. inputs[t] is the token fed at step t (the
   * caller prepends the sentence-start id d), targets[t] the token to
   * predict, bitsPerStep[t] the active bias-vector bits at step t.
   */
  forward(inputs: number[], targets: number[], bitsPerStep: number[][]): { loss: number; caches: StepCache[] } {
    const { d, de, hidden: h, dlm } = this.cfg;
    let h1 = new Float64Array(h);
    let c1 = new Float64Array(h);
    let h2 = new Float64Array(h);
    let c2 = new Float64Array(h);
    const caches: StepCache[] = [];
    let loss = 0;
    for (let t = 0; t < inputs.length; t++) {
      const x = this.emb.subarray(inputs[t] * de, (inputs[t] + 1) * de);
      const b = this.biasProject(bitsPerStep[t]);
      const l1 = this.lstmStep(this.w1, this.b1, h, x, h1, c1);
      const u2 = new Float64Array(h + dlm);
      u2.set(l1.h, 0);
      u2.set(b, h);
      const l2 = this.lstmStep(this.w2, this.b2, h, u2, h2, c2);
      // logits over d+1 from [h2; b]
      const width = h + dlm;
      const logits = new Float64Array(d + 1);
      let maxLogit = -Infinity;
      for (let r = 0; r < d + 1; r++) {
        let acc = this.bo[r];
        const row = r * width;
        for (let c = 0; c < h; c++) acc += this.wo[row + c] * l2.h[c];
        for (let c = 0; c < dlm; c++) acc += this.wo[row + h + c] * b[c];
        logits[r] = acc;
        if (acc > maxLogit) maxLogit = acc;
      }
      let z = 0;
      for (let r = 0; r < d + 1; r++) z += Math.exp(logits[r] - maxLogit);
      const logZ = maxLogit + Math.log(z);
      const p = new Float64Array(d + 1);
      for (let r = 0; r < d + 1; r++) p[r] = Math.exp(logits[r] - logZ);
      loss -= logits[targets[t]] - logZ;

      caches.push({
        input: inputs[t],
        bits: bitsPerStep[t],
        x: Float64Array.from(x),
        b,
        u2,
        i1: l1.i, f1: l1.f, g1: l1.g, o1: l1.o, c1: l1.c, hc1: l1.hc, h1: l1.h,
        c1prev: c1, h1prev: h1,
        i2: l2.i, f2: l2.f, g2: l2.g, o2: l2.o, c2: l2.c, hc2: l2.hc, h2: l2.h,
        c2prev: c2, h2prev: h2,
        p,
        target: targets[t],
      });
      h1 = l1.h;
      c1 = l1.c;
      h2 = l2.h;
      c2 = l2.c;
    }
    return { loss, caches };
  }

  sequenceLoss(tokens: number[], bitsPerStep: number[][]): number {
    const { inputs, targets } = this.arrange(tokens);
    return this.forward(inputs, targets, bitsPerStep).loss;
  }

  /** inputs = [BOS, tokens...], targets = [tokens..., EOS]. */
  arrange(tokens: number[]): { inputs: number[]; targets: number[] } {
    const { d } = this.cfg;
    return { inputs: [d, ...tokens], targets: [...tokens, d] };
  }

  zeroGrads(): void {
    const ps = this.params();
    for (const k of Object.keys(ps)) {
      if (!this.grads[k]) this.grads[k] = new Float64Array(ps[k].length);
      else this.grads[k].fill(0);
    }
  }

  /** Accumulates gradients for one sequence; returns the loss. */
  backward(tokens: number[], bitsPerStep: number[][]): number {
    const { d, de, hidden: h, dlm } = this.cfg;
    const { inputs, targets } = this.arrange(tokens);
    const { loss, caches } = this.forward(inputs, targets, bitsPerStep);

    const g = this.grads;
    const dh1next = new Float64Array(h);
    const dc1next = new Float64Array(h);
    const dh2next = new Float64Array(h);
    const dc2next = new Float64Array(h);
    const width = h + dlm;
    const in1 = de + h;
    const in2 = h + dlm + h;

    for (let t = caches.length - 1; t >= 0; t--) {
      const s = caches[t];
      const dlogits = Float64Array.from(s.p);
      dlogits[s.target] -= 1;

      const dh2 = Float64Array.from(dh2next);
      const db = new Float64Array(dlm);
      for (let r = 0; r < d + 1; r++) {
        const dl = dlogits[r];
        if (dl === 0) continue;
        const row = r * width;
        for (let c = 0; c < h; c++) {
          g.wo[row + c] += dl * s.h2[c];
          dh2[c] += this.wo[row + c] * dl;
        }
        for (let c = 0; c < dlm; c++) {
          g.wo[row + h + c] += dl * s.b[c];
          db[c] += this.wo[row + h + c] * dl;
        }
        g.bo[r] += dl;
      }

      // layer 2 backward
      const du2 = new Float64Array(h + dlm);
      this.lstmBackward(
        this.w2, g.w2, g.b2, h, in2, s.u2, s.h2prev, s.c2prev,
        s.i2, s.f2, s.g2, s.o2, s.c2, s.hc2,
        dh2, dc2next, du2, dh2next, dc2next,
      );
      const dh1 = Float64Array.from(dh1next);
      for (let c = 0; c < h; c++) dh1[c] += du2[c];
      for (let c = 0; c < dlm; c++) db[c] += du2[h + c];

      // layer 1 backward
      const du1 = new Float64Array(de);
      this.lstmBackward(
        this.w1, g.w1, g.b1, h, in1, s.x, s.h1prev, s.c1prev,
        s.i1, s.f1, s.g1, s.o1, s.c1, s.hc1,
        dh1, dc1next, du1, dh1next, dc1next,
      );
      for (let c = 0; c < de; c++) g.emb[s.input * de + c] += du1[c];

      // bias projection: dwb[r, col] += db[r] for every set bit
      const cols = 2 * d;
      for (const col of s.bits) {
        for (let r = 0; r < dlm; r++) g.wb[r * cols + col] += db[r];
      }
    }
    return loss;
  }

  private lstmBackward(
    w: Float64Array, gw: Float64Array, gb: Float64Array,
    h: number, inDim: number,
    u: Float64Array, hprev: Float64Array, cprev: Float64Array,
    i: Float64Array, f: Float64Array, gg: Float64Array, o: Float64Array,
    c: Float64Array, hc: Float64Array,
    dh: Float64Array, dcIn: Float64Array,
    du: Float64Array, dhprevOut: Float64Array, dcprevOut: Float64Array,
  ): void {
    const dpre = new Float64Array(4 * h);
    for (let j = 0; j < h; j++) {
      const doj = dh[j] * hc[j];
      const dhcj = dh[j] * o[j];
      const dcj = dcIn[j] + dhcj * (1 - hc[j] * hc[j]);
      const dij = dcj * gg[j];
      const dgj = dcj * i[j];
      const dfj = dcj * cprev[j];
      dcprevOut[j] = dcj * f[j];
      dpre[j] = dij * i[j] * (1 - i[j]);
      dpre[h + j] = dfj * f[j] * (1 - f[j]);
      dpre[2 * h + j] = dgj * (1 - gg[j] * gg[j]);
      dpre[3 * h + j] = doj * o[j] * (1 - o[j]);
    }
    const uLen = u.length;
    dhprevOut.fill(0);
    for (let r = 0; r < 4 * h; r++) {
      const d = dpre[r];
      if (d === 0) continue;
      const row = r * inDim;
      for (let cu = 0; cu < uLen; cu++) {
        gw[row + cu] += d * u[cu];
        du[cu] += w[row + cu] * d;
      }
      for (let ch = 0; ch < h; ch++) {
        gw[row + uLen + ch] += d * hprev[ch];
        dhprevOut[ch] += w[row + uLen + ch] * d;
      }
      gb[r] += d;
    }
  }

  adamStep(lr: number): void {
    this.adamT += 1;
    const b1 = 0.9;
    const b2 = 0.999;
    const eps = 1e-8;
    const c1 = 1 - Math.pow(b1, this.adamT);
    const c2 = 1 - Math.pow(b2, this.adamT);
    const ps = this.params();
    for (const k of Object.keys(ps)) {
      const p = ps[k];
      const gr = this.grads[k];
      if (!this.adamM[k]) {
        this.adamM[k] = new Float64Array(p.length);
        this.adamV[k] = new Float64Array(p.length);
      }
      const m = this.adamM[k];
      const v = this.adamV[k];
      for (let idx = 0; idx < p.length; idx++) {
        const gi = gr[idx];
        m[idx] = b1 * m[idx] + (1 - b1) * gi;
        v[idx] = b2 * v[idx] + (1 - b2) * gi * gi;
        p[idx] -= (lr * (m[idx] / c1)) / (Math.sqrt(v[idx] / c2) + eps);
      }
    }
  }

  /** Log-probability vector over d+1 symbols for the next token. */
  scoreDistribution(context: number[], bitsPerStep: number[][]): Float64Array {
    const { d } = this.cfg;
    const inputs = [d, ...context];
    const targets = new Array(inputs.length).fill(0); // unused
    const { caches } = this.forward(inputs, targets, bitsPerStep);
    const p = caches[caches.length - 1].p;
    const out = new Float64Array(d + 1);
    for (let r = 0; r < d + 1; r++) out[r] = Math.log(p[r]);
    return out;
  }

  toJSON(): string {
    const ps = this.params();
    const payload: Record<string, unknown> = { cfg: this.cfg };
    for (const k of Object.keys(ps)) payload[k] = Array.from(ps[k]);
    return JSON.stringify(payload);
  }

  static fromJSON(text: string): ToyDbNnlm {
    const payload = JSON.parse(text);
    const m = new ToyDbNnlm(payload.cfg);
    const ps = m.params();
    for (const k of Object.keys(ps)) ps[k].set(payload[k]);
    return m;
  }
}
