// splitmix64, matching the generator the decoder-side list sampler documents:
// 64-bit state advanced by the golden-gamma constant, output mixed twice.

const MASK = (1n << 64n) - 1n;
const GAMMA = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

export function mix64(z: bigint): bigint {
  z &= MASK;
  z = ((z ^ (z >> 30n)) * MIX1) & MASK;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK;
  return z ^ (z >> 31n);
}

export class SplitMix64 {
  private state: bigint;

  constructor(seed: number | bigint) {
    this.state = BigInt(seed) & MASK;
  }

  nextU64(): bigint {
    this.state = (this.state + GAMMA) & MASK;
    return mix64(this.state);
  }

  randBelow(n: number): number {
    if (n <= 0) throw new Error("randBelow needs n >= 1");
    return Number(this.nextU64() % BigInt(n));
  }

  uniform(): number {
    return Number(this.nextU64() >> 11n) * 2 ** -53;
  }

  bernoulli(p: number): boolean {
    return this.uniform() < p;
  }

  randInt(lo: number, hi: number): number {
    return lo + this.randBelow(hi - lo + 1);
  }

  /** Uniform in (-r, r); used for weight init. */
  symmetric(r: number): number {
    return (this.uniform() * 2 - 1) * r;
  }

  sample<T>(pool: readonly T[], k: number): T[] {
    if (k > pool.length) throw new Error("sample larger than population");
    const items = pool.slice();
    for (let i = 0; i < k; i++) {
      const j = i + this.randBelow(items.length - i);
      [items[i], items[j]] = [items[j], items[i]];
    }
    return items.slice(0, k);
  }
}
