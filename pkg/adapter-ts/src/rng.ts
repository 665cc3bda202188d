/**
 * Seeded 64-bit mix generator (SplitMix64). Every random choice the
 * adapter makes — bootstrap draws, tuning splits — goes through one of
 * these so a fit with the same seed is bit-for-bit repeatable.
 */

const GOLDEN = 0x9e3779b97f4a7c15n;
const MASK = (1n << 64n) - 1n;

export class SplitMix64 {
  private state: bigint;

  constructor(seed: number | bigint) {
    this.state = BigInt(seed) & MASK;
  }

  nextU64(): bigint {
    this.state = (this.state + GOLDEN) & MASK;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK;
    return z ^ (z >> 31n);
  }

  /** Uniform double in [0, 1), 53 bits of mantissa. */
  uniform(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }

  /** Integer in [0, n). */
  below(n: number): number {
    if (!Number.isInteger(n) || n <= 0) {
      throw new RangeError(`below() needs a positive integer, got ${n}`);
    }
    return Number(this.nextU64() % BigInt(n));
  }

  /** In-place Fisher-Yates shuffle. */
  shuffle<T>(items: T[]): void {
    for (let i = items.length - 1; i > 0; i--) {
      const j = this.below(i + 1);
      [items[i], items[j]] = [items[j], items[i]];
    }
  }
}
