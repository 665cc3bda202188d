import { SplitMix64 } from "../src/rng.js";

/** Two well-separated blocks plus a noise feature; exactly learnable. */
export function separableToy(
  n: number,
  seed: number,
): { X: number[][]; y: number[] } {
  const rng = new SplitMix64(seed);
  const X: number[][] = [];
  const y: number[] = [];
  for (let i = 0; i < n; i++) {
    const label = i % 2;
    const base = label === 1 ? 1.0 : -1.0;
    X.push([base + rng.uniform() * 0.8, base + rng.uniform() * 0.8, rng.uniform()]);
    y.push(label);
  }
  return { X, y };
}

export function accuracyFromProba(proba: number[], y: number[]): number {
  let hits = 0;
  for (let i = 0; i < y.length; i++) {
    if ((proba[i] >= 0.5 ? 1 : 0) === y[i]) {
      hits += 1;
    }
  }
  return hits / y.length;
}
