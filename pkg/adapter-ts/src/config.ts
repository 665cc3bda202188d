/**
 * Adapter configuration: which family to run, hyperparameter overrides,
 * and the optional tuned mode that picks hyperparameters from a fixed
 * grid using only the fit data.
 */

import { z } from "zod";
import { SplitMix64 } from "./rng.js";
import {
  FOREST_DEFAULTS,
  GBM_DEFAULTS,
  GradientBoosting,
  LOGISTIC_DEFAULTS,
  LogisticRegression,
  Model,
  RandomForest,
} from "./families.js";

export const configSchema = z
  .object({
    family: z.string().default("gradient-boosting"),
    params: z.record(z.number()).default({}),
    tuned: z.boolean().default(false),
  })
  .strict();

export type AdapterConfig = z.infer<typeof configSchema>;

interface FamilySpec {
  defaults: Record<string, number>;
  make(params: Record<string, number>): Model;
  /** Fixed hyperparameter grid searched when tuned=true, in order. */
  grid: Array<Record<string, number>>;
}

function crossed(axes: Record<string, number[]>): Array<Record<string, number>> {
  let combos: Array<Record<string, number>> = [{}];
  for (const [key, values] of Object.entries(axes)) {
    combos = combos.flatMap((base) => values.map((v) => ({ ...base, [key]: v })));
  }
  return combos;
}

const FAMILIES: Record<string, FamilySpec> = {
  "gradient-boosting": {
    defaults: { ...GBM_DEFAULTS },
    make: (p) => new GradientBoosting({ ...GBM_DEFAULTS, ...p }),
    grid: crossed({ learningRate: [0.1, 0.3], maxDepth: [2, 3], rounds: [40, 80] }),
  },
  "random-forest": {
    defaults: { ...FOREST_DEFAULTS },
    make: (p) => new RandomForest({ ...FOREST_DEFAULTS, ...p }),
    grid: crossed({ trees: [50, 100], maxDepth: [4, 8] }),
  },
  logistic: {
    defaults: { ...LOGISTIC_DEFAULTS },
    make: (p) => new LogisticRegression({ ...LOGISTIC_DEFAULTS, ...p }),
    grid: crossed({ learningRate: [0.1, 0.5], l2: [1e-3, 1e-1] }),
  },
};

export function knownFamilies(): string[] {
  return Object.keys(FAMILIES);
}

/**
 * Parse and validate a raw config object. Throws with a message naming
 * the problem (unknown family, unknown hyperparameter, bad shape) so
 * the caller can surface it on the handshake reply.
 */
export function parseConfig(raw: unknown): AdapterConfig {
  const parsed = configSchema.safeParse(raw);
  if (!parsed.success) {
    const first = parsed.error.issues[0];
    const where = first.path.length > 0 ? ` at ${first.path.join(".")}` : "";
    throw new Error(`bad config${where}: ${first.message}`);
  }
  const config = parsed.data;
  const spec = FAMILIES[config.family];
  if (spec === undefined) {
    throw new Error(
      `unknown family "${config.family}" (supported: ${knownFamilies().join(", ")})`,
    );
  }
  for (const key of Object.keys(config.params)) {
    if (!(key in spec.defaults)) {
      throw new Error(`unknown hyperparameter "${key}" for family "${config.family}"`);
    }
  }
  return config;
}

function holdoutAccuracy(model: Model, X: number[][], y: number[]): number {
  const proba = model.predictProba(X);
  let hits = 0;
  for (let i = 0; i < y.length; i++) {
    if ((proba[i] >= 0.5 ? 1 : 0) === y[i]) {
      hits += 1;
    }
  }
  return hits / y.length;
}

/**
 * Build and fit a model for the given config. In tuned mode the fixed
 * grid is scored on a seeded 80/20 shuffle-split of the fit data (never
 * anything outside it), the best validation accuracy wins with ties
 * going to the earlier grid entry, and the winner is refit on all rows.
 */
export function fitConfigured(
  config: AdapterConfig,
  X: number[][],
  y: number[],
  seed: number,
): Model {
  const spec = FAMILIES[config.family];
  if (!config.tuned) {
    const model = spec.make(config.params);
    model.fit(X, y, seed);
    return model;
  }

  const n = X.length;
  let best = config.params;
  if (n >= 2) {
    const order = Array.from({ length: n }, (_, i) => i);
    new SplitMix64(seed).shuffle(order);
    const nTrain = Math.min(n - 1, Math.max(1, Math.floor(0.8 * n)));
    const trainIdx = order.slice(0, nTrain);
    const valIdx = order.slice(nTrain);
    const Xtr = trainIdx.map((i) => X[i]);
    const ytr = trainIdx.map((i) => y[i]);
    const Xva = valIdx.map((i) => X[i]);
    const yva = valIdx.map((i) => y[i]);

    let bestAcc = -1;
    for (const combo of spec.grid) {
      const candidate = { ...config.params, ...combo };
      const model = spec.make(candidate);
      model.fit(Xtr, ytr, seed);
      const acc = holdoutAccuracy(model, Xva, yva);
      if (acc > bestAcc) {
        bestAcc = acc;
        best = candidate;
      }
    }
  }

  const model = spec.make(best);
  model.fit(X, y, seed);
  return model;
}
