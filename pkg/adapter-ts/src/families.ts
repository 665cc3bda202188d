/**
 * The model families behind the adapter: gradient-boosted trees,
 * a bagged random forest, and a plain logistic regression.
 *
 * All three are written against the same tiny interface the protocol
 * layer consumes. No library dependencies — the trees and the solver are
 * deliberately small, deterministic implementations so a fit with the
 * same (data, seed) replays bit-for-bit.
 */

import { SplitMix64 } from "./rng.js";
import { TreeNode, buildTree, predictTree } from "./tree.js";

export interface Model {
  fit(X: number[][], y: number[], seed: number): void;
  predictProba(X: number[][]): number[];
}

function sigmoid(z: number): number {
  if (z >= 0) {
    return 1 / (1 + Math.exp(-z));
  }
  const ez = Math.exp(z);
  return ez / (1 + ez);
}

function clipProb(p: number): number {
  return Math.min(1, Math.max(0, p));
}

// ---------------------------------------------------------------------------
// gradient boosting

export interface GbmParams {
  rounds: number;
  learningRate: number;
  maxDepth: number;
  minLeaf: number;
}

export const GBM_DEFAULTS: GbmParams = {
  rounds: 60,
  learningRate: 0.3,
  maxDepth: 3,
  minLeaf: 5,
};

/**
 * Binary logistic boosting: trees are grown on the loss gradient and
 * hessian, leaves carry the Newton step, and the raw score accumulates
 * bias + learningRate * sum of trees.
 */
export class GradientBoosting implements Model {
  private trees: TreeNode[] = [];
  private bias = 0;

  constructor(private params: GbmParams) {}

  fit(X: number[][], y: number[], _seed: number): void {
    const n = X.length;
    const prior = Math.min(1 - 1e-6, Math.max(1e-6, y.reduce((a, b) => a + b, 0) / n));
    this.bias = Math.log(prior / (1 - prior));
    this.trees = [];

    const rows = Array.from({ length: n }, (_, i) => i);
    const score = new Array<number>(n).fill(this.bias);
    const grad = new Array<number>(n);
    const hess = new Array<number>(n);

    for (let m = 0; m < this.params.rounds; m++) {
      for (let i = 0; i < n; i++) {
        const p = sigmoid(score[i]);
        grad[i] = y[i] - p;
        hess[i] = Math.max(p * (1 - p), 1e-6);
      }
      const tree = buildTree(X, grad, hess, rows, {
        maxDepth: this.params.maxDepth,
        minLeaf: this.params.minLeaf,
      });
      this.trees.push(tree);
      for (let i = 0; i < n; i++) {
        score[i] += this.params.learningRate * predictTree(tree, X[i]);
      }
    }
  }

  predictProba(X: number[][]): number[] {
    return X.map((x) => {
      let score = this.bias;
      for (const tree of this.trees) {
        score += this.params.learningRate * predictTree(tree, x);
      }
      return sigmoid(score);
    });
  }
}

// ---------------------------------------------------------------------------
// random forest

export interface ForestParams {
  trees: number;
  maxDepth: number;
  minLeaf: number;
}

export const FOREST_DEFAULTS: ForestParams = {
  trees: 100,
  maxDepth: 8,
  minLeaf: 2,
};

/**
 * Bagging only (no feature subsampling): each tree fits a seeded
 * bootstrap resample of the rows directly against the 0/1 labels, so a
 * leaf is the class fraction of the rows that landed in it. The forest
 * probability is the mean over trees.
 */
export class RandomForest implements Model {
  private trees: TreeNode[] = [];

  constructor(private params: ForestParams) {}

  fit(X: number[][], y: number[], seed: number): void {
    const n = X.length;
    const rng = new SplitMix64(seed);
    const ones = new Array<number>(n).fill(1);
    this.trees = [];
    for (let t = 0; t < this.params.trees; t++) {
      const rows = Array.from({ length: n }, () => rng.below(n));
      this.trees.push(
        buildTree(X, y, ones, rows, {
          maxDepth: this.params.maxDepth,
          minLeaf: this.params.minLeaf,
        }),
      );
    }
  }

  predictProba(X: number[][]): number[] {
    return X.map((x) => {
      let total = 0;
      for (const tree of this.trees) {
        total += predictTree(tree, x);
      }
      return clipProb(total / this.trees.length);
    });
  }
}

// ---------------------------------------------------------------------------
// logistic regression

export interface LogisticParams {
  learningRate: number;
  epochs: number;
  l2: number;
}

export const LOGISTIC_DEFAULTS: LogisticParams = {
  learningRate: 0.5,
  epochs: 400,
  l2: 1e-3,
};

/** Full-batch gradient descent from zero weights; bias unregularized. */
export class LogisticRegression implements Model {
  private w: number[] = [];
  private b = 0;

  constructor(private params: LogisticParams) {}

  fit(X: number[][], y: number[], _seed: number): void {
    const n = X.length;
    const d = X[0].length;
    this.w = new Array<number>(d).fill(0);
    this.b = 0;

    for (let epoch = 0; epoch < this.params.epochs; epoch++) {
      const gw = new Array<number>(d).fill(0);
      let gb = 0;
      for (let i = 0; i < n; i++) {
        let z = this.b;
        for (let j = 0; j < d; j++) {
          z += this.w[j] * X[i][j];
        }
        const err = sigmoid(z) - y[i];
        for (let j = 0; j < d; j++) {
          gw[j] += err * X[i][j];
        }
        gb += err;
      }
      for (let j = 0; j < d; j++) {
        this.w[j] -= this.params.learningRate * (gw[j] / n + this.params.l2 * this.w[j]);
      }
      this.b -= this.params.learningRate * (gb / n);
    }
  }

  predictProba(X: number[][]): number[] {
    return X.map((x) => {
      let z = this.b;
      for (let j = 0; j < x.length; j++) {
        z += this.w[j] * x[j];
      }
      return sigmoid(z);
    });
  }
}
