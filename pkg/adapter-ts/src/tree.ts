/**
 * Depth-limited regression tree with exact split search.
 *
 * The same builder serves both ensembles: gradient boosting grows trees
 * on (gradient, hessian) pairs and reads Newton leaf values sum(g)/sum(h);
 * the forest passes the raw 0/1 labels with unit hessians, which turns
 * the leaf value into the class fraction.
 */

export type TreeNode =
  | { leaf: number }
  | { feature: number; threshold: number; left: TreeNode; right: TreeNode };

export interface TreeParams {
  maxDepth: number;
  minLeaf: number;
}

interface Split {
  feature: number;
  threshold: number;
  gain: number;
  leftRows: number[];
  rightRows: number[];
}

function leafValue(rows: number[], grad: number[], hess: number[]): number {
  let g = 0;
  let h = 0;
  for (const r of rows) {
    g += grad[r];
    h += hess[r];
  }
  return h > 0 ? g / h : 0;
}

/**
 * Best single split by squared-gradient gain sum(g)^2/sum(h), the usual
 * second-order proxy for loss reduction. Ties keep the first candidate
 * (lowest feature index, then lowest threshold) so rebuilds are stable.
 */
function bestSplit(
  X: number[][],
  grad: number[],
  hess: number[],
  rows: number[],
  minLeaf: number,
): Split | null {
  let gTotal = 0;
  let hTotal = 0;
  for (const r of rows) {
    gTotal += grad[r];
    hTotal += hess[r];
  }
  const parentScore = hTotal > 0 ? (gTotal * gTotal) / hTotal : 0;
  const nFeatures = X[0].length;
  let best: Split | null = null;

  for (let f = 0; f < nFeatures; f++) {
    const order = [...rows].sort((a, b) => X[a][f] - X[b][f] || a - b);
    let gLeft = 0;
    let hLeft = 0;
    for (let i = 0; i < order.length - 1; i++) {
      gLeft += grad[order[i]];
      hLeft += hess[order[i]];
      const here = X[order[i]][f];
      const next = X[order[i + 1]][f];
      if (here === next) continue; // not a boundary between distinct values
      const nLeft = i + 1;
      const nRight = order.length - nLeft;
      if (nLeft < minLeaf || nRight < minLeaf) continue;
      const gRight = gTotal - gLeft;
      const hRight = hTotal - hLeft;
      const score =
        (hLeft > 0 ? (gLeft * gLeft) / hLeft : 0) +
        (hRight > 0 ? (gRight * gRight) / hRight : 0);
      const gain = score - parentScore;
      if (gain > 1e-12 && (best === null || gain > best.gain)) {
        best = {
          feature: f,
          threshold: (here + next) / 2,
          gain,
          leftRows: order.slice(0, nLeft),
          rightRows: order.slice(nLeft),
        };
      }
    }
  }
  return best;
}

export function buildTree(
  X: number[][],
  grad: number[],
  hess: number[],
  rows: number[],
  params: TreeParams,
  depth = 0,
): TreeNode {
  if (depth >= params.maxDepth || rows.length < 2 * params.minLeaf) {
    return { leaf: leafValue(rows, grad, hess) };
  }
  const split = bestSplit(X, grad, hess, rows, params.minLeaf);
  if (split === null) {
    return { leaf: leafValue(rows, grad, hess) };
  }
  return {
    feature: split.feature,
    threshold: split.threshold,
    left: buildTree(X, grad, hess, split.leftRows, params, depth + 1),
    right: buildTree(X, grad, hess, split.rightRows, params, depth + 1),
  };
}

export function predictTree(node: TreeNode, x: number[]): number {
  let cur = node;
  while (!("leaf" in cur)) {
    cur = x[cur.feature] <= cur.threshold ? cur.left : cur.right;
  }
  return cur.leaf;
}
