"""Variance-penalized cost ranking and its stability analysis.

The ranking statistic for one model over K cross-validation folds:

* fold cost        C_k = (w_fp * FP_k + w_fn * FN_k) / N_k
* aggregate        HAP = mean_k(C_k) + lambda * var_k(C_k)

where var is the population variance (divide by K). Lower is better: the
mean term prices the asymmetric misclassification costs, the variance term
prices instability across folds.

Across N models with per-model (mu_i, var_i), the separation
S(lambda) = mean over pairs |HAP_i - HAP_j| is piecewise linear in lambda —
exactly linear up to the first rank crossover and *convex* everywhere (it
is a mean of absolute values of affine functions). The spread of HAP values
is the exact quadratic

    V(lambda) = C + D*lambda + E*lambda**2,
    C = Var(mu), D = 2*Cov(mu, var), E = Var(var)      (population moments)

and the discrimination signal-to-noise ratio is SNR = S / sqrt(V).

`fit_snr_curve` reports the lambda that maximizes SNR. On the linear
segment S = A + B*lambda, stationarity of (A + B*lambda)/sqrt(V) is linear
in lambda and gives the closed form

    lambda* = (2*B*C - A*D) / (2*A*E - B*D).

The closed form is trusted only when it is non-degenerate *and* globally
optimal on the supplied grid (S's convexity lets the exact SNR rise again
past crossover kinks and overtake any interior stationary point, so
interior stationarity alone proves nothing). Otherwise the grid argmax is
returned with the `degenerate` flag set. Quadratic-root variants of the
closed form are stationary points of S/V, not of S/sqrt(V), and are not
used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import ConfusionMatrix


@dataclass(frozen=True)
class PenaltyWeights:
    """Costs per false positive / false negative (true cells cost 0)."""

    w_fp: float = 2.0
    w_fn: float = 10.0

    def __post_init__(self):
        if not (np.isfinite(self.w_fp) and np.isfinite(self.w_fn)):
            raise ValueError("weights must be finite")
        if self.w_fp < 0 or self.w_fn < 0 or (self.w_fp == 0 and self.w_fn == 0):
            raise ValueError("weights must be >= 0 and not both zero")


@dataclass(frozen=True)
class HapResult:
    fold_costs: tuple[float, ...]
    mean_cost: float
    cost_variance: float
    lam: float
    hap: float


@dataclass(frozen=True)
class SnrCurve:
    a: float
    b: float
    c: float
    d: float
    e: float
    lambda_star: float
    snr_at_star: float
    degenerate: bool


@dataclass(frozen=True)
class SensitivityResult:
    ratios: tuple[float, ...]
    model_ids: tuple[str, ...]
    rankings: np.ndarray  # (sweep point, model) -> rank, 1 = best; ties averaged
    kendall_w: float


DEFAULT_RATIO_GRID = tuple(np.arange(1.0, 20.0001, 0.5))  # 39 points


def fold_cost(cm: ConfusionMatrix, w: PenaltyWeights) -> float:
    """Weighted misclassification cost of one fold, normalized by fold size."""
    if cm.n == 0:
        raise ValueError("empty fold")
    return (w.w_fp * cm.fp + w.w_fn * cm.fn) / cm.n


def hap_score(fold_costs, lam: float) -> HapResult:
    """Mean fold cost plus lambda times the population fold-cost variance."""
    costs = np.asarray(fold_costs, dtype=float)
    if costs.ndim != 1 or costs.size < 2:
        raise ValueError("need at least two fold costs (variance undefined otherwise)")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    mu = float(np.mean(costs))
    var = float(np.var(costs))
    return HapResult(
        fold_costs=tuple(float(c) for c in costs),
        mean_cost=mu,
        cost_variance=var,
        lam=float(lam),
        hap=mu + lam * var,
    )


def crossover_lambda(mu_i: float, var_i: float, mu_j: float, var_j: float) -> float | None:
    """Lambda at which models i and j swap rank, or None if they never do.

    The trajectories mu + lambda*var intersect at
    (mu_j - mu_i) / (var_i - var_j); only a non-negative intersection lies
    on the feasible half-line.
    """
    if var_i == var_j:
        return None
    lam = (mu_j - mu_i) / (var_i - var_j)
    return lam if lam >= 0 else None


def separation(hap_values) -> float:
    """Mean absolute pairwise gap between model HAP values."""
    v = np.asarray(hap_values, dtype=float)
    if v.size < 2:
        raise ValueError("separation needs at least two models")
    diffs = np.abs(v[:, None] - v[None, :])
    n = v.size
    return float(diffs[np.triu_indices(n, k=1)].mean())


def snr(lam: float, mus, vars) -> float:
    """Exact separation-to-spread ratio at one lambda; NaN when undefined.

    Undefined means all HAP values coincide at this lambda (zero spread) —
    e.g. two models exactly at their crossover.
    """
    mus = np.asarray(mus, dtype=float)
    vars_ = np.asarray(vars, dtype=float)
    if mus.size < 2 or mus.shape != vars_.shape:
        raise ValueError("need matching mu/var vectors with >= 2 models")
    haps = mus + lam * vars_
    spread = float(np.var(haps))
    if spread <= 0.0:
        return float("nan")
    return separation(haps) / np.sqrt(spread)


def _first_crossover(mus: np.ndarray, vars_: np.ndarray) -> float:
    xs = []
    n = mus.size
    for i in range(n):
        for j in range(i + 1, n):
            lam = crossover_lambda(mus[i], vars_[i], mus[j], vars_[j])
            if lam is not None and lam > 0:
                xs.append(lam)
    return min(xs) if xs else float("inf")


def fit_snr_curve(mus, vars, lambda_grid) -> SnrCurve:
    """Fit the SNR model and locate its maximizing lambda.

    A, B are least-squares over the exact S(lambda) on the grid segment
    before the first crossover (S is exactly linear there); C, D, E are the
    population moments of (mu, var). lambda* is the closed form from the
    module docstring when every guard below holds, else the grid argmax of
    the exact SNR with `degenerate=True`:

    * E > 0 and B > 0 (flat-variance / falling-separation ensembles have no
      interior maximum to solve for),
    * denominator 2*A*E - B*D > 0 and 0 < lambda* <= grid end,
    * the exact SNR at lambda* is concave (numeric second difference) and
      within one grid step of the grid argmax — i.e. the stationary point
      is the *global* maximum, not a local bump that a later kink overtakes.
    """
    mus = np.asarray(mus, dtype=float)
    vars_ = np.asarray(vars, dtype=float)
    grid = np.asarray(lambda_grid, dtype=float)
    if mus.size < 2 or mus.shape != vars_.shape:
        raise ValueError("need matching mu/var vectors with >= 2 models")
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda_grid must be increasing with >= 2 points")
    if grid[0] < 0:
        raise ValueError("lambda_grid must be non-negative")

    c = float(np.var(mus))
    d = float(2.0 * np.mean((mus - mus.mean()) * (vars_ - vars_.mean())))
    e = float(np.var(vars_))

    snr_on_grid = np.array([snr(l, mus, vars_) for l in grid])
    if not np.any(np.isfinite(snr_on_grid)):
        raise ValueError("SNR undefined on the entire grid (identical models)")
    # first grid point within float noise of the max: a flat curve (e.g. any
    # two-model ensemble, where SNR is identically 2) must not have its
    # argmax decided by rounding error in the last couple of ulps
    peak = float(np.nanmax(snr_on_grid))
    tol = 1e-12 * max(1.0, abs(peak))
    argmax_idx = int(np.argmax(np.nan_to_num(snr_on_grid, nan=-np.inf) >= peak - tol))
    grid_best = float(grid[argmax_idx])

    # exact-S linear segment: every grid point strictly before the first crossover
    first_x = _first_crossover(mus, vars_)
    seg = grid[grid < first_x]
    s_exact = np.array([separation(mus + l * vars_) for l in seg])
    if seg.size >= 2:
        b, a = (float(v) for v in np.polyfit(seg, s_exact, 1))
    else:
        a = float(separation(mus))
        b = 0.0  # no usable segment; forces the fallback path

    lambda_star, degenerate = grid_best, True
    if e > 0.0 and b > 0.0:
        denom = 2.0 * a * e - b * d
        if denom > 0.0:
            cand = (2.0 * b * c - a * d) / denom
            if 0.0 < cand <= grid[-1]:
                h = min(1e-4, cand / 2.0)
                g0 = snr(cand, mus, vars_)
                curv = (snr(cand + h, mus, vars_) - 2.0 * g0 + snr(cand - h, mus, vars_)) / h**2
                step = float(np.max(np.diff(grid)))
                if np.isfinite(curv) and curv < 0.0 and abs(cand - grid_best) <= step:
                    lambda_star, degenerate = float(cand), False

    return SnrCurve(
        a=a,
        b=b,
        c=c,
        d=d,
        e=e,
        lambda_star=lambda_star,
        snr_at_star=float(snr(lambda_star, mus, vars_)),
        degenerate=degenerate,
    )


def average_ranks(values) -> np.ndarray:
    """Ascending ranks, 1-based, ties receiving the average of their span."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def kendall_w(rankings: np.ndarray) -> float:
    """Kendall's coefficient of concordance with tie correction.

    rankings: (m raters, n items) matrix of 1-based (possibly averaged)
    ranks. W = 12*S / (m^2*(n^3-n) - m*sum_j T_j) with
    S = sum_i (R_i - mean R)^2 over item rank sums and
    T_j = sum over tie groups of rater j of (t^3 - t). A fully tied board
    (zero denominator) counts as perfect agreement.
    """
    r = np.asarray(rankings, dtype=float)
    if r.ndim != 2 or r.shape[0] < 2 or r.shape[1] < 2:
        raise ValueError("need >= 2 raters and >= 2 items")
    m, n = r.shape
    rank_sums = r.sum(axis=0)
    s = float(np.sum((rank_sums - rank_sums.mean()) ** 2))
    tie_term = 0.0
    for j in range(m):
        _, counts = np.unique(r[j], return_counts=True)
        tie_term += float(np.sum(counts.astype(float) ** 3 - counts))
    denom = m * m * (n**3 - n) - m * tie_term
    if denom <= 0.0:
        return 1.0
    return 12.0 * s / denom


def sensitivity_sweep(
    per_model_fold_confusions: dict[str, list[ConfusionMatrix]],
    ratio_grid=DEFAULT_RATIO_GRID,
    lam: float = 1.0,
) -> SensitivityResult:
    """Re-rank models as the fn:fp cost ratio sweeps [1, 20].

    w_fp stays fixed at 2 and w_fn = ratio * w_fp; lambda is held at the
    operating value (1.0 by default) throughout. Rankings are ascending in
    HAP (rank 1 = lowest penalty), ties averaged; concordance across the
    sweep is Kendall's W.
    """
    model_ids = tuple(sorted(per_model_fold_confusions))
    if len(model_ids) < 2:
        raise ValueError("sensitivity sweep needs >= 2 models")
    ratios = tuple(float(r) for r in ratio_grid)
    if not ratios or min(ratios) < 1.0 or max(ratios) > 20.0:
        raise ValueError("ratio grid must lie within [1, 20]")

    rankings = np.empty((len(ratios), len(model_ids)))
    for row, ratio in enumerate(ratios):
        w = PenaltyWeights(w_fp=2.0, w_fn=2.0 * ratio)
        haps = [
            hap_score([fold_cost(cm, w) for cm in per_model_fold_confusions[mid]], lam).hap
            for mid in model_ids
        ]
        rankings[row] = average_ranks(haps)

    return SensitivityResult(
        ratios=ratios,
        model_ids=model_ids,
        rankings=rankings,
        kendall_w=kendall_w(rankings),
    )
