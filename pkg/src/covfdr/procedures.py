"""Multiple-testing procedures: Bonferroni, BH, Storey, weighted BH, naive IHW, Boca-Leek.

Every procedure returns vectors in input order; sorting is internal only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import CovariateMatrix, DiscoveryResult, HypothesisSet, ValidationError
from .numerics import logistic_fit

STOREY_LAMBDAS = tuple(np.round(np.arange(0.05, 0.901, 0.05), 2))
BOCA_LEEK_LAMBDAS = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))


@dataclass(frozen=True)
class IhwConfig:
    n_groups: int = 5
    weight_grid_step: float = 0.25
    max_weight: float = 5.0
    alpha: float = 0.05

    def __post_init__(self):
        if self.n_groups < 1:
            raise ValidationError("n_groups must be >= 1")
        if self.weight_grid_step <= 0 or self.max_weight <= 0:
            raise ValidationError("weight grid step and max weight must be positive")
        levels = self.max_weight / self.weight_grid_step
        if abs(levels - round(levels)) > 1e-9:
            raise ValidationError("weight_grid_step must divide max_weight")
        _check_alpha(self.alpha)

    @property
    def levels(self) -> int:
        return int(round(self.max_weight / self.weight_grid_step))


@dataclass(frozen=True)
class BocaLeekConfig:
    lambda_grid: tuple = BOCA_LEEK_LAMBDAS
    smoothing_degree: int = 3
    alpha: float = 0.05

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float)
        _check_lambdas(grid)
        if self.smoothing_degree < 0:
            raise ValidationError("smoothing degree must be >= 0")
        _check_alpha(self.alpha)
        object.__setattr__(self, "lambda_grid", tuple(grid.tolist()))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


def _check_lambdas(grid):
    if grid.size == 0:
        raise ValidationError("lambda grid is empty")
    if ((grid <= 0) | (grid >= 1)).any():
        raise ValidationError("lambda values must lie in (0, 1)")
    if (np.diff(grid) <= 0).any():
        raise ValidationError("lambda grid must be strictly increasing")


def _pvals(h) -> np.ndarray:
    return h.p_values if isinstance(h, HypothesisSet) else HypothesisSet(h).p_values


# ------------------------------------------------------------- baselines ----

def bonferroni(h, alpha: float = 0.05) -> DiscoveryResult:
    _check_alpha(alpha)
    p = _pvals(h)
    m = p.size
    rejected = p <= alpha / m if m else np.zeros(0, bool)
    return DiscoveryResult(rejected, np.minimum(1.0, m * p), alpha, "bonferroni")


def bh_adjust(p: np.ndarray) -> np.ndarray:
    """Monotone BH-adjusted p-values (running min from the largest rank)."""
    m = p.size
    if m == 0:
        return np.zeros(0)
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    ranked = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(ranked, 1.0)
    return out


def _step_up_count(q: np.ndarray, alpha: float) -> int:
    m = q.size
    if m == 0:
        return 0
    qs = np.sort(q)
    ok = np.flatnonzero(qs <= np.arange(1, m + 1) * alpha / m)
    return int(ok[-1] + 1) if ok.size else 0


def _step_up(q: np.ndarray, alpha: float) -> np.ndarray:
    k = _step_up_count(q, alpha)
    if k == 0:
        return np.zeros(q.size, bool)
    return q <= np.sort(q)[k - 1]


def bh(h, alpha: float = 0.05) -> DiscoveryResult:
    """Benjamini-Hochberg step-up at level ``alpha``."""
    _check_alpha(alpha)
    p = _pvals(h)
    return DiscoveryResult(_step_up(p, alpha), bh_adjust(p), alpha, "bh")


def weighted_bh(h, weights, alpha: float = 0.05) -> DiscoveryResult:
    """BH applied to p_i / w_i; zero weights can never be rejected.

    Weights must average to one (the budget constraint).
    """
    _check_alpha(alpha)
    p = _pvals(h)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != p.shape:
        raise ValidationError(f"{w.size} weights for {p.size} hypotheses")
    if (w < 0).any() or not np.isfinite(w).all():
        raise ValidationError("weights must be finite and nonnegative")
    if p.size and abs(w.mean() - 1.0) > 1e-9:
        raise ValidationError(f"weights must average to 1 (mean is {w.mean():.12g})")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = np.where(w > 0, p / np.where(w > 0, w, 1.0), np.inf)
    adjusted = bh_adjust(np.minimum(q, 1.0)) if p.size else np.zeros(0)
    return DiscoveryResult(_step_up(q, alpha), adjusted, alpha, "weighted_bh",
                           {"weights": w})


# ---------------------------------------------------------------- Storey ----

def _smooth_at_end(lambdas: np.ndarray, values: np.ndarray, degree: int) -> np.ndarray:
    """Least-squares polynomial in lambda, evaluated at the largest lambda.

    ``values`` is (n_lambda,) or (n_lambda, n_series); all series share one
    pseudo-inverse of the Vandermonde matrix.
    """
    deg = min(degree, lambdas.size - 1)
    V = np.vander(lambdas, deg + 1)
    coef = np.linalg.pinv(V) @ values
    return np.vander(lambdas[-1:], deg + 1) @ coef


def storey_pi0(h, lambda_grid=STOREY_LAMBDAS, degree: int = 3) -> float:
    """Storey estimate of the null proportion.

    A single-point grid gives the fixed-lambda estimate without smoothing.
    The result is clamped to [1/m, 1].
    """
    p = _pvals(h)
    grid = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    _check_lambdas(grid)
    m = p.size
    if m == 0:
        return 1.0
    raw = np.array([(p > lam).sum() / (m * (1.0 - lam)) for lam in grid])
    est = raw[0] if grid.size == 1 else float(_smooth_at_end(grid, raw, degree)[0])
    return float(np.clip(est, 1.0 / m, 1.0))


def storey_qvalues(h, alpha: float = 0.05, lambda_grid=STOREY_LAMBDAS) -> DiscoveryResult:
    _check_alpha(alpha)
    p = _pvals(h)
    pi0 = storey_pi0(p, lambda_grid) if p.size else 1.0
    q = np.clip(pi0 * bh_adjust(p), 0.0, 1.0)
    return DiscoveryResult(q <= alpha, q, alpha, "storey", {"pi0": pi0})


# ------------------------------------------------------------ naive IHW ----

def quantile_groups(covariate, n_groups: int):
    """Assign hypotheses to covariate quantile bins.

    Values equal to a bin boundary go to the lower bin and empty bins are
    dropped, so the returned labels are 0..G_eff-1 with every group nonempty.
    Returns (labels, boundaries of the surviving bins).
    """
    x = np.asarray(covariate, dtype=float).ravel()
    if not np.isfinite(x).all():
        raise ValidationError("covariate must be finite")
    if n_groups > max(x.size, 1):
        raise ValidationError(f"n_groups={n_groups} exceeds m={x.size}")
    if x.size == 0:
        return np.zeros(0, np.int64), np.zeros(0)
    cuts = np.quantile(x, np.arange(1, n_groups) / n_groups)
    raw = np.searchsorted(cuts, x, side="left")
    used, labels = np.unique(raw, return_inverse=True)
    upper = np.append(cuts, np.inf)[used]
    return labels.astype(np.int64), upper[:-1]


def ihw_candidates(n_groups: int, cfg: IhwConfig) -> np.ndarray:
    """The raw weight grid {0, step, ..., max_weight}^G without the zero vector.

    Each row becomes a candidate after rescaling to the size-weighted budget.
    Meant for small G (exhaustive checks); :func:`ihw_naive` never builds it.
    """
    levels = np.arange(cfg.levels + 1)
    grid = np.stack(np.meshgrid(*([levels] * n_groups), indexing="ij"), -1)
    return grid.reshape(-1, n_groups)[1:] * cfg.weight_grid_step


@lru_cache(maxsize=512)
def _class_levels(total: int, parts: int, cap: int) -> np.ndarray:
    """Integer vectors in [0, cap]^parts summing to ``total``, lexicographic order."""
    rows = np.zeros((1, 0), dtype=np.int64)
    for g in range(parts):
        left = cap * (parts - g - 1)
        v = np.arange(cap + 1)
        acc = rows.sum(axis=1)
        ok = (acc[:, None] + v[None, :] <= total) & (acc[:, None] + v[None, :] + left >= total)
        i, j = np.nonzero(ok)
        rows = np.hstack([rows[i], v[j][:, None]])
    rows.flags.writeable = False
    return rows


def _level_weights(levels: np.ndarray, sizes: np.ndarray, m: int) -> np.ndarray:
    """Integer grid levels -> weights with sum_g n_g w_g = m."""
    S = levels @ sizes
    return (m * levels) / S[..., None]


def _count_scaled(sorted_p: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
    """#{i : p_i / u <= t} for each weight in ``u``, matching weighted_bh's test.

    A first guess from p <= u * t is nudged by the few entries where the two
    floating-point comparisons disagree. Zero weights never reject.
    """
    n = sorted_p.size
    idx = np.searchsorted(sorted_p, u * t, side="right")
    pos = u > 0
    safe_u = np.where(pos, u, 1.0)
    while True:
        up = pos & (idx < n)
        up[up] = sorted_p[idx[up]] / safe_u[up] <= t
        down = pos & (idx > 0)
        down[down] = sorted_p[idx[down] - 1] / safe_u[down] > t
        if not (up.any() or down.any()):
            break
        idx = idx + up - down
    return np.where(pos, idx, 0)


class _WeightSearch:
    """Exact maximisation of weighted-BH rejection counts over the weight grid.

    A grid vector v of integer levels gives weights m v_g / S(v), where
    S(v) = sum_g n_g v_g. Groups of the most common size ("major") are handled
    by a max-plus dynamic programme over their level sum K; the levels of the
    remaining groups are enumerated. Each key (odd levels, K) fixes S, so the
    programme returns the exact best count per key.
    """

    NEG = -(1 << 40)

    def __init__(self, p, labels, G, cap):
        self.G, self.cap = G, cap
        self.sorted = [np.sort(p[labels == g]) for g in range(G)]
        self.sizes = np.array([s.size for s in self.sorted], dtype=np.int64)
        self.m = int(self.sizes.sum())
        vals, freq = np.unique(self.sizes, return_counts=True)
        s0 = vals[np.argmax(freq)]
        self.major = np.flatnonzero(self.sizes == s0)
        self.odd = np.flatnonzero(self.sizes != s0)
        width = self.major.size * cap + 1
        odd_levels = np.zeros((1, 0), dtype=np.int64)
        if self.odd.size:
            grids = np.meshgrid(*([np.arange(cap + 1)] * self.odd.size), indexing="ij")
            odd_levels = np.stack(grids, -1).reshape(-1, self.odd.size)
        key_odd = np.repeat(odd_levels, width, axis=0)
        key_K = np.tile(np.arange(width), odd_levels.shape[0])
        S = s0 * key_K + key_odd @ self.sizes[self.odd]
        keep = S > 0  # the all-zero vector is not a candidate
        self.key_odd, self.key_K, self.S = key_odd[keep], key_K[keep], S[keep]
        self.width = width
        # normaliser grid used to bracket keys (see key_bounds)
        uniq = np.unique(self.S)
        step = max(1, uniq.size // 1024)
        self.grid = np.unique(np.append(uniq[::step], uniq[-1]))
        self.grid_lo = np.searchsorted(self.grid, self.S, side="right") - 1
        self.grid_hi = np.searchsorted(self.grid, self.S, side="left")

    def count(self, W, t):
        """Rejections at threshold t for each row of group weights W."""
        total = np.zeros(W.shape[0], dtype=np.int64)
        for g in range(self.G):
            u, inv = np.unique(W[:, g], return_inverse=True)
            total += _count_scaled(self.sorted[g], u, t)[inv.ravel()]
        return total

    def _major_best(self, S, t):
        """(len(S), width) table: best major-group count for each level sum K."""
        n = S.size
        v = np.arange(self.cap + 1)
        u = ((self.m * v)[None, :] / S[:, None]).ravel()
        best = np.full((n, self.width), self.NEG, dtype=np.int64)
        best[:, 0] = 0
        for g in self.major:
            val = _count_scaled(self.sorted[g], u, t).reshape(n, -1)
            new = np.full_like(best, self.NEG)
            for lv in range(self.cap + 1):
                np.maximum(new[:, lv:], best[:, :self.width - lv] + val[:, lv:lv + 1],
                           out=new[:, lv:])
            best = new
        return best

    def _odd_part(self, t):
        total = np.zeros(self.S.size, dtype=np.int64)
        for j, g in enumerate(self.odd):
            u, inv = np.unique((self.m * self.key_odd[:, j]) / self.S, return_inverse=True)
            total += _count_scaled(self.sorted[g], u, t)[inv.ravel()]
        return total

    def _exact(self, idx, t, odd):
        table = self._major_best(self.S[idx], t)
        return odd[idx] + table[np.arange(idx.size), self.key_K[idx]]

    def key_bounds(self, t):
        """Lower and upper bounds on the best count within each key.

        Counts only fall as S grows, so the major-group programme evaluated at
        grid values of S on either side of a key's S brackets it.
        """
        odd = self._odd_part(t)
        if self.S.size <= 2 * self.grid.size:
            exact = self._exact(np.arange(self.S.size), t, odd)
            return exact, exact, odd
        table = self._major_best(self.grid, t)
        upper = odd + table[self.grid_lo, self.key_K]
        lower = odd + table[self.grid_hi, self.key_K]
        return lower, upper, odd

    def max_count(self, t) -> int:
        lower, upper, odd = self.key_bounds(t)
        best = int(lower.max())
        open_ = np.flatnonzero(upper > best)
        if open_.size:
            best = max(best, int(self._exact(open_, t, odd).max()))
        return best

    def winners(self, t, k):
        """Group weights of every grid vector reaching k rejections at t."""
        _, upper, odd = self.key_bounds(t)
        idx = np.flatnonzero(upper >= k)
        idx = idx[self._exact(idx, t, odd) >= k]
        v = np.arange(self.cap + 1)
        rows = []
        for i in idx:
            # within a key S is fixed, so major-group counts are table lookups
            u = (self.m * v) / self.S[i]
            major = _class_levels(int(self.key_K[i]), self.major.size, self.cap)
            cnt = np.full(major.shape[0], odd[i], dtype=np.int64)
            for j, g in enumerate(self.major):
                cnt += _count_scaled(self.sorted[g], u, t)[major[:, j]]
            major = major[cnt >= k]
            levels = np.empty((major.shape[0], self.G), dtype=np.int64)
            levels[:, self.major] = major
            levels[:, self.odd] = self.key_odd[i]
            rows.append(_level_weights(levels, self.sizes, self.m))
        return np.vstack(rows)


def ihw_naive(h, covariate, cfg: IhwConfig = IhwConfig()) -> DiscoveryResult:
    """Naive independent hypothesis weighting.

    Hypotheses are binned by covariate quantiles; every grid weight vector
    (renormalised so the size-weighted mean weight is 1) is scored by its
    weighted-BH discovery count and the best is returned. Ties go to the
    candidate closest to uniform, then lexicographically smallest.
    """
    p = _pvals(h)
    x = np.asarray(covariate, dtype=float).ravel()
    if x.shape != p.shape:
        raise ValidationError(f"covariate has length {x.size}, expected {p.size}")
    m = p.size
    alpha = cfg.alpha
    if m == 0:
        return DiscoveryResult(np.zeros(0), np.zeros(0), alpha, "ihw",
                               {"weights": np.ones(0), "group_weights": np.ones(0)})
    # a lone hypothesis collapses to one group rather than failing G <= m
    labels, bounds = quantile_groups(x, cfg.n_groups if m > 1 else 1)
    G = int(labels.max()) + 1
    search = _WeightSearch(p, labels, G, cfg.levels)

    # largest k with max_w R_w(k alpha / m) >= k, by fixed-point descent. No
    # grid weight exceeds m / n_g, which gives a cheap count bound to start from
    reach = (m / search.sizes) * (1.0 + 1e-9)
    k = m
    while k > 0:
        nxt = sum(int(np.searchsorted(s, r * k * alpha / m, side="right"))
                  for s, r in zip(search.sorted, reach))
        if nxt >= k:
            break
        k = nxt
    while k > 0:
        nxt = search.max_count(k * alpha / m)
        if nxt >= k:
            break
        k = nxt
    t = k * alpha / m
    best = np.ones(G)
    if search.count(best[None, :], t)[0] < k:
        winners = search.winners(t, k)
        dist = np.linalg.norm(winners - 1.0, axis=1)
        close = winners[dist <= dist.min() + 1e-12]
        best = close[np.lexsort(close.T[::-1])[0]]

    weights = best[labels]
    res = weighted_bh(p, weights, alpha)
    per_group = np.bincount(labels, weights=res.rejected, minlength=G).astype(np.int64)
    extras = {
        "weights": weights,
        "group_weights": best,
        "group_bounds": bounds,
        "group_sizes": search.sizes,
        "group_rejections": per_group,
        "n_candidates": (cfg.levels + 1) ** G - 1,
    }
    return DiscoveryResult(res.rejected, res.adjusted, alpha, "ihw", extras)


# ------------------------------------------------------------- Boca-Leek ----

def boca_leek(h, X, cfg: BocaLeekConfig = BocaLeekConfig()) -> DiscoveryResult:
    """Covariate-conditional null proportion times BH-adjusted p-values.

    For each lambda, regress 1(p > lambda) on the covariates by logistic
    regression; fitted / (1 - lambda) estimates pi0 at that lambda. The
    per-hypothesis series is smoothed over lambda by a polynomial and read
    off at the largest lambda, then clamped to [1/m, 1].
    """
    p = _pvals(h)
    m = p.size
    Xv = X.values if isinstance(X, CovariateMatrix) else np.asarray(X, dtype=float)
    if Xv.ndim == 1:
        Xv = Xv[:, None]
    if Xv.shape[0] != m:
        raise ValidationError(f"covariates have {Xv.shape[0]} rows, expected {m}")
    alpha = cfg.alpha
    if m == 0:
        return DiscoveryResult(np.zeros(0), np.zeros(0), alpha, "boca_leek",
                               {"pi0": np.zeros(0), "converged": True})
    lambdas = np.asarray(cfg.lambda_grid)
    if m <= Xv.shape[1] + 1:
        # too few hypotheses for a regression: fall back to the global estimate
        pi0 = np.full(m, storey_pi0(p, lambdas, cfg.smoothing_degree))
        all_converged = False
    else:
        series = np.empty((lambdas.size, m))
        all_converged = True
        start = None
        for j, lam in enumerate(lambdas):
            y = (p > lam).astype(float)
            fit = logistic_fit(Xv, y, start=start)
            all_converged &= fit.converged
            start = fit.coefficients if fit.converged else None
            series[j] = fit.predict(Xv) / (1.0 - lam)
        pi0 = _smooth_at_end(lambdas, series, cfg.smoothing_degree)[0]
        pi0 = np.clip(pi0, 1.0 / m, 1.0)
    fdr = np.minimum(1.0, pi0 * bh_adjust(p))
    return DiscoveryResult(fdr <= alpha, fdr, alpha, "boca_leek",
                           {"pi0": pi0, "converged": bool(all_converged)})
