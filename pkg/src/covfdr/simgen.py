"""Simulation generators for the covariate-dependent-null and size-investing scenarios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special

from .core import CovariateMatrix, DomainError, HypothesisSet, ValidationError
from .numerics import (bivariate_norm_cdf, norm_cdf, norm_quantile, sample_beta,
                       spawn_rng)
from .pca import pca_fit


class FeasibilityError(ValidationError):
    """Target binary correlation is outside the attainable range."""


@dataclass(frozen=True)
class BinaryGenSpec:
    marginals: np.ndarray
    target_corr: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.marginals, dtype=float).ravel()
        R = np.atleast_2d(np.asarray(self.target_corr, dtype=float))
        if ((p <= 0) | (p >= 1)).any():
            raise ValidationError("marginal probabilities must lie in (0, 1)")
        if R.shape != (p.size, p.size):
            raise ValidationError(f"correlation matrix shape {R.shape} does not match d={p.size}")
        if not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1.0):
            raise ValidationError("target correlation must be symmetric with unit diagonal")
        off = R[~np.eye(p.size, dtype=bool)]
        if ((off <= -1) | (off >= 1)).any():
            raise ValidationError("off-diagonal correlations must lie in (-1, 1)")
        object.__setattr__(self, "marginals", p)
        object.__setattr__(self, "target_corr", R)

    @property
    def d(self) -> int:
        return self.marginals.size


def ar1_binary_spec(d: int = 30, prob: float = 0.1, decay: float = 0.2) -> BinaryGenSpec:
    """Equal marginals with correlation decay**|j-k| between components."""
    idx = np.arange(d)
    return BinaryGenSpec(np.full(d, prob), decay ** np.abs(idx[:, None] - idx[None, :]))


def binary_corr_bounds(p_j: float, p_k: float):
    """Attainable (lower, upper) Pearson correlation of two Bernoulli variables."""
    q_j, q_k = 1.0 - p_j, 1.0 - p_k
    lower = max(-math.sqrt(p_j * p_k / (q_j * q_k)), -math.sqrt(q_j * q_k / (p_j * p_k)))
    upper = min(math.sqrt(p_j * q_k / (p_k * q_j)), math.sqrt(p_k * q_j / (p_j * q_k)))
    return lower, upper


@lru_cache(maxsize=4096)
def latent_corr_solve(p_j: float, p_k: float, r_target: float, tol: float = 1e-8) -> float:
    """Latent normal correlation whose dichotomisation has correlation ``r_target``.

    Bisection on rho for P(Z_j <= z_j, Z_k <= z_k; rho) = r sqrt(p_j q_j p_k q_k) + p_j p_k
    with z = Phi^-1(p). Stops once the joint probability is within ``tol``
    and the bracket has collapsed to 1e-12.
    """
    if r_target == 0.0:
        return 0.0
    lower, upper = binary_corr_bounds(p_j, p_k)
    if not lower < r_target < upper:
        bound = "upper" if r_target >= upper else "lower"
        limit = upper if bound == "upper" else lower
        raise FeasibilityError(
            f"target correlation {r_target} is beyond the {bound} bound {limit:.6g} "
            f"for marginals ({p_j}, {p_k})")
    target = r_target * math.sqrt(p_j * (1 - p_j) * p_k * (1 - p_k)) + p_j * p_k
    zj = float(norm_quantile(p_j))
    zk = float(norm_quantile(p_k))
    lo, hi = -1.0 + 1e-12, 1.0 - 1e-12
    mid = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        diff = bivariate_norm_cdf(zj, zk, mid) - target
        if abs(diff) <= tol and hi - lo <= 1e-12:
            break
        if diff < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    return mid


def repair_psd(R: np.ndarray, floor: float = 1e-8):
    """Clip eigenvalues at ``floor`` and rescale back to unit diagonal.

    Returns (repaired matrix, largest absolute entry change).
    """
    vals, vecs = np.linalg.eigh(R)
    if vals.min() >= floor:
        return R, 0.0
    fixed = (vecs * np.maximum(vals, floor)) @ vecs.T
    s = 1.0 / np.sqrt(np.diag(fixed))
    fixed = fixed * s[:, None] * s[None, :]
    fixed = 0.5 * (fixed + fixed.T)
    return fixed, float(np.max(np.abs(fixed - R)))


def latent_correlation(spec: BinaryGenSpec):
    """Latent correlation matrix for ``spec`` plus PSD-repair bookkeeping."""
    d = spec.d
    R = np.eye(d)
    for j in range(d):
        for k in range(j + 1, d):
            R[j, k] = R[k, j] = latent_corr_solve(float(spec.marginals[j]),
                                                  float(spec.marginals[k]),
                                                  float(spec.target_corr[j, k]))
    R, shift = repair_psd(R)
    warnings = []
    if shift > 0.05:
        warnings.append(f"PSD repair moved a latent correlation by {shift:.3g}")
    return R, shift, warnings


def gen_correlated_binary(spec: BinaryGenSpec, n_rows: int, rng):
    """Dichotomised-Gaussian draw of an (n_rows, d) 0/1 matrix.

    Returns (values, metadata) where metadata records the latent matrix,
    the PSD repair shift and any warnings.
    """
    R, shift, warnings = latent_correlation(spec)
    L = np.linalg.cholesky(R)
    latent = rng.standard_normal((n_rows, spec.d)) @ L.T
    thresholds = norm_quantile(spec.marginals)
    values = (latent <= thresholds).astype(np.int8)
    return values, {"latent_corr": R, "psd_shift": shift, "warnings": warnings}


# ------------------------------------------------------------ null prob ----

_A1, _A2 = 1.2, -0.2
_A = 4.0 / (_A1 - _A2) ** 2


def _f1(x):
    knot = -_A * (0.7 - _A1) * (0.7 - _A2)
    out = np.where(x < 0.7, -_A * (x - _A1) * (x - _A2), knot)
    return np.where(x <= 0.5 * (_A1 + _A2), 1.0, out)


def _f2(x):
    return np.where(x >= 0.7, -2.5 * (x - 0.7) ** 2, 0.0)


def _f3(x):
    out = np.where(x < 0.7, -(x - 0.1) ** 2, -(0.7 - 0.1) ** 2)
    return np.where(x <= 0.1, 0.0, out)


def pi0_fn(xstar):
    """Null probability as a function of the transformed covariate x* in [0, 1]."""
    x = np.asarray(xstar, dtype=float)
    if np.isnan(x).any() or ((x < 0) | (x > 1)).any():
        raise DomainError("pi0_fn is defined on [0, 1]")
    val = np.clip(_f1(x) + 1.5 * _f2(x) + 0.9 * _f3(x), 0.0, 1.0)
    return float(val) if val.ndim == 0 else val


# ------------------------------------------------------------- datasets ----

@dataclass(frozen=True)
class SimDataset:
    h: HypothesisSet
    X: CovariateMatrix
    xstar: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    seed: Optional[int] = None
    scenario_tag: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.h.m


def sparse_covariates(m: int, d: int, rng, spec: Optional[BinaryGenSpec] = None):
    """x = |z| * y with z ~ N(0, A A^T) for a fresh random A and y correlated binary."""
    spec = spec or ar1_binary_spec(d)
    if spec.d != d:
        raise ValidationError("binary spec dimension does not match d")
    A = rng.standard_normal((d, d))
    z = rng.standard_normal((m, d)) @ A.T
    y, meta = gen_correlated_binary(spec, m, rng)
    return np.abs(z) * y, meta


def scenario1(m: int, d: int = 30, rng=None, seed: Optional[int] = None,
              pi0_override: Optional[float] = None) -> SimDataset:
    """Null proportion driven by the third principal direction of X.

    The sign of e3 is a fair coin flip per dataset (stored in ``meta``), so
    x* = expit(+-e3 . x) is not tied to an arbitrary eigenvector orientation.

    ``pi0_override`` replaces pi0(x*) by a constant (e.g. 1.0 for an all-null
    calibration run).
    """
    if m < 100:
        raise ValidationError("scenario 1 needs m >= 100")
    if d < 3:
        raise ValidationError("scenario 1 needs d >= 3 (uses the third eigenvector)")
    rng = rng if rng is not None else spawn_rng(seed or 0, 0)
    X, meta = sparse_covariates(m, d, rng)
    # the orientation of e3 is not identified; draw it once per dataset
    e3 = pca_fit(X).loadings[:, 2] * (1.0 if rng.random() < 0.5 else -1.0)
    xstar = np.clip(special.expit(X @ e3), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    pi0 = np.full(m, float(pi0_override)) if pi0_override is not None else pi0_fn(xstar)
    truth = (rng.random(m) < 1.0 - pi0).astype(np.int64)
    a = rng.uniform(0.2, 0.4)
    null_p = rng.random(m)
    alt_p = sample_beta(a, 4.0, rng, m)
    p = np.where(truth == 1, alt_p, null_p)
    meta = dict(meta, beta_a=a, e3=e3)
    return SimDataset(HypothesisSet(p, truth), CovariateMatrix(X), xstar, None, seed,
                      "scenario1", meta)


def scenario2(m: int, d: int = 30, pi1: float = 0.1, rng=None,
              seed: Optional[int] = None) -> SimDataset:
    """Size investing: alternative means (2 Phi(e1 . x) + 1) along the first PC.

    ``pi1 = 0`` is accepted as an all-null calibration mode.
    """
    if not 0.0 <= pi1 < 1.0:
        raise ValidationError("pi1 must lie in [0, 1)")
    rng = rng if rng is not None else spawn_rng(seed or 0, 0)
    X, meta = sparse_covariates(m, d, rng)
    e1 = pca_fit(X).loadings[:, 0]
    truth = (rng.random(m) < pi1).astype(np.int64)
    mu = (2.0 * norm_cdf(X @ e1) + 1.0) * truth
    W = mu + rng.standard_normal(m)
    p = norm_cdf(-W)  # 1 - Phi(W) without cancellation
    meta = dict(meta, e1=e1)
    return SimDataset(HypothesisSet(p, truth), CovariateMatrix(X), None, mu, seed,
                      "scenario2", meta)


def simulate(scenario: int, m: int, seed: int, replicate: int = 0, **kwargs) -> SimDataset:
    """Dataset for (scenario, m, seed, replicate), reproducible bit for bit."""
    rng = spawn_rng(seed, replicate)
    if int(scenario) == 1:
        return scenario1(m, rng=rng, seed=seed, **kwargs)
    if int(scenario) == 2:
        return scenario2(m, rng=rng, seed=seed, **kwargs)
    raise ValidationError(f"unknown scenario {scenario!r}")
