"""Numerical kernels used by the procedures and simulation generators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import DimensionError, DomainError, NumericError, ValidationError

PROB_CLAMP = 1e-6


# ---------------------------------------------------------------- eigen ----

@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0


def _round_robin(n):
    """Yield rounds of disjoint index pairs covering every pair once (n even)."""
    players = list(range(n))
    for _ in range(n - 1):
        yield [(players[i], players[n - 1 - i]) for i in range(n // 2)]
        players = [players[0], players[-1]] + players[1:-1]


def normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive.

    ``argmax`` returns the first maximiser, so ties resolve to the lowest index.
    """
    v = np.array(vectors, dtype=float)
    if v.size == 0:
        return v
    lead = np.argmax(np.abs(v), axis=0)
    flip = v[lead, np.arange(v.shape[1])] < 0
    v[:, flip] *= -1.0
    return v


def sym_eigen(S, tol: float = 1e-14, max_sweeps: int = 60) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are scheduled in round-robin order so each round touches
    disjoint (p, q) pairs and can be applied as one vectorised update.
    Eigenvalues come back in descending order with columns sign-normalised.
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    d = A.shape[0]
    if d > 1000:
        raise ValidationError("sym_eigen supports d <= 1000")
    if d == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    scale = np.max(np.abs(A)) if A.size else 0.0
    if np.max(np.abs(A - A.T)) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise ValidationError("matrix is not symmetric")
    A = 0.5 * (A + A.T)

    n = d + (d % 2)
    if n != d:
        # pad with an isolated zero row/column so the schedule has even length
        A = np.pad(A, ((0, 1), (0, 1)))
    V = np.eye(n)
    total = math.sqrt(np.sum(A * A))
    rounds = [tuple(np.array(x) for x in zip(*r)) for r in _round_robin(n)] if n > 1 else []

    sweeps = 0
    while True:
        off = math.sqrt(np.sum((A - np.diag(np.diag(A))) ** 2))
        if off <= tol * total or total == 0.0:
            break
        if sweeps >= max_sweeps:
            raise NumericError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            # off-diagonals below the diagonal's resolution are already zero
            g = 100.0 * np.abs(apq)
            negligible = (np.abs(app) + g == np.abs(app)) & (np.abs(aqq) + g == np.abs(aqq))
            active = (np.abs(apq) > 0.0) & ~negligible
            safe = np.where(active, apq, 1.0)
            with np.errstate(over="ignore"):
                theta = (aqq - app) / (2.0 * safe)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            cc, ss = c[:, None], s[:, None]
            A[p, :] = cc * Ap - ss * Aq
            A[q, :] = ss * Ap + cc * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq

    vals = np.diag(A)[:d].copy()
    vecs = V[:d, :d].copy()
    order = np.argsort(-vals, kind="stable")
    return EigenDecomposition(vals[order], normalize_signs(vecs[:, order]), sweeps)


# ------------------------------------------------------------- logistic ----

@dataclass(frozen=True)
class LogisticFit:
    """Logistic regression fit; coefficients are intercept first."""

    coefficients: np.ndarray
    converged: bool
    iterations: int
    score_max: float = 0.0
    loglik_path: tuple = ()

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        eta = self.coefficients[0] + X @ self.coefficients[1:]
        return np.clip(special.expit(eta), PROB_CLAMP, 1.0 - PROB_CLAMP)


def _loglik(eta, y):
    # log(1 + e^eta) written stably; much faster than np.logaddexp
    softplus = np.log1p(np.exp(-np.abs(eta))) + np.maximum(eta, 0.0)
    return float(y @ eta - softplus.sum())


def logistic_fit(X, y, tol: float = 1e-8, step_tol: float = 1e-10,
                 max_iter: int = 100, ridge: float = 1e-10, start=None) -> LogisticFit:
    """Maximum-likelihood logistic regression with intercept, by IRLS.

    Columns are centred and scaled internally (zero-variance columns are only
    centred) and the coefficients are mapped back to the original scale.
    Newton steps are halved whenever the log-likelihood would decrease.
    ``start`` optionally warm-starts from original-scale coefficients.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    m, d = X.shape
    if y.size != m:
        raise DimensionError(f"y has length {y.size}, X has {m} rows")
    if m <= d + 1:
        raise ValidationError(f"need m > d + 1 observations (m={m}, d={d})")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("response must be 0/1")

    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    # design matrix stored transposed: contiguous rows make the products cheap
    Zt = np.empty((d + 1, m))
    Zt[0] = 1.0
    Zt[1:] = ((X - center) / scale).T

    ybar = y.mean()
    if ybar in (0.0, 1.0):
        # degenerate response: MLE at infinity, report a clamped constant fit
        coef = np.zeros(d + 1)
        coef[0] = special.logit(np.clip(ybar, PROB_CLAMP, 1.0 - PROB_CLAMP))
        return LogisticFit(coef, False, 0, float("nan"), ())

    beta = np.zeros(d + 1)
    if start is not None:
        start = np.asarray(start, dtype=float)
        beta[1:] = start[1:] * scale
        beta[0] = start[0] + start[1:] @ center
    else:
        beta[0] = special.logit(ybar)

    eye = np.eye(d + 1)
    eta = beta @ Zt
    ll = _loglik(eta, y)
    path = [ll]
    converged = False
    it = 0
    p = special.expit(eta)
    score = Zt @ (y - p)
    while it < max_iter:
        if np.max(np.abs(score)) <= tol:
            converged = True
            break
        w = p * (1.0 - p)
        H = (Zt * w) @ Zt.T + ridge * eye
        step = np.linalg.solve(H, score)
        it += 1
        for _ in range(60):
            new_eta = (beta + step) @ Zt
            new_ll = _loglik(new_eta, y)
            if new_ll >= ll - 1e-12 * abs(ll):
                break
            step *= 0.5
        beta = beta + step
        eta = new_eta
        ll = max(new_ll, ll)
        path.append(new_ll)
        p = special.expit(eta)
        score = Zt @ (y - p)
        if np.max(np.abs(step)) <= step_tol:
            converged = True
            break
        if np.linalg.norm(beta) > 1e3:
            break

    if converged and eta[y == 1].min() > eta[y == 0].max():
        # the fitted predictor separates the classes: the MLE is at infinity
        converged = False
    coef = np.empty(d + 1)
    coef[1:] = beta[1:] / scale
    coef[0] = beta[0] - coef[1:] @ center
    return LogisticFit(coef, converged, it, float(np.max(np.abs(score))), tuple(path))


# ------------------------------------------------------- distributions ----

def norm_cdf(x):
    return special.ndtr(x)


def norm_quantile(u):
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr <= 0.0) | (u_arr >= 1.0)) or np.isnan(u_arr).any():
        raise DomainError("normal quantile requires u in (0, 1)")
    return special.ndtri(u)


_GL = {n: np.polynomial.legendre.leggauss(n) for n in (6, 12, 20)}
_TWOPI = 2.0 * math.pi


def _bvn_upper(h, k, r):
    """P(X > h, Y > k) for a standard bivariate normal with correlation r.

    Gauss-Legendre integration of the Plackett derivative; for |r| >= 0.925
    the singularity near |r| = 1 is integrated out analytically first
    (the Drezner-Wesolowsky/Genz construction).
    """
    ar = abs(r)
    x, w = _GL[6 if ar < 0.3 else 12 if ar < 0.75 else 20]
    hk = h * k
    if ar < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(r)
        sn = np.sin(0.5 * asr * (x + 1.0))
        bvn = float(np.sum(w * np.exp((sn * hk - hs) / (1.0 - sn * sn))))
        return bvn * asr / (2.0 * _TWOPI) + special.ndtr(-h) * special.ndtr(-k)

    if r < 0:
        k = -k
        hk = -hk
    bvn = 0.0
    if ar < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        dd = (12.0 - hk) / 16.0
        bvn = a * math.exp(-0.5 * (bs / as_ + hk)) * (
            1.0 - c * (bs - as_) * (1.0 - dd * bs / 5.0) / 3.0 + c * dd * as_ * as_ / 5.0)
        if hk > -160.0:
            b = math.sqrt(bs)
            bvn -= (math.exp(-0.5 * hk) * math.sqrt(_TWOPI) * special.ndtr(-b / a) * b
                    * (1.0 - c * bs * (1.0 - dd * bs / 5.0) / 3.0))
        a *= 0.5
        xs = (a * (x + 1.0)) ** 2
        rs = np.sqrt(1.0 - xs)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            terms = (np.exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs
                     - np.exp(-0.5 * (bs / xs + hk)) * (1.0 + c * xs * (1.0 + dd * xs)))
        bvn += a * float(np.sum(w * np.nan_to_num(terms)))
        bvn = -bvn / _TWOPI
    if r > 0:
        return bvn + special.ndtr(-max(h, k))
    return -bvn + max(0.0, special.ndtr(-h) - special.ndtr(-k))


def bivariate_norm_cdf(z1: float, z2: float, rho: float) -> float:
    """P(Z1 <= z1, Z2 <= z2) for standard normals with correlation ``rho``."""
    if not -1.0 < rho < 1.0:
        raise DomainError(f"correlation must lie in (-1, 1), got {rho}")
    z1 = float(z1)
    z2 = float(z2)
    if z1 == -math.inf or z2 == -math.inf:
        return 0.0
    if z1 == math.inf:
        return float(special.ndtr(z2))
    if z2 == math.inf:
        return float(special.ndtr(z1))
    return float(min(1.0, max(0.0, _bvn_upper(-z1, -z2, rho))))


# ------------------------------------------------------------- sampling ----

def make_rng(seed) -> np.random.Generator:
    """PCG64 generator for a master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index``.

    Derived as SeedSequence(master_seed, spawn_key=(index,)), so a replicate's
    draws depend only on (master_seed, index) and never on worker scheduling.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def _standard_gamma(shape, rng, size):
    # Marsaglia-Tsang needs shape >= 1; boost Gamma(a) = Gamma(a + 1) * U**(1/a)
    if shape >= 1.0:
        return rng.standard_gamma(shape, size)
    g = rng.standard_gamma(shape + 1.0, size)
    u = rng.random(size)
    return g * u ** (1.0 / shape)


def sample_beta(a: float, b: float, rng: np.random.Generator, size=None):
    """Beta(a, b) draws as G_a / (G_a + G_b) from two independent gammas."""
    if not (a > 0 and b > 0):
        raise DomainError(f"beta shapes must be positive, got ({a}, {b})")
    ga = _standard_gamma(float(a), rng, size)
    gb = _standard_gamma(float(b), rng, size)
    return ga / (ga + gb)


def sample_std_normal(rng: np.random.Generator, size=None):
    return rng.standard_normal(size)
