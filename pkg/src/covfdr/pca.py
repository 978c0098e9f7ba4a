"""Covariance PCA of a covariate matrix."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import CovariateMatrix, ValidationError
from .numerics import sym_eigen


@dataclass(frozen=True)
class PcaModel:
    means: np.ndarray
    scales: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    names: tuple = ()
    standardized: bool = False
    zero_variance: tuple = ()

    @property
    def d(self) -> int:
        return self.loadings.shape[0]

    @property
    def axis_labels(self) -> tuple:
        return tuple(f"PC{j + 1}" for j in range(self.d))

    def explained_fraction(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        return self.eigenvalues / total if total > 0 else np.zeros(self.d)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return ((X - self.means) / self.scales) @ self.loadings

    def reconstruct(self, scores=None) -> np.ndarray:
        s = self.scores if scores is None else np.asarray(scores, dtype=float)
        return (s @ self.loadings.T) * self.scales + self.means


def pca_fit(X, standardize: bool = False) -> PcaModel:
    """Eigen-decompose the (m-1)-denominator covariance of ``X``.

    With ``standardize`` the columns are divided by their standard deviation
    first; zero-variance columns keep scale 1 and are listed in
    ``zero_variance``.
    """
    cm = X if isinstance(X, CovariateMatrix) else CovariateMatrix(X)
    V = cm.values
    m, d = V.shape
    if m <= d:
        raise ValidationError(f"PCA needs more rows than columns (m={m}, d={d})")
    means = V.mean(axis=0)
    centered = V - means
    scales = np.ones(d)
    zero_var = ()
    if standardize:
        sd = centered.std(axis=0, ddof=1)
        zero_var = tuple(cm.names[j] for j in np.flatnonzero(sd == 0))
        scales = np.where(sd > 0, sd, 1.0)
    Z = centered / scales
    cov = (Z.T @ Z) / (m - 1)
    eig = sym_eigen(cov)
    scores = Z @ eig.eigenvectors
    for a in (means, scales, eig.eigenvalues, eig.eigenvectors, scores):
        a.flags.writeable = False
    return PcaModel(means, scales, eig.eigenvectors, eig.eigenvalues, scores,
                    cm.names, bool(standardize), zero_var)


def pc_score(model: PcaModel, x, j: int) -> float:
    """Score of a single covariate row on principal component ``j`` (1-based)."""
    if not 1 <= j <= model.d:
        raise IndexError(f"principal component {j} out of range 1..{model.d}")
    x = np.asarray(x, dtype=float)
    return float(((x - model.means) / model.scales) @ model.loadings[:, j - 1])


def loadings_table(model: PcaModel, pcs=None, sort_by=None):
    """Rows of (covariate, loading on each requested PC).

    ``pcs`` are 1-based indices (default: all); ``sort_by`` is a 1-based PC
    whose loadings order the rows descending.
    """
    pcs = list(range(1, model.d + 1)) if pcs is None else [int(j) for j in pcs]
    for j in pcs:
        if not 1 <= j <= model.d:
            raise IndexError(f"principal component {j} out of range 1..{model.d}")
    order = np.arange(model.d)
    if sort_by is not None:
        order = np.argsort(-model.loadings[:, int(sort_by) - 1], kind="stable")
    header = ["covariate"] + [f"PC{j}" for j in pcs]
    rows = [[model.names[i]] + [model.loadings[i, j - 1] for j in pcs] for i in order]
    return header, rows


def write_loadings_csv(model: PcaModel, path, pcs=None, sort_by=None):
    header, rows = loadings_table(model, pcs, sort_by)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([r[0]] + [format(v, ".17g") for v in r[1:]])
