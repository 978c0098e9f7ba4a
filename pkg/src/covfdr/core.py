"""Shared domain types and confusion-count metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DimensionError(ValidationError):
    """Array lengths or shapes do not line up."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class NumericError(ArithmeticError):
    """An iterative numerical routine failed to converge."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class HypothesisSet:
    """m p-values with optional 0/1 truth labels (1 = alternative) and ids."""

    p_values: np.ndarray
    truth: Optional[np.ndarray] = None
    ids: Optional[Sequence[str]] = None

    def __post_init__(self):
        p = np.array(self.p_values, dtype=float).ravel()
        if np.isnan(p).any():
            raise ValidationError("p-values contain missing values")
        if ((p < 0) | (p > 1)).any():
            bad = int(np.flatnonzero((p < 0) | (p > 1))[0])
            raise ValidationError(f"p-value {p[bad]!r} at index {bad} is outside [0, 1]")
        object.__setattr__(self, "p_values", _frozen(p))
        if self.truth is not None:
            t = np.asarray(self.truth)
            if t.shape != p.shape:
                raise DimensionError(f"truth has length {t.size}, expected {p.size}")
            if not np.isin(t, (0, 1)).all():
                raise ValidationError("truth labels must be 0 or 1")
            object.__setattr__(self, "truth", _frozen(t.astype(np.int64)))
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != p.size:
                raise DimensionError(f"ids has length {len(ids)}, expected {p.size}")
            object.__setattr__(self, "ids", ids)

    @property
    def m(self) -> int:
        return self.p_values.size

    @property
    def m1(self) -> int:
        if self.truth is None:
            raise ValidationError("no truth labels attached")
        return int(self.truth.sum())


@dataclass(frozen=True)
class CovariateMatrix:
    values: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[1] < 1:
            raise DimensionError("covariate matrix must be m x d with d >= 1")
        if not np.isfinite(v).all():
            raise ValidationError("covariates must be finite")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise DimensionError(f"{len(names)} names for {v.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValidationError("covariate names must be unique")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "names", names)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, key) -> np.ndarray:
        j = self.names.index(key) if isinstance(key, str) else int(key)
        return self.values[:, j]


@dataclass(frozen=True)
class DiscoveryResult:
    """Output of one testing procedure, in input order.

    ``adjusted`` holds adjusted p-values (or estimated FDR / q-values for the
    pi0-scaled procedures). ``extras`` carries method-specific payload.
    """

    rejected: np.ndarray
    adjusted: np.ndarray
    alpha: float
    method_tag: str
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.rejected).astype(np.int64)
        a = np.asarray(self.adjusted, dtype=float)
        if r.shape != a.shape:
            raise DimensionError("rejected and adjusted differ in length")
        object.__setattr__(self, "rejected", _frozen(r))
        object.__setattr__(self, "adjusted", _frozen(a))

    @property
    def discoveries(self) -> int:
        return int(self.rejected.sum())

    def rejection_set(self) -> frozenset:
        return frozenset(np.flatnonzero(self.rejected).tolist())


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def m(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def tpr(self) -> float:
        return self.tp / max(self.tp + self.fn, 1)

    @property
    def fdp(self) -> float:
        return self.fp / max(self.tp + self.fp, 1)

    def as_dict(self) -> dict[str, Any]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "tpr": self.tpr, "fdp": self.fdp}


def confusion(result, truth) -> ConfusionCounts:
    """Confusion counts of a rejection vector against 0/1 truth labels.

    ``result`` may be a DiscoveryResult or a bare rejection vector.
    """
    delta = np.asarray(getattr(result, "rejected", result)).astype(np.int64)
    h = np.asarray(truth).astype(np.int64)
    if delta.shape != h.shape:
        raise DimensionError(f"rejected has length {delta.size}, truth has length {h.size}")
    tp = int(np.sum(delta * h))
    fp = int(np.sum(delta * (1 - h)))
    m1 = int(np.sum(h))
    return ConfusionCounts(tp=tp, fp=fp, fn=m1 - tp, tn=h.size - m1 - fp)
