"""Covariate sweeps (per PC axis or per original column) and the Monte Carlo harness."""

from __future__ import annotations

import csv
import json
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import CovariateMatrix, HypothesisSet, ValidationError, confusion
from .pca import PcaModel, pca_fit
from .procedures import (BocaLeekConfig, IhwConfig, bh, boca_leek, bonferroni, ihw_naive,
                         storey_qvalues)
from .simgen import simulate

GLOBAL_METHODS = ("bonferroni", "bh", "storey")
COVARIATE_METHODS = ("ihw", "boca_leek")
ALL_METHODS = GLOBAL_METHODS + COVARIATE_METHODS
GLOBAL_AXIS = "global"


def canonical_method(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    key = {"bl": "boca_leek", "bocaleek": "boca_leek", "bonf": "bonferroni"}.get(key, key)
    if key not in ALL_METHODS:
        raise ValidationError(f"unknown method {name!r}; choose from {', '.join(ALL_METHODS)}")
    return key


def run_method(method: str, h: HypothesisSet, covariate=None, alpha: float = 0.05,
               ihw_cfg: Optional[IhwConfig] = None, bl_cfg: Optional[BocaLeekConfig] = None):
    """Run one procedure; ``covariate`` is required for ihw / boca_leek."""
    method = canonical_method(method)
    if method == "bonferroni":
        return bonferroni(h, alpha)
    if method == "bh":
        return bh(h, alpha)
    if method == "storey":
        return storey_qvalues(h, alpha)
    if covariate is None:
        raise ValidationError(f"{method} needs a covariate")
    if method == "ihw":
        cfg = ihw_cfg or IhwConfig()
        if cfg.alpha != alpha:
            cfg = IhwConfig(cfg.n_groups, cfg.weight_grid_step, cfg.max_weight, alpha)
        return ihw_naive(h, covariate, cfg)
    cfg = bl_cfg or BocaLeekConfig()
    if cfg.alpha != alpha:
        cfg = BocaLeekConfig(cfg.lambda_grid, cfg.smoothing_degree, alpha)
    return boca_leek(h, covariate, cfg)


@dataclass(frozen=True)
class SweepResult:
    """Per-axis results of one covariate-aware method.

    ``best_axis`` is 1-based: the first axis reaching the maximum count.
    """

    axis_labels: tuple
    per_axis: tuple
    discoveries: np.ndarray
    best_axis: int
    pca: Optional[PcaModel] = None

    @property
    def best_label(self) -> str:
        return self.axis_labels[self.best_axis - 1]

    @property
    def best(self):
        return self.per_axis[self.best_axis - 1]


def _sweep(h, columns: np.ndarray, labels, method, alpha, ihw_cfg, bl_cfg, pca=None):
    method = canonical_method(method)
    if method not in COVARIATE_METHODS:
        raise ValidationError(f"sweeps need a covariate-aware method, got {method!r}")
    results = tuple(run_method(method, h, columns[:, j], alpha, ihw_cfg, bl_cfg)
                    for j in range(columns.shape[1]))
    counts = np.array([r.discoveries for r in results], dtype=np.int64)
    best = int(np.argmax(counts)) + 1  # argmax returns the first maximum
    return SweepResult(tuple(labels), results, counts, best, pca)


def _as_covariates(X) -> CovariateMatrix:
    return X if isinstance(X, CovariateMatrix) else CovariateMatrix(X)


def pc_select(h: HypothesisSet, X, method: str = "ihw", alpha: float = 0.05,
              standardize: bool = False, ihw_cfg=None, bl_cfg=None) -> SweepResult:
    """Fit PCA once and run ``method`` with each PC score as the single covariate."""
    cm = _as_covariates(X)
    if cm.m != h.m:
        raise ValidationError(f"covariates have {cm.m} rows, expected {h.m}")
    if cm.d == 1:
        # one column: the sole axis is the covariate itself
        return _sweep(h, cm.values, ("PC1",), method, alpha, ihw_cfg, bl_cfg)
    model = pca_fit(cm, standardize=standardize)
    return _sweep(h, model.scores, model.axis_labels, method, alpha, ihw_cfg, bl_cfg, model)


def covariate_sweep(h: HypothesisSet, X, method: str = "ihw", alpha: float = 0.05,
                    ihw_cfg=None, bl_cfg=None) -> SweepResult:
    """Run ``method`` once per original covariate column."""
    cm = _as_covariates(X)
    if cm.m != h.m:
        raise ValidationError(f"covariates have {cm.m} rows, expected {h.m}")
    return _sweep(h, cm.values, cm.names, method, alpha, ihw_cfg, bl_cfg)


def evaluate(results, truth) -> dict:
    """ConfusionCounts per method.

    ``results`` is a mapping name -> DiscoveryResult, or a sequence keyed by
    each result's method_tag.
    """
    if isinstance(results, Mapping):
        items = results.items()
    else:
        items = [(r.method_tag, r) for r in results]
    out = {}
    for name, r in items:
        if name in out:
            raise ValidationError(f"duplicate method key {name!r}")
        out[name] = confusion(r, truth)
    return out


# ---------------------------------------------------------- Monte Carlo ----

@dataclass(frozen=True)
class EvalReport:
    """Per-replicate TPR / FDP for each (method, axis) row, with summaries."""

    rows: tuple
    tpr: np.ndarray
    fdp: np.ndarray
    discoveries: np.ndarray
    n_alternatives: np.ndarray
    alpha: float
    scenario: int = 0
    m: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_reps(self) -> int:
        return self.tpr.shape[0]

    def _se(self, a: np.ndarray) -> np.ndarray:
        if self.n_reps < 2:
            return np.zeros(a.shape[1])
        return a.std(axis=0, ddof=1) / np.sqrt(self.n_reps)

    @property
    def tpr_mean(self) -> np.ndarray:
        return self.tpr.mean(axis=0)

    @property
    def fdr_mean(self) -> np.ndarray:
        return self.fdp.mean(axis=0)

    @property
    def tpr_se(self) -> np.ndarray:
        return self._se(self.tpr)

    @property
    def fdr_se(self) -> np.ndarray:
        return self._se(self.fdp)

    @property
    def mean_alternatives(self) -> float:
        return float(self.n_alternatives.mean())

    def index(self, method: str, axis: str = GLOBAL_AXIS) -> int:
        return self.rows.index((method, axis))

    def axes(self, method: str) -> list:
        return [a for (mth, a) in self.rows if mth == method]

    def summary(self, method: str, axis: str = GLOBAL_AXIS) -> dict:
        return self.table()[self.index(method, axis)]

    def table(self) -> list:
        out = []
        tm, ts, fm, fs = self.tpr_mean, self.tpr_se, self.fdr_mean, self.fdr_se
        dm = self.discoveries.mean(axis=0)
        for k, (method, axis) in enumerate(self.rows):
            out.append({"method": method, "axis": axis, "tpr_mean": float(tm[k]),
                        "tpr_se": float(ts[k]), "fdr_mean": float(fm[k]),
                        "fdr_se": float(fs[k]), "discoveries_mean": float(dm[k]),
                        "n_reps": self.n_reps, "alpha": self.alpha})
        return out

    def to_csv(self, path):
        write_table_csv(path, self.table())

    def to_json(self, path):
        doc = {"scenario": self.scenario, "m": self.m, "seed": self.seed, "alpha": self.alpha,
               "n_reps": self.n_reps, "mean_alternatives": self.mean_alternatives,
               "rows": self.table()}
        write_json(path, doc)


def fmt(v) -> str:
    """17-significant-digit decimal text for floats, plain text otherwise."""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return str(v)


def write_table_csv(path, rows: Sequence[dict], header: Optional[Sequence[str]] = None):
    header = list(header or (rows[0].keys() if rows else []))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r[k]) for k in header])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")


def _report_rows(methods, d: int):
    rows = []
    for mth in methods:
        if mth in GLOBAL_METHODS:
            rows.append((mth, GLOBAL_AXIS))
        else:
            rows.extend((mth, f"PC{j + 1}") for j in range(d))
    return tuple(rows)


def run_replicate(scenario: int, m: int, seed: int, replicate: int, alpha: float,
                  methods: Sequence[str], sim_kwargs: Optional[dict] = None):
    """One replicate: (tpr, fdp, discoveries per report row, number of alternatives)."""
    ds = simulate(scenario, m, seed, replicate, **(sim_kwargs or {}))
    truth = ds.h.truth
    cm = ds.X
    need_pca = any(mth in COVARIATE_METHODS for mth in methods)
    scores = pca_fit(cm).scores if need_pca else None
    tpr, fdp, disc = [], [], []

    def record(res):
        c = confusion(res, truth)
        tpr.append(c.tpr)
        fdp.append(c.fdp)
        disc.append(c.tp + c.fp)

    for mth in methods:
        if mth in GLOBAL_METHODS:
            record(run_method(mth, ds.h, alpha=alpha))
        else:
            for j in range(cm.d):
                record(run_method(mth, ds.h, scores[:, j], alpha))
    return np.array(tpr), np.array(fdp), np.array(disc, dtype=np.int64), int(truth.sum())


def _replicate_star(args):
    return run_replicate(*args)


def monte_carlo(scenario: int, m: int = 20000, n_reps: int = 100, alpha: float = 0.05,
                methods: Sequence[str] = ALL_METHODS, seed: int = 0, workers: int = 1,
                d: int = 30, **sim_kwargs) -> EvalReport:
    """Replicated simulation study.

    Replicate r draws its data from the stream derived from (seed, r), so the
    report does not depend on ``workers``; results are reduced in replicate order.
    Extra keyword arguments go to the scenario generator (e.g. ``pi1=0``).
    """
    if n_reps < 1:
        raise ValidationError("n_reps must be >= 1")
    methods = tuple(dict.fromkeys(canonical_method(x) for x in methods))
    sim_kwargs = dict(sim_kwargs, d=d)
    jobs = [(int(scenario), m, seed, r, alpha, methods, sim_kwargs) for r in range(n_reps)]
    if workers > 1 and n_reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_replicate_star, jobs))
    else:
        out = [_replicate_star(j) for j in jobs]
    return EvalReport(
        rows=_report_rows(methods, d),
        tpr=np.vstack([o[0] for o in out]),
        fdp=np.vstack([o[1] for o in out]),
        discoveries=np.vstack([o[2] for o in out]),
        n_alternatives=np.array([o[3] for o in out]),
        alpha=alpha, scenario=int(scenario), m=m, seed=seed,
        meta={"methods": methods, "sim_kwargs": sim_kwargs})
