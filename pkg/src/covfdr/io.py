"""CSV ingestion of GWAS-style summary tables, dataset export and run configuration."""

from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import CovariateMatrix, HypothesisSet, ValidationError
from .pipeline import fmt

P_COLUMN_GUESSES = ("p", "pval", "p_value", "pvalue", "P")
ID_COLUMN_GUESSES = ("id", "rsid", "snp", "SNP", "ID")
OUT_ENV = "COVFDR_OUT"


class FormatError(ValidationError):
    """Malformed input file (header, shape or cell syntax)."""


@dataclass(frozen=True)
class GwasTable:
    ids: tuple
    p_values: np.ndarray
    covariates: CovariateMatrix
    source: str = ""

    @property
    def m(self) -> int:
        return self.p_values.size

    @property
    def h(self) -> HypothesisSet:
        return HypothesisSet(self.p_values, ids=self.ids)


def _pick(header, wanted, guesses, what):
    if wanted is not None:
        if wanted not in header:
            raise FormatError(f"{what} column {wanted!r} not found in header")
        return wanted
    for g in guesses:
        if g in header:
            return g
    return None


def _parse_column(cells: list, name: str) -> np.ndarray:
    try:
        out = np.array(cells, dtype=float)
    except ValueError:
        out = None
    if out is not None and np.isfinite(out).all():
        return out
    # slow path: locate the first bad cell for the message
    for i, c in enumerate(cells, start=1):
        if c.strip() == "":
            raise FormatError(f"row {i}, column {name}: missing value")
        try:
            v = float(c)
        except ValueError:
            raise FormatError(f"row {i}, column {name}: cannot parse {c!r} as a number") from None
        if not np.isfinite(v):
            raise FormatError(f"row {i}, column {name}: non-finite value {c!r}")
    raise FormatError(f"column {name}: unparseable values")  # pragma: no cover


def load_gwas_csv(path, p_column: Optional[str] = None, id_column: Optional[str] = None,
                  exclude_columns: Sequence[str] = ()) -> GwasTable:
    """Read a header-driven CSV of p-values and covariates.

    Every column other than the p-value, id and excluded columns becomes a
    covariate, in file order. Without ``p_column``/``id_column`` common names
    are tried (p, pval, ...; id, rsid, snp, ...); a missing id column yields
    row numbers as ids. Rows are numbered from 1 after the header.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or all(h.strip() == "" for h in header):
            raise FormatError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        seen = set()
        for h in header:
            if h == "":
                raise FormatError(f"{path}: empty column name in header")
            if h in seen:
                raise FormatError(f"{path}: duplicate column {h!r} in header")
            seen.add(h)
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"row {i}: expected {len(header)} cells, found {len(row)}")
            rows.append(row)
    pcol = _pick(header, p_column, P_COLUMN_GUESSES, "p-value")
    if pcol is None:
        raise FormatError(f"{path}: no p-value column (tried {', '.join(P_COLUMN_GUESSES)})")
    icol = _pick(header, id_column, ID_COLUMN_GUESSES, "id")
    for c in exclude_columns:
        if c not in header:
            raise FormatError(f"excluded column {c!r} not found in header")
    cols = list(zip(*rows)) if rows else [()] * len(header)
    data = dict(zip(header, cols))
    p = _parse_column(list(data[pcol]), pcol)
    bad = np.flatnonzero((p < 0) | (p > 1))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"row {i + 1}, column {pcol}: p-value {p[i]!r} outside [0, 1]")
    ids = tuple(data[icol]) if icol else tuple(str(i) for i in range(1, len(rows) + 1))
    names = [h for h in header if h not in (pcol, icol) and h not in exclude_columns]
    if not names:
        raise FormatError(f"{path}: no covariate columns")
    X = np.column_stack([_parse_column(list(data[n]), n) for n in names]) if rows \
        else np.zeros((0, len(names)))
    return GwasTable(ids, p, CovariateMatrix(X, tuple(names)), str(path))


def write_dataset_csv(ds, path):
    """Export a simulated dataset as id, p, truth, xstar, mu, x1..xd.

    Absent xstar / mu are written as empty cells.
    """
    m = ds.h.m
    empty = [""] * m
    xstar = [fmt(v) for v in ds.xstar] if ds.xstar is not None else empty
    mu = [fmt(v) for v in ds.mu] if ds.mu is not None else empty
    truth = ds.h.truth if ds.h.truth is not None else [""] * m
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "p", "truth", "xstar", "mu", *ds.X.names])
        for i in range(m):
            w.writerow([str(i + 1), fmt(ds.h.p_values[i]), str(truth[i]), xstar[i], mu[i],
                        *(fmt(v) for v in ds.X.values[i])])


# ---------------------------------------------------------------- config ----

def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    alpha: float = 0.05
    methods: tuple = ("bonferroni", "bh", "storey", "ihw", "boca_leek")
    covariate: str = "pc:all"
    standardize: bool = True
    seed: int = 0
    workers: int = 1
    out: str = "covfdr_out"
    format: str = "csv"
    scenario: int = 2
    m: int = 20000
    reps: int = 100
    pi1: float = 0.1
    n_groups: int = 5
    weight_grid_step: float = 0.25
    max_weight: float = 5.0
    smoothing_degree: int = 3
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < float(self.alpha) < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.format not in ("csv", "json"):
            raise ValidationError("format must be csv or json")


_CASTS = {"alpha": float, "seed": int, "workers": int, "scenario": int, "m": int,
          "reps": int, "pi1": float, "n_groups": int, "weight_grid_step": float,
          "max_weight": float, "smoothing_degree": int, "standardize": parse_bool,
          "methods": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
          "covariate": str, "out": str, "format": str}


def load_config(path) -> dict:
    """Read ``key = value`` lines (optionally under [section] headers).

    Section names are ignored; keys mirror CLI flags with dashes or
    underscores. Returns a dict of typed values for the known keys.
    """
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser.read_string(text, source=str(path))
    out = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            k = key.replace("-", "_")
            val = raw.strip().strip('"').strip("'")
            if k not in _CASTS:
                raise ValidationError(f"{path}: unknown config key {key!r}")
            try:
                out[k] = _CASTS[k](val)
            except ValueError as exc:
                raise ValidationError(f"{path}: bad value for {key!r}: {exc}") from None
    return out


def resolve_out_dir(flag: Optional[str], config: dict) -> str:
    """Output directory: flag, then $COVFDR_OUT, then config file, then default."""
    if flag:
        return flag
    env = os.environ.get(OUT_ENV)
    if env:
        return env
    return config.get("out", RunConfig.out)
