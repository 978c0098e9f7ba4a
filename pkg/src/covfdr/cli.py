"""Command-line interface: simulate, analyze, pca, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import ValidationError
from .io import (FormatError, RunConfig, load_config, load_gwas_csv, parse_bool,
                 resolve_out_dir, write_dataset_csv)
from .pca import loadings_table, pca_fit
from .pipeline import (ALL_METHODS, COVARIATE_METHODS, GLOBAL_AXIS, canonical_method,
                       monte_carlo, run_method, write_json, write_table_csv)
from .procedures import BocaLeekConfig, IhwConfig, bh
from .simgen import simulate

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(out: Path, stem: str, rows, header=None):
    """Write ``stem``.csv and its JSON mirror ``stem``.json."""
    write_table_csv(out / f"{stem}.csv", rows, header)
    write_json(out / f"{stem}.json", rows)


def _settings(args) -> dict:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    for key, val in vars(args).items():
        if val is not None and key not in ("config", "command", "func"):
            cfg[key] = val
    return cfg


def _load(args, cfg):
    try:
        return load_gwas_csv(args.input, cfg.get("p_column"), cfg.get("id_column"),
                             tuple(cfg.get("exclude") or ()))
    except FormatError:
        raise
    except ValidationError as exc:
        raise FormatError(str(exc)) from None


def _out_dir(args, cfg) -> Path:
    out = Path(resolve_out_dir(getattr(args, "out", None), cfg))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _proc_configs(cfg, alpha):
    ihw = IhwConfig(cfg.get("n_groups", 5), cfg.get("weight_grid_step", 0.25),
                    cfg.get("max_weight", 5.0), alpha)
    bl = BocaLeekConfig(smoothing_degree=cfg.get("smoothing_degree", 3), alpha=alpha)
    return ihw, bl


# -------------------------------------------------------------- simulate ----

def cmd_simulate(args) -> int:
    cfg = _settings(args)
    rc = RunConfig(**{k: cfg[k] for k in ("alpha", "seed", "workers", "scenario", "m", "reps",
                                          "pi1") if k in cfg})
    methods = tuple(canonical_method(x) for x in cfg.get("methods", ALL_METHODS))
    out = _out_dir(args, cfg)
    extra = {"pi1": rc.pi1} if rc.scenario == 2 else {}
    report = monte_carlo(rc.scenario, rc.m, rc.reps, rc.alpha, methods, rc.seed,
                         rc.workers, **extra)
    report.to_csv(out / "eval_report.csv")
    report.to_json(out / "eval_report.json")
    if cfg.get("dump_replicates"):
        rows = []
        for r in range(report.n_reps):
            for k, (mth, axis) in enumerate(report.rows):
                rows.append({"replicate": r, "method": mth, "axis": axis,
                             "tpr": float(report.tpr[r, k]), "fdp": float(report.fdp[r, k]),
                             "discoveries": int(report.discoveries[r, k]),
                             "n_alternatives": int(report.n_alternatives[r])})
            write_dataset_csv(simulate(rc.scenario, rc.m, rc.seed, r, **extra),
                              out / f"dataset_rep{r:03d}.csv")
        _emit(out, "replicates", rows)
    print(f"scenario {rc.scenario}: {report.n_reps} replicates, "
          f"mean alternatives {report.mean_alternatives:.2f}")
    for row in report.table():
        if row["axis"] == GLOBAL_AXIS:
            print(f"  {row['method']:<11} TPR {row['tpr_mean']:.4f}  FDR {row['fdr_mean']:.4f}")
    print(f"wrote {out / 'eval_report.csv'}")
    return EXIT_OK


# --------------------------------------------------------------- analyze ----

def _axes(table, spec: str, standardize: bool):
    """(labels, columns, pca model or None) for a --covariate selector."""
    cm = table.covariates
    spec = spec.strip()
    if spec == "all":
        return list(cm.names), cm.values, None
    if spec.startswith("pc:"):
        model = pca_fit(cm, standardize=standardize) if cm.d > 1 else None
        scores = model.scores if model else cm.values
        labels = list(model.axis_labels) if model else ["PC1"]
        which = spec[3:]
        if which == "all":
            return labels, scores, model
        try:
            k = int(which)
        except ValueError:
            raise UsageError(f"bad principal component selector {spec!r}") from None
        if not 1 <= k <= len(labels):
            raise UsageError(f"principal component {k} out of range 1..{len(labels)}")
        return [labels[k - 1]], scores[:, [k - 1]], model
    names = [n.strip() for n in spec.split(",") if n.strip()]
    missing = [n for n in names if n not in cm.names]
    if missing or not names:
        raise UsageError(f"unknown covariate {', '.join(missing) or spec!r}; "
                         f"available: {', '.join(cm.names)}")
    idx = [cm.names.index(n) for n in names]
    return names, cm.values[:, idx], None


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in label)


def cmd_analyze(args) -> int:
    cfg = _settings(args)
    alpha = float(cfg.get("alpha", 0.05))
    RunConfig(alpha=alpha)
    try:
        method = canonical_method(args.method)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    standardize = parse_bool(cfg.get("standardize", True))
    table = _load(args, cfg)
    out = _out_dir(args, cfg)
    h = table.h
    base = bh(h, alpha)
    cov_spec = cfg.get("covariate")
    if cov_spec is None:
        if method in COVARIATE_METHODS:
            raise UsageError(f"--covariate is required for {method}")
        labels, cols, model = [GLOBAL_AXIS], None, None
    else:
        labels, cols, model = _axes(table, cov_spec, standardize)
    ihw_cfg, bl_cfg = _proc_configs(cfg, alpha)

    if method in COVARIATE_METHODS:
        results = [run_method(method, h, cols[:, j], alpha, ihw_cfg, bl_cfg)
                   for j in range(cols.shape[1])]
    else:
        res = run_method(method, h, alpha=alpha)
        results = [res] * len(labels)
    counts = np.array([r.discoveries for r in results])
    best = int(np.argmax(counts))
    count_rows = [{"method": method, "axis": lab, "discoveries": int(counts[j]),
                   "bh_discoveries": base.discoveries, "alpha": alpha, "best": int(j == best)}
                  for j, lab in enumerate(labels)]
    _emit(out, "counts", count_rows)

    weight_rows = []
    for j, (lab, res) in enumerate(zip(labels, results)):
        x = cols[:, j] if cols is not None else None
        scatter = [{"id": table.ids[i], "p": float(h.p_values[i]),
                    "covariate_or_score": float(x[i]) if x is not None else "",
                    "rejected_by_method": int(res.rejected[i]),
                    "rejected_by_bh": int(base.rejected[i])} for i in range(h.m)]
        _emit(out, f"scatter_{_safe(lab)}", scatter,
              ["id", "p", "covariate_or_score", "rejected_by_method", "rejected_by_bh"])
        disc = [{"id": table.ids[i], "p": float(h.p_values[i]),
                 "adjusted": float(res.adjusted[i]),
                 "covariate_or_score": float(x[i]) if x is not None else ""}
                for i in np.flatnonzero(res.rejected)]
        _emit(out, f"discoveries_{_safe(lab)}", disc,
              ["id", "p", "adjusted", "covariate_or_score"])
        if method == "ihw":
            ex = res.extras
            upper = list(ex["group_bounds"]) + [float("inf")]
            for g, w in enumerate(ex["group_weights"]):
                weight_rows.append({"axis": lab, "group": g + 1, "upper_bound": float(upper[g]),
                                    "size": int(ex["group_sizes"][g]), "weight": float(w),
                                    "rejections": int(ex["group_rejections"][g])})
    if weight_rows:
        _emit(out, "ihw_weights", weight_rows)
    if model is not None:
        _write_pca(out, model, table.ids)
    print(f"{method}: {len(labels)} axis/axes, best {labels[best]} with {counts[best]} "
          f"discoveries (BH: {base.discoveries})")
    return EXIT_OK


# ------------------------------------------------------------------- pca ----

def _write_pca(out: Path, model, ids, pcs=None, sort_by=None):
    header, rows = loadings_table(model, pcs, sort_by)
    _emit(out, "loadings", [dict(zip(header, r)) for r in rows], header)
    frac = model.explained_fraction()
    _emit(out, "eigenvalues", [{"pc": lab, "eigenvalue": float(v), "explained": float(f)}
                               for lab, v, f in zip(model.axis_labels, model.eigenvalues, frac)])
    score_header = ["id", *model.axis_labels]
    _emit(out, "scores", [dict(zip(score_header, (ids[i], *map(float, model.scores[i]))))
                          for i in range(model.scores.shape[0])], score_header)


def cmd_pca(args) -> int:
    cfg = _settings(args)
    standardize = parse_bool(cfg.get("standardize", True))
    table = _load(args, cfg)
    out = _out_dir(args, cfg)
    model = pca_fit(table.covariates, standardize=standardize)
    pcs = None
    if args.pcs:
        try:
            pcs = [int(x) for x in args.pcs.split(",")]
        except ValueError:
            raise UsageError(f"bad --pcs {args.pcs!r}") from None
    for j in (pcs or []) + ([args.sort_by] if args.sort_by else []):
        if not 1 <= j <= model.d:
            raise UsageError(f"principal component {j} out of range 1..{model.d}")
    _write_pca(out, model, table.ids, pcs, args.sort_by)
    if model.zero_variance:
        print(f"warning: zero-variance columns {', '.join(model.zero_variance)}",
              file=sys.stderr)
    print(f"PCA of {model.d} covariates over {table.m} rows written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- report ----

SUMMARY_FIELDS = ["source", "method", "axis", "discoveries", "tpr_mean", "tpr_se",
                  "fdr_mean", "fdr_se", "n_reps", "alpha"]


def cmd_report(args) -> int:
    src = Path(args.in_dir)
    if not src.is_dir():
        raise OSError(f"{src} is not a directory")
    rows = []
    for path in sorted(src.rglob("*.json")):
        if path.name in ("summary.json",):
            continue
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        rel = str(path.relative_to(src))
        if isinstance(doc, dict) and "rows" in doc:
            for r in doc["rows"]:
                rows.append({"source": rel, "method": r["method"], "axis": r["axis"],
                             "discoveries": r.get("discoveries_mean", ""),
                             **{k: r.get(k, "") for k in SUMMARY_FIELDS[4:]}})
        elif path.name == "counts.json":
            for r in doc:
                rows.append({"source": rel, "method": r["method"], "axis": r["axis"],
                             "discoveries": r["discoveries"], "tpr_mean": "", "tpr_se": "",
                             "fdr_mean": "", "fdr_se": "", "n_reps": "", "alpha": r["alpha"]})
    if not rows:
        print(f"no report inputs under {src}", file=sys.stderr)
        return EXIT_IO
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    _emit(out, "summary", rows, SUMMARY_FIELDS)
    for r in rows:
        tpr = f"{r['tpr_mean']:.4f}" if r["tpr_mean"] != "" else "-"
        fdr = f"{r['fdr_mean']:.4f}" if r["fdr_mean"] != "" else "-"
        disc = f"{r['discoveries']:.1f}" if r["discoveries"] != "" else "-"
        print(f"{r['source']:<28} {r['method']:<11} {r['axis']:<14} {disc:>9} {tpr:>7} {fdr:>7}")
    return EXIT_OK


# ------------------------------------------------------------------ main ----

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covfdr", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--out", help="output directory (default: $COVFDR_OUT, then config)")
        p.add_argument("--alpha", type=float)

    s = sub.add_parser("simulate", help="Monte Carlo study of a simulation scenario")
    common(s)
    s.add_argument("--scenario", type=int, choices=(1, 2))
    s.add_argument("--m", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--pi1", type=float)
    s.add_argument("--methods", type=lambda x: tuple(x.split(",")),
                   help="comma-separated subset of " + ",".join(ALL_METHODS))
    s.add_argument("--dump-replicates", action="store_true", default=None,
                   help="also write per-replicate metrics and datasets")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="run one procedure on a summary-statistics CSV")
    common(a)
    a.add_argument("--input", required=True)
    a.add_argument("--method", required=True,
                   choices=("bonferroni", "bh", "storey", "ihw", "bl", "boca_leek"))
    a.add_argument("--covariate", help="NAME[,NAME...] | pc:K | pc:all | all")
    a.add_argument("--standardize", type=parse_bool, help="standardise before PCA (default true)")
    a.add_argument("--p-column", dest="p_column")
    a.add_argument("--id-column", dest="id_column")
    a.add_argument("--exclude", type=lambda x: tuple(x.split(",")),
                   help="columns to ignore")
    a.set_defaults(func=cmd_analyze)

    p = sub.add_parser("pca", help="principal components of the covariates")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--input", required=True)
    p.add_argument("--standardize", type=parse_bool)
    p.add_argument("--pcs", help="comma-separated 1-based PCs for the loadings table")
    p.add_argument("--sort-by", dest="sort_by", type=int, help="order loadings by this PC")
    p.add_argument("--p-column", dest="p_column")
    p.add_argument("--id-column", dest="id_column")
    p.add_argument("--exclude", type=lambda x: tuple(x.split(",")))
    p.set_defaults(func=cmd_pca)

    r = sub.add_parser("report", help="consolidate result tables in a directory")
    r.add_argument("--in", dest="in_dir", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"covfdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"covfdr: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"covfdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
