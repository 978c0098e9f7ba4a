"""Per-axis sweeps, evaluation and the Monte Carlo harness."""

import json

import numpy as np
import pytest

from covfdr.core import CovariateMatrix, HypothesisSet, ValidationError
from covfdr.pca import pca_fit
from covfdr.pipeline import (canonical_method, covariate_sweep, evaluate, fmt, monte_carlo,
                             pc_select, run_method)
from covfdr.procedures import bh, boca_leek, bonferroni, ihw_naive, storey_qvalues
from covfdr.simgen import simulate


@pytest.fixture(scope="module")
def small_ds():
    return simulate(2, 1500, seed=3, d=6)


class TestSweeps:
    def test_single_column(self, small_ds):
        x = small_ds.X.values[:, :1]
        sw = pc_select(small_ds.h, x, "ihw")
        assert sw.axis_labels == ("PC1",) and sw.best_axis == 1
        direct = ihw_naive(small_ds.h, x[:, 0])
        assert sw.best.rejection_set() == direct.rejection_set()

    @pytest.mark.parametrize("method", ["ihw", "boca_leek"])
    def test_pc_axes(self, small_ds, method):
        sw = pc_select(small_ds.h, small_ds.X, method)
        assert len(sw.per_axis) == 6 and sw.pca is not None
        assert sw.discoveries[sw.best_axis - 1] == sw.discoveries.max()
        assert sw.best_axis - 1 == int(np.flatnonzero(sw.discoveries == sw.discoveries.max())[0])
        scores = pca_fit(small_ds.X).scores
        ref = boca_leek(small_ds.h, scores[:, 2]) if method == "boca_leek" \
            else ihw_naive(small_ds.h, scores[:, 2])
        assert sw.per_axis[2].rejection_set() == ref.rejection_set()

    def test_duplicate_columns(self, small_ds):
        x = small_ds.X.values[:, 0]
        cm = CovariateMatrix(np.column_stack([x, x, small_ds.X.values[:, 1]]), ("a", "b", "c"))
        sw = covariate_sweep(small_ds.h, cm, "ihw")
        assert sw.axis_labels == ("a", "b", "c")
        assert sw.discoveries[0] == sw.discoveries[1]

    def test_ihw_dominates_bh_every_axis(self, small_ds):
        n_bh = bh(small_ds.h).discoveries
        assert (pc_select(small_ds.h, small_ds.X, "ihw").discoveries >= n_bh).all()

    def test_rejects_global_method(self, small_ds):
        with pytest.raises(ValidationError):
            pc_select(small_ds.h, small_ds.X, "bh")

    def test_row_mismatch(self, small_ds):
        with pytest.raises(ValidationError):
            covariate_sweep(small_ds.h, np.ones((10, 2)), "ihw")


class TestMethods:
    @pytest.mark.parametrize("alias, name", [("bl", "boca_leek"), ("BH", "bh"),
                                             ("Boca-Leek", "boca_leek")])
    def test_aliases(self, alias, name):
        assert canonical_method(alias) == name

    def test_unknown(self):
        with pytest.raises(ValidationError):
            canonical_method("holm")

    def test_needs_covariate(self):
        with pytest.raises(ValidationError):
            run_method("ihw", HypothesisSet([0.1, 0.2]))

    def test_evaluate(self, small_ds):
        h = small_ds.h
        res = [bonferroni(h), bh(h), storey_qvalues(h)]
        out = evaluate(res, h.truth)
        assert set(out) == {"bonferroni", "bh", "storey"}
        assert out["bh"].tp + out["bh"].fp == res[1].discoveries
        assert evaluate({"x": res[0]}, h.truth)["x"] == out["bonferroni"]


MC_KW = dict(m=600, n_reps=4, seed=11, d=4)


@pytest.fixture(scope="module")
def report():
    return monte_carlo(1, **MC_KW)


class TestMonteCarlo:
    def test_shape(self, report):
        assert report.rows[:3] == (("bonferroni", "global"), ("bh", "global"),
                                   ("storey", "global"))
        assert len(report.rows) == 3 + 2 * 4
        assert report.tpr.shape == (4, 11)
        assert report.axes("ihw") == ["PC1", "PC2", "PC3", "PC4"]

    def test_means_recompute(self, report):
        for k, row in enumerate(report.table()):
            assert row["tpr_mean"] == pytest.approx(np.mean(report.tpr[:, k]), abs=1e-15)
            assert row["fdr_mean"] == pytest.approx(np.mean(report.fdp[:, k]), abs=1e-15)
            assert row["tpr_se"] == pytest.approx(np.std(report.tpr[:, k], ddof=1) / 2)
            assert 0 <= row["tpr_mean"] <= 1 and 0 <= row["fdr_mean"] <= 1
            assert row["tpr_se"] >= 0 and row["fdr_se"] >= 0

    def test_dominance_per_replicate(self, report):
        d = report.discoveries
        b = d[:, report.index("bh")]
        assert (d[:, report.index("storey")] >= b).all()
        assert (d[:, report.index("bonferroni")] <= b).all()
        for axis in report.axes("ihw"):
            assert (d[:, report.index("ihw", axis)] >= b).all()

    def test_workers_invariant(self, report):
        par = monte_carlo(1, workers=2, **MC_KW)
        assert par.rows == report.rows
        for a in ("tpr", "fdp", "discoveries", "n_alternatives"):
            assert getattr(par, a).tobytes() == getattr(report, a).tobytes()

    def test_replicate_matches_dataset(self, report):
        ds = simulate(1, 600, 11, 2, d=4)
        assert report.n_alternatives[2] == ds.h.truth.sum()
        assert report.discoveries[2, report.index("bh")] == bh(ds.h).discoveries

    def test_serialization(self, report, tmp_path):
        report.to_csv(tmp_path / "r.csv")
        report.to_json(tmp_path / "r.json")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0].split(",")[:6] == ["method", "axis", "tpr_mean", "tpr_se",
                                           "fdr_mean", "fdr_se"]
        assert len(lines) == 1 + len(report.rows)
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["n_reps"] == 4 and len(doc["rows"]) == len(report.rows)
        assert float(lines[2].split(",")[2]) == doc["rows"][1]["tpr_mean"]

    def test_null_mode(self):
        rep = monte_carlo(2, m=2000, n_reps=30, seed=5, d=3, pi1=0.0,
                          methods=("bonferroni", "bh", "storey"))
        assert rep.n_alternatives.sum() == 0
        for k in range(3):
            assert rep.fdr_mean[k] <= 0.05 + 3 * rep.fdr_se[k]

    def test_bad_reps(self):
        with pytest.raises(ValidationError):
            monte_carlo(2, m=500, n_reps=0)


@pytest.mark.parametrize("value, text", [
    (0.1, "0.10000000000000001"), (1.0, "1"), (3, "3"), (np.float64(2.5e-7), "2.4999999999999999e-07"),
    (True, "1"), ("PC1", "PC1")])
def test_fmt(value, text):
    assert fmt(value) == text
    if isinstance(value, float):
        assert float(fmt(value)) == value
