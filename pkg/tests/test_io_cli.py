"""CSV loading, dataset export, configuration and the command-line interface."""

import json

import numpy as np
import pytest

from covfdr.cli import main
from covfdr.core import ValidationError
from covfdr.io import (FormatError, RunConfig, load_config, load_gwas_csv, parse_bool,
                       resolve_out_dir, write_dataset_csv)
from covfdr.procedures import bh
from covfdr.simgen import simulate
from datasets import PLANTED, write_planted


class TestLoader:
    def test_minimal(self, write_csv):
        path = write_csv("g.csv", ["rsid", "pval", "MAF", "baseL2"],
                         [["rs1", 0.01, 0.2, 1.5], ["rs2", 0.5, 0.1, 2.0], ["rs3", 1, 0.3, 0.0]])
        t = load_gwas_csv(path)
        assert (t.m, t.covariates.d) == (3, 2)
        assert t.covariates.names == ("MAF", "baseL2")
        assert t.ids == ("rs1", "rs2", "rs3")
        np.testing.assert_array_equal(t.p_values, [0.01, 0.5, 1.0])

    def test_p_out_of_range(self, write_csv):
        path = write_csv("g.csv", ["rsid", "pval", "MAF"],
                         [["rs1", 0.1, 0.2], ["rs2", 1.2, 0.1]])
        with pytest.raises(ValidationError, match="row 2, column pval"):
            load_gwas_csv(path)

    def test_bad_cell(self, write_csv):
        path = write_csv("g.csv", ["rsid", "pval", "MAF"],
                         [["rs1", 0.1, 0.2], ["rs2", 0.3, 0.1], ["rs3", 0.3, "abc"]])
        with pytest.raises(FormatError, match="row 3, column MAF"):
            load_gwas_csv(path)

    def test_missing_cell(self, write_csv):
        path = write_csv("g.csv", ["rsid", "pval", "MAF"], [["rs1", "", 0.2]])
        with pytest.raises(FormatError, match="row 1, column pval"):
            load_gwas_csv(path)

    @pytest.mark.parametrize("header, msg", [
        (["rsid", "pval", "pval"], "duplicate column 'pval'"),
        (["rsid", "", "MAF"], "empty column"),
        (["rsid", "score", "MAF"], "no p-value column"),
    ])
    def test_header_errors(self, write_csv, header, msg):
        path = write_csv("g.csv", header, [["rs1", 0.1, 0.2]])
        with pytest.raises(FormatError, match=msg):
            load_gwas_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(FormatError, match="missing header"):
            load_gwas_csv(path)

    def test_ragged_row(self, write_csv):
        path = write_csv("g.csv", ["rsid", "pval", "MAF"], [["rs1", 0.1]])
        with pytest.raises(FormatError, match="row 1"):
            load_gwas_csv(path)

    def test_explicit_columns_and_exclude(self, write_csv):
        path = write_csv("g.csv", ["snp_name", "P_BOLT", "MAF", "chrom"],
                         [["a", 0.1, 0.2, 1], ["b", 0.2, 0.3, 2]])
        t = load_gwas_csv(path, p_column="P_BOLT", id_column="snp_name",
                          exclude_columns=("chrom",))
        assert t.covariates.names == ("MAF",) and t.ids == ("a", "b")
        with pytest.raises(FormatError, match="not found"):
            load_gwas_csv(path, p_column="P")

    def test_round_trip(self, tmp_path):
        ds = simulate(1, 300, seed=4)
        path = tmp_path / "ds.csv"
        write_dataset_csv(ds, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[:5] == ["id", "p", "truth", "xstar", "mu"] and len(header) == 35
        t = load_gwas_csv(path, p_column="p", id_column="id",
                          exclude_columns=("truth", "xstar", "mu"))
        assert t.p_values.tobytes() == ds.h.p_values.tobytes()
        assert t.covariates.values.tobytes() == ds.X.values.tobytes()
        xstar = load_gwas_csv(path, p_column="p", id_column="id",
                              exclude_columns=("truth", "mu")).covariates.column("xstar")
        assert xstar.tobytes() == ds.xstar.tobytes()


class TestConfig:
    def test_plain_lines(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("alpha = 0.1\nmethods = bh, ihw\nstandardize = no\nn-groups = 4\n")
        cfg = load_config(path)
        assert cfg == {"alpha": 0.1, "methods": ("bh", "ihw"), "standardize": False,
                       "n_groups": 4}

    def test_sections_and_unknown_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[simulate]\nm = 500\n[extra]\ncolour = red\n")
        with pytest.raises(ValidationError, match="unknown config key"):
            load_config(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("m = many\n")
        with pytest.raises(ValidationError, match="'m'"):
            load_config(path)

    def test_out_dir_precedence(self, monkeypatch):
        monkeypatch.delenv("COVFDR_OUT", raising=False)
        assert resolve_out_dir(None, {}) == "covfdr_out"
        assert resolve_out_dir(None, {"out": "cfg"}) == "cfg"
        monkeypatch.setenv("COVFDR_OUT", "env")
        assert resolve_out_dir(None, {"out": "cfg"}) == "env"
        assert resolve_out_dir("flag", {"out": "cfg"}) == "flag"

    @pytest.mark.parametrize("text, value", [("yes", True), ("0", False), ("True", True)])
    def test_parse_bool(self, text, value):
        assert parse_bool(text) is value

    def test_run_config_alpha(self):
        with pytest.raises(ValidationError):
            RunConfig(alpha=1.5)


@pytest.fixture(scope="module")
def gwas(tmp_path_factory):
    path = tmp_path_factory.mktemp("gwas") / "gwas.csv"
    write_planted(path, 400, seed=3)
    return path


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n").split(",") for line in fh]


class TestCli:
    def test_analyze_bh_matches_library(self, gwas, tmp_path):
        assert main(["analyze", "--input", str(gwas), "--method", "bh", "--out",
                     str(tmp_path)]) == 0
        counts = json.loads((tmp_path / "counts.json").read_text())
        assert counts[0]["discoveries"] == bh(load_gwas_csv(gwas).h).discoveries

    def test_analyze_ihw_all_columns(self, gwas, tmp_path):
        assert main(["analyze", "--input", str(gwas), "--method", "ihw", "--covariate", "all",
                     "--out", str(tmp_path)]) == 0
        counts = json.loads((tmp_path / "counts.json").read_text())
        assert len(counts) == 5
        best = max(counts, key=lambda r: r["discoveries"])
        assert best["axis"] == PLANTED and best["best"] == 1
        scatter = _rows(tmp_path / "scatter_Intron_UCSC.bedL2.csv")
        assert scatter[0] == ["id", "p", "covariate_or_score", "rejected_by_method",
                              "rejected_by_bh"]
        assert len(scatter) == 401
        assert [r[0] for r in scatter[1:]] == list(load_gwas_csv(gwas).ids)
        weights = json.loads((tmp_path / "ihw_weights.json").read_text())
        assert len(weights) == 5 * 5

    def test_analyze_pc_selector(self, gwas, tmp_path):
        assert main(["analyze", "--input", str(gwas), "--method", "bl", "--covariate", "pc:2",
                     "--standardize", "false", "--out", str(tmp_path)]) == 0
        counts = json.loads((tmp_path / "counts.json").read_text())
        assert [c["axis"] for c in counts] == ["PC2"]
        assert counts[0]["method"] == "boca_leek"
        for stem in ("loadings", "eigenvalues", "scores", "scatter_PC2", "discoveries_PC2"):
            assert (tmp_path / f"{stem}.csv").exists() and (tmp_path / f"{stem}.json").exists()

    def test_pca_command(self, gwas, tmp_path):
        assert main(["pca", "--input", str(gwas), "--pcs", "3,1", "--sort-by", "3",
                     "--out", str(tmp_path)]) == 0
        rows = _rows(tmp_path / "loadings.csv")
        assert rows[0] == ["covariate", "PC3", "PC1"] and len(rows) == 6
        pc3 = [float(r[1]) for r in rows[1:]]
        assert pc3 == sorted(pc3, reverse=True)
        assert len(_rows(tmp_path / "scores.csv")) == 401

    def test_simulate_and_report(self, tmp_path):
        args = ["simulate", "--scenario", "2", "--m", "300", "--reps", "2", "--seed", "1",
                "--methods", "bonferroni,bh,storey", "--dump-replicates", "--out",
                str(tmp_path / "sim")]
        assert main(args) == 0
        assert (tmp_path / "sim" / "dataset_rep001.csv").exists()
        reps = json.loads((tmp_path / "sim" / "replicates.json").read_text())
        assert len(reps) == 2 * 3
        assert main(["report", "--in", str(tmp_path / "sim")]) == 0
        summary = _rows(tmp_path / "sim" / "summary.csv")
        assert summary[0][:3] == ["source", "method", "axis"]
        assert len(summary) == 1 + 3

    def test_config_and_env(self, tmp_path, monkeypatch):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("scenario = 2\nm = 300\nreps = 3\nmethods = bh\nseed = 4\n")
        monkeypatch.setenv("COVFDR_OUT", str(tmp_path / "envout"))
        assert main(["simulate", "--config", str(cfg), "--reps", "2"]) == 0
        doc = json.loads((tmp_path / "envout" / "eval_report.json").read_text())
        assert doc["n_reps"] == 2 and doc["m"] == 300 and doc["seed"] == 4

    def test_simulate_deterministic(self, tmp_path):
        for name in ("a", "b"):
            assert main(["simulate", "--scenario", "1", "--m", "300", "--reps", "3",
                         "--seed", "7", "--methods", "bh,storey,ihw",
                         "--out", str(tmp_path / name)]) == 0
        for f in ("eval_report.csv", "eval_report.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    @pytest.mark.parametrize("extra", [["--covariate", "nope"], ["--covariate", "pc:9"],
                                       ["--alpha", "1.5"], []])
    def test_usage_errors(self, gwas, tmp_path, extra):
        method = "ihw" if extra != ["--alpha", "1.5"] else "bh"
        assert main(["analyze", "--input", str(gwas), "--method", method, *extra,
                     "--out", str(tmp_path)]) == 2

    def test_unknown_method_exits_2(self, gwas):
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "--input", str(gwas), "--method", "holm"])
        assert exc.value.code == 2

    def test_io_errors(self, tmp_path, write_csv):
        assert main(["analyze", "--input", str(tmp_path / "missing.csv"), "--method", "bh",
                     "--out", str(tmp_path)]) == 1
        bad = write_csv("bad.csv", ["rsid", "pval", "MAF"], [["rs1", 2.0, 0.1]])
        assert main(["pca", "--input", str(bad), "--out", str(tmp_path)]) == 1
        assert main(["report", "--in", str(tmp_path / "nowhere")]) == 1
