"""Experiment harness: configs, determinism, emission, cell semantics."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from subemb import (ExperimentConfig, binom_sqrt_deviation,
                    choose_n_for_lower_bound, emit_report, load_report_json,
                    parse_report_csv, report_to_csv, run_experiment,
                    scalar_psi2_closed_form)
from subemb.errors import ParameterError
from subemb.experiments import psi2_marginal_samples
from subemb.parallel import worker_count


def _cfg(**kw):
    return ExperimentConfig.from_dict(kw)


class TestConfig:
    def test_unknown_fields_rejected(self):
        with pytest.raises(ParameterError):
            _cfg(kind="divergence", m=[4], n=4, extra=1)

    def test_trials_floor(self):
        with pytest.raises(ParameterError):
            _cfg(kind="divergence", m=[4], n=4, trials=0)

    def test_empty_grid(self):
        with pytest.raises(ParameterError):
            _cfg(kind="divergence", m=[], n=4)

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            _cfg(kind="warp", m=[4])

    def test_lower_bound_caps(self):
        with pytest.raises(ParameterError):
            _cfg(kind="lower_bound_exact_sparse", m=16, s=1)
        with pytest.raises(ParameterError):
            _cfg(kind="lower_bound_exact_sparse", m=4, s=3)

    def test_scalars_coerce_to_lists(self):
        cfg = _cfg(kind="divergence", m=8, s=2, n=4)
        assert cfg.m == (8,) and cfg.s == (2,) and cfg.n == (4,)

    def test_round_trip(self):
        cfg = _cfg(kind="divergence", m=[8, 16], s=2, n=4, trials=7, seed=3,
                   arms=["approx", "exact"])
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


class TestDivergence:
    def test_rows_and_oracle(self):
        cfg = _cfg(kind="divergence", m=[16, 32], s=2, n=4, trials=4000, seed=0)
        rep = run_experiment(cfg)
        assert len(rep.rows) == 2
        for row, m in zip(rep.rows, (16, 32)):
            assert row["m"] == m
            assert row["oracle"] == binom_sqrt_deviation(m, 2).value
            # approx arm on {e1} reduces to |sqrt(Z) - sqrt(s)|
            assert abs(row["approx_mean"] - row["oracle"]) <= 3 * row["approx_stderr"]

    def test_exact_arm_non_increasing(self):
        cfg = _cfg(kind="divergence", m=[16, 64, 256], s=2, n=4, trials=300,
                   seed=1, arms=["exact"])
        rows = run_experiment(cfg).rows
        for a, b in zip(rows, rows[1:]):
            slack = 3 * math.hypot(a["exact_stderr"], b["exact_stderr"])
            assert b["exact_mean"] <= a["exact_mean"] + slack

    def test_arm_selection_controls_columns(self):
        cfg = _cfg(kind="divergence", m=[8], s=1, n=3, trials=5, seed=0,
                   arms=["approx", "exact"])
        rep = run_experiment(cfg)
        assert "normalized_mean" not in rep.columns
        assert "approx_mean" in rep.columns and "exact_mean" in rep.columns

    def test_row_sparse_control_arm(self):
        cfg = _cfg(kind="divergence", m=[12], s=2, n=3, trials=30, seed=2,
                   arms=["approx", "row_sparse"])
        row = run_experiment(cfg).rows[0]
        # Rows with exactly s nonzeros make the first column approximately
        # sparse, so the same non-vanishing deviation applies.
        assert row["row_sparse_mean"] > 0


class TestNormalization:
    def test_paired_arms(self):
        cfg = _cfg(kind="normalization", m=[32, 128], s=3, n=4, trials=200, seed=3)
        rows = run_experiment(cfg).rows
        for row in rows:
            slack = 3 * math.hypot(row["unnormalized_stderr"],
                                   row["normalized_stderr"])
            assert row["normalized_mean"] <= row["unnormalized_mean"] + slack
        assert rows[1]["normalized_mean"] < rows[0]["normalized_mean"]


class TestLowerBound:
    def test_cell_semantics(self):
        cfg = _cfg(kind="lower_bound_exact_sparse", m=2, s=1, trials=25,
                   mc_samples=400, seed=0)
        row = run_experiment(cfg).rows[0]
        assert row["n"] == choose_n_for_lower_bound(2, 1) == 1286
        assert row["collision_freq"] == 1.0
        assert row["oracle"] == pytest.approx(1.0, abs=1e-12)
        assert row["mean_delta"] == pytest.approx(math.sqrt(2), abs=1e-12)
        assert row["ratio_fit"] > 0
        assert row["gamma_hat"] > 0


class TestPsi2Scaling:
    def test_rows(self):
        cfg = _cfg(kind="psi2_scaling", m=256, s=[4, 16], mc_samples=3000, seed=0)
        rows = run_experiment(cfg).rows
        for row in rows:
            closed = scalar_psi2_closed_form("sparse_sign", m=256, s=row["s"]).value
            assert row["oracle"] == closed
            assert row["ratio"] == pytest.approx(row["psi2_mgf_root"] / closed)
        assert rows[1]["psi2_mgf_root"] > rows[0]["psi2_mgf_root"]

    def test_marginal_sampler_moments(self):
        vals = psi2_marginal_samples(64, 4, 50000, seed=5)
        # <A1, u> has mean 0 and variance s/m.
        assert np.mean(vals) == pytest.approx(0.0, abs=0.01)
        assert np.var(vals) == pytest.approx(4 / 64, rel=0.1)


class TestTailProfile:
    def test_row_shape(self):
        cfg = _cfg(kind="tail_profile", m=48, n=5, trials=400,
                   mc_samples=2000, seed=0)
        row = run_experiment(cfg).rows[0]
        assert row["fitted_a"] > 0
        for u in (1, 2, 3):
            assert 0.0 <= row[f"exceed_u{u}"] <= 1.0
            assert row[f"bound_u{u}"] == pytest.approx(3 * math.exp(-u * u))
        assert row["rad"] == pytest.approx(1.0, abs=1e-12)


class TestConjectureDiag:
    def test_row(self):
        cfg = _cfg(kind="conjecture_diag", m=40, s=3, n=4, trials=60, seed=1)
        row = run_experiment(cfg).rows[0]
        assert row["mean_dev"] >= 0
        assert row["gamma_hat"] > 0


class TestEmission:
    def test_csv_shape_and_parse_back(self):
        cfg = _cfg(kind="divergence", m=[8, 16], s=2, n=3, trials=10, seed=0)
        rep = run_experiment(cfg)
        text = report_to_csv(rep)
        columns, rows = parse_report_csv(text)
        assert columns == rep.columns
        assert len(rows) == len(rep.rows)
        total_cells = sum(len(r) for r in rows)
        assert total_cells == len(rows) * len(columns)

    def test_empty_rows_header_only(self):
        cfg = _cfg(kind="divergence", m=[8], s=2, n=3, trials=1, seed=0)
        rep = run_experiment(cfg)
        rep.rows = []
        text = report_to_csv(rep)
        assert text == ",".join(rep.columns) + "\n"

    def test_json_round_trip(self, tmp_path):
        cfg = _cfg(kind="divergence", m=[8], s=2, n=3, trials=5, seed=0)
        rep = run_experiment(cfg)
        path = str(tmp_path / "report.json")
        emit_report(rep, "json", path)
        assert load_report_json(path) == rep

    def test_csv_emission(self, tmp_path):
        cfg = _cfg(kind="psi2_scaling", m=64, s=4, mc_samples=1000, seed=0)
        rep = run_experiment(cfg)
        path = str(tmp_path / "rep.csv")
        emit_report(rep, "csv", path)
        with open(path) as fh:
            assert fh.read() == report_to_csv(rep)

    def test_unknown_format(self, tmp_path):
        cfg = _cfg(kind="psi2_scaling", m=64, s=4, mc_samples=1000, seed=0)
        rep = run_experiment(cfg)
        with pytest.raises(ParameterError):
            emit_report(rep, "xml", str(tmp_path / "rep.xml"))


class TestDeterminism:
    def test_byte_identical_csv_across_thread_counts(self, monkeypatch):
        cfg = _cfg(kind="divergence", m=[16, 32], s=2, n=4, trials=30, seed=5)
        outputs = []
        for threads in ("1", "3", "8"):
            monkeypatch.setenv("SUBEMB_THREADS", threads)
            outputs.append(report_to_csv(run_experiment(cfg)))
        assert outputs[0] == outputs[1] == outputs[2]

    def test_worker_count_resolution(self, monkeypatch):
        monkeypatch.setenv("SUBEMB_THREADS", "6")
        assert worker_count() == 6
        monkeypatch.setenv("SUBEMB_THREADS", "zero")
        with pytest.raises(ParameterError):
            worker_count()
        monkeypatch.setenv("SUBEMB_THREADS", "0")
        with pytest.raises(ParameterError):
            worker_count()
        monkeypatch.delenv("SUBEMB_THREADS")
        assert worker_count() >= 1


def _run_cli(*args, **kw):
    return subprocess.run([sys.executable, "-m", "subemb.cli", *args],
                          capture_output=True, text=True, **kw)


class TestCli:
    def test_generate_round_trip(self):
        from subemb import parse_matrix
        res = _run_cli("generate", "--variant", "exact_sparse", "--m", "6",
                       "--n", "3", "--s", "2", "--seed", "11")
        assert res.returncode == 0
        A = parse_matrix(res.stdout)
        assert (A.m, A.n) == (6, 3)

    def test_oracle_command(self):
        res = _run_cli("oracle", "choose_n_for_lower_bound", "2", "1")
        assert res.returncode == 0
        assert res.stdout.strip() == "1286"

    def test_width_command(self):
        res = _run_cli("width", "--set", "singleton", "--n", "3",
                       "--samples", "500", "--kind", "complexity")
        assert res.returncode == 0
        payload = json.loads(res.stdout)
        assert payload["samples"] == 500

    def test_isometry_command(self):
        res = _run_cli("isometry", "--variant", "exact_sparse", "--m", "9",
                       "--n", "3", "--s", "2", "--set", "singleton",
                       "--trials", "20")
        assert res.returncode == 0
        payload = json.loads(res.stdout)
        assert payload["mean"] == 0.0  # lambda defaults to sqrt(s)

    def test_experiment_run_csv(self, tmp_path):
        out = tmp_path / "div.csv"
        config = {"kind": "divergence", "m": [8, 16], "s": 2, "n": 3,
                  "trials": 5, "seed": 0, "output": str(out)}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        res = _run_cli("experiment", "run", "--config", str(cfg_path))
        assert res.returncode == 0
        columns, rows = parse_report_csv(out.read_text())
        assert len(rows) == 2 and columns[0] == "kind"

    def test_config_error_exit_2(self, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"kind": "divergence", "m": [4],
                                        "n": 4, "mystery": True}))
        res = _run_cli("experiment", "run", "--config", str(cfg_path))
        assert res.returncode == 2

    def test_budget_error_exit_3(self):
        res = _run_cli("oracle", "collision_probability", "100000", "50000")
        assert res.returncode == 3

    def test_io_error_exit_4(self, tmp_path):
        config = {"kind": "psi2_scaling", "m": 64, "s": 4, "mc_samples": 500,
                  "seed": 0, "output": "/nonexistent-dir/out.csv"}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        res = _run_cli("experiment", "run", "--config", str(cfg_path))
        assert res.returncode == 4

    def test_parameter_error_exit_2(self):
        res = _run_cli("generate", "--variant", "exact_sparse", "--m", "4",
                       "--n", "2", "--s", "9")
        assert res.returncode == 2
