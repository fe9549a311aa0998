import json

import numpy as np
import pytest

from faircca import cli, experiments
from faircca.cli import main
from faircca.errors import ConfigError, RankDeficientStep
from faircca.experiments import (
    ExperimentConfig,
    derive_seed,
    run_compare,
    run_k_sweep,
    run_lambda_sweep,
    run_scaling,
)
from faircca.io import read_table

SMALL = {"synth": {"Dx": 6, "Dy": 6, "sizes": [60, 80, 100], "seed": 0}}


def small_config(**kw):
    base = dict(data=SMALL, optimizer={"T_max": 60})
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_empty_methods(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(methods=[])

    @pytest.mark.parametrize("bad", [dict(methods=["pca"]), dict(lambda_grid=[-1.0]),
                                     dict(repetitions=0), dict(data={"sql": {}}),
                                     dict(method_params={"sf_cca": {"eta0": -1.0}})])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)

    def test_report_is_a_config(self):
        cfg = small_config()
        assert ExperimentConfig.from_dict({"schema_version": 1, "config": cfg.to_dict()}) == cfg

    def test_cell_seeds_independent_of_order(self):
        assert derive_seed(0, 3) == derive_seed(0, 3) != derive_seed(0, 4)


class TestCompare:
    def test_single_group_degenerates(self):
        # Warm-started optimizers must reproduce CCA exactly when K = 1.
        cfg = ExperimentConfig(data={"synth": {"sizes": [2000]}},
                               method_params={"mf_cca": {"init": "global_cca"}, "sf_cca": {}})
        records, _, _ = run_compare(cfg)
        cca = records[0].report
        for rec in records:
            np.testing.assert_allclose(rec.report.rho, cca.rho, atol=1e-6)
            np.testing.assert_array_equal(rec.report.delta_sum, 0.0)

    def test_benchmark_ordering(self):
        records, _, _ = run_compare(ExperimentConfig())
        rep = {r.method: r.report for r in records}
        for r in range(2):
            assert rep["cca"].rho[r] >= rep["mf_cca"].rho[r] >= rep["sf_cca"].rho[r] - 1e-9
            assert rep["cca"].delta_sum[r] > rep["mf_cca"].delta_sum[r] > rep["sf_cca"].delta_sum[r]

    def test_table_and_report(self, tmp_path):
        cfg = small_config(out=str(tmp_path))
        records, (header, rows), report = run_compare(cfg)
        assert header[:4] == ["r", "cca_rho", "cca_delta_max", "cca_delta_sum"]
        assert len(rows) == 2
        assert read_table(tmp_path / "compare.csv") == (header, rows)
        on_disk = json.loads((tmp_path / "compare_report.json").read_text())
        assert on_disk["schema_version"] == 1
        assert on_disk["records"][1]["report"]["pct"] is not None
        assert on_disk == json.loads(json.dumps(report))

    def test_failure_is_isolated(self, monkeypatch):
        real = experiments.fit

        def flaky(data, cfg, optima=None):
            if cfg.method == "sf_cca":
                raise RankDeficientStep("injected")
            return real(data, cfg, optima)

        monkeypatch.setattr(experiments, "fit", flaky)
        records, (_, rows), _ = run_compare(small_config())
        assert rows[0][-3:] == [None, None, None]
        errs = {r.method: r.error for r in records}
        assert errs["cca"] is None and errs["mf_cca"] is None
        assert errs["sf_cca"] is not None


class TestSweeps:
    def test_lambda_zero_row_matches_cca(self):
        cfg = small_config(lambda_grid=[0.0])
        _, (_, rows), _ = run_lambda_sweep(cfg, jobs=1)
        records, _, _ = run_compare(small_config(methods=["cca"]))
        assert len(rows) == 1
        assert rows[0][1] == pytest.approx(records[0].report.rho[0], abs=1e-6)

    def test_parallel_matches_serial(self):
        cfg = small_config(lambda_grid=[0.1, 1.0, 10.0])
        _, (_, serial), _ = run_lambda_sweep(cfg, jobs=1)
        _, (_, parallel), _ = run_lambda_sweep(cfg, jobs=2)
        assert [r[:4] for r in serial] == [r[:4] for r in parallel]

    def test_k_sweep_trend(self):
        _, (_, rows), _ = run_k_sweep(ExperimentConfig(), jobs=1)
        by = {(r[0], r[1]): r[3] for r in rows}
        ks = sorted({r[0] for r in rows})
        cca = [by[(k, "cca")] for k in ks]
        assert np.all(np.diff(cca) >= 0)
        for k in ks:
            assert by[(k, "mf_cca")] < by[(k, "cca")] and by[(k, "sf_cca")] < by[(k, "cca")]

    def test_scaling_single_repetition(self):
        cfg = small_config(dim_grid=[6], size_grid=[300], scale_fixed_d=6, scale_fixed_n=300,
                           scale_groups=3)
        _, (header, rows), _ = run_scaling(cfg, jobs=1)
        assert header[3:5] == ["mean_seconds", "std_seconds"]
        assert len(rows) == 4 and all(r[4] == 0.0 for r in rows)

    def test_scaling_ordering(self):
        cfg = ExperimentConfig(dim_grid=[50, 100], size_grid=[600, 1200], repetitions=2)
        _, (_, rows), _ = run_scaling(cfg, jobs=1)
        by = {(r[0], r[1], r[2]): r[3] for r in rows}
        for axis, value, method in by:
            if method == "sf_cca":
                assert by[(axis, value, "sf_cca")] < by[(axis, value, "mf_cca")]


class TestCli:
    def test_compare_and_replay(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(small_config().to_dict()))
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        report = tmp_path / "a" / "compare_report.json"
        assert main(["compare", "--config", str(report), "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "compare.csv").read_bytes() == (tmp_path / "b" / "compare.csv").read_bytes()

    def test_synth_then_fit(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(small_config().to_dict()))
        assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                     "--method", "sf_cca", "--lambda", "1", "--penalty", "square",
                     "--out", str(tmp_path / "fit")]) == 0
        out = json.loads((tmp_path / "fit" / "fit.json").read_text())
        assert out["record"]["hyperparameters"]["lam"] == 1.0
        assert out["record"]["hyperparameters"]["penalty"] == "square"

    def test_config_error_exit_code(self, tmp_path):
        assert main(["fit", "--r", "0"]) == 2
        assert main(["compare", "--config", str(tmp_path / "missing.json")]) == 2

    def test_parse_error_exit_code(self, tmp_path):
        (tmp_path / "x.csv").write_text("group,a\n1,NA\n2,1\n")
        (tmp_path / "y.csv").write_text("b\n1\n2\n")
        assert main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv")]) == 2

    def test_numerical_error_exit_code(self, tmp_path, monkeypatch):
        def broken(*args, **kw):
            raise RankDeficientStep("injected")

        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(small_config().to_dict()))
        monkeypatch.setattr(cli, "fit", broken)
        assert main(["fit", "--config", str(cfg)]) == 1
        monkeypatch.setattr(experiments, "fit", broken)
        assert main(["compare", "--config", str(cfg)]) == 1

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit) as info:
            main(["fit", "--penalty", "cubic"])
        assert info.value.code == 2

    def test_jobs_env(self, monkeypatch):
        from faircca.experiments import default_jobs
        monkeypatch.setenv("FAIRCCA_JOBS", "3")
        assert default_jobs() == 3
