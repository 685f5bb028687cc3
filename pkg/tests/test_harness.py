import math

import numpy as np
import pytest
import yaml

from tvkron.harness import (ConfigError, ExperimentConfig, ResultRow, Scenario, best_lambda,
                            emit_plot_data, ingest_csv, plot_points, read_results, run_experiment,
                            unit_seeds)

TINY = dict(n=10, m_grid=[40, 60], lambda_grid=[0.5, 1.0, 2.0], lambda_relative=True,
            num_seeds=1, b_edges=8, b_churn=2, b_change_points=2, t0_grid=[0.5])


def cfg(tmp_path, **kw):
    return ExperimentConfig.from_dict({**TINY, "output_dir": str(tmp_path / "out"), **kw})


def test_grid_produces_one_row_per_cell(tmp_path):
    table = run_experiment(cfg(tmp_path))
    assert len(table.rows) == 6 and not table.errors
    assert len({(r.m, r.lam) for r in table.rows}) == 6
    for r in table.rows:
        assert -1 <= r.mcc <= 1 and r.rel_fro >= 0 and r.rel_l2 >= 0
    assert (tmp_path / "out" / "results.csv").read_text().count("\n") == 7


def test_results_are_byte_identical_across_runs(tmp_path):
    a = run_experiment(cfg(tmp_path, output_dir=str(tmp_path / "a")))
    b = run_experiment(cfg(tmp_path, output_dir=str(tmp_path / "b")))
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    assert a.rows == b.rows


def test_results_roundtrip(tmp_path):
    table = run_experiment(cfg(tmp_path))
    back = read_results(tmp_path / "out" / "results.csv")
    assert back.rows == table.rows


def test_a_rows_have_nan_t0(tmp_path):
    table = run_experiment(cfg(tmp_path, estimate_a=True, lambda_a_grid=[1.0], n=30, m_grid=[30]))
    a_rows = table.select(target="a")
    assert len(a_rows) == 1 and math.isnan(a_rows[0].t0)


def test_failures_are_isolated(tmp_path):
    # a huge fixed trace makes the smoothed covariance diagonal negative
    table = run_experiment(cfg(tmp_path, trace_a_mode=1e6, lambda_relative=False,
                               lambda_grid=[0.01, 1e7]))
    assert table.errors and all(e.target == "b" for e in table.errors)
    assert {r.lam for r in table.rows} == {1e7}
    assert "diagonal" in (tmp_path / "out" / "errors.csv").read_text()


def test_seeds_are_independent_per_unit():
    assert len({unit_seeds(s, m) for s in range(5) for m in (100, 200)}) == 10
    assert unit_seeds(1, 100) == unit_seeds(1, 100)
    assert unit_seeds(1, 100, base_seed=1) != unit_seeds(1, 100)


def test_balanced_scaling():
    real = Scenario(n=20, b_edges=20, b_churn=2, b_change_points=2).build(50, 0)
    tau_b = np.mean(np.trace(real.model.b.matrices, axis1=1, axis2=2)) / 20
    assert tau_b == pytest.approx(real.model.a.trace / 50)
    np.testing.assert_allclose(real.b_true(0.5) @ real.theta_true(0.5), np.eye(20), atol=1e-10)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown config keys: colour"):
        ExperimentConfig.from_dict({**TINY, "colour": 1})
    with pytest.raises(ConfigError, match="missing config keys: num_seeds"):
        ExperimentConfig.from_dict({k: v for k, v in TINY.items() if k != "num_seeds"})
    with pytest.raises(ConfigError, match="topology_a"):
        ExperimentConfig.from_dict({**TINY, "topology_a": "ar2"})
    with pytest.raises(ConfigError, match="h must"):
        ExperimentConfig.from_dict({**TINY, "h": 0.0})
    with pytest.raises(ConfigError, match="lambda_a_grid"):
        ExperimentConfig.from_dict({**TINY, "estimate_a": True})
    p = tmp_path / "bad.yaml"
    p.write_text("n: [unclosed\n")
    with pytest.raises(ConfigError, match="cannot read"):
        ExperimentConfig.load(p)
    p.write_text(yaml.safe_dump(TINY))
    assert ExperimentConfig.load(p).m_grid == (40, 60)


def row(seed, lam, t0, val):
    return ResultRow(seed, 100, 10, lam, 0.1, t0, val, val, val)


def test_plot_points_average_t0_then_seeds():
    rows = [row(0, 1.0, 0.1, 0.2), row(0, 1.0, 0.5, 0.4), row(1, 1.0, 0.1, 0.6), row(1, 1.0, 0.5, 0.6)]
    (p,) = plot_points(rows, "mcc")
    # seed means 0.3 and 0.6
    assert p.mean == pytest.approx(0.45) and p.count == 2
    assert p.stderr == pytest.approx(np.std([0.3, 0.6], ddof=1) / np.sqrt(2))


def test_best_lambda_skips_incomplete():
    rows = [row(0, 1.0, 0.5, 0.5), row(1, 1.0, 0.5, 0.5), row(0, 2.0, 0.5, 0.1)]
    assert best_lambda(rows, "rel_fro", minimize=True).lam == 1.0


def test_emit_plot_data(tmp_path):
    rows = [row(0, 1.0, 0.5, 0.3), row(1, 1.0, 0.5, 0.5), row(0, 2.0, 0.5, 0.1)]
    paths = emit_plot_data(rows, "m", "mcc", tmp_path)
    assert [p.name for p in paths] == ["mcc_m100.csv"]
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "lambda,mean,stderr,count" and len(lines) == 3
    with pytest.raises(ValueError, match="unknown group"):
        emit_plot_data(rows, "colour", "mcc", tmp_path)
    with pytest.raises(ValueError, match="empty"):
        emit_plot_data([], "m", "mcc", tmp_path)


def test_ingest_transpose(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2,3\n4,5,6\n")
    assert ingest_csv(p).values.shape == (2, 3)
    assert ingest_csv(p, transpose=True).values.shape == (3, 2)
