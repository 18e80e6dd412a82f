import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from adasense.bench import (
    CSV_HEADER,
    ExperimentConfig,
    cmd_bench,
    cmd_run,
    cmd_sweep_adaptivity,
    default_s,
    paired_comparison,
    resolve_threads,
    run_trials,
)
from adasense.cli import main
from adasense.errors import ConfigError
from adasense.matrixio import format_matrix, parse_matrix, read_matrix, write_matrix

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _cfg(**kw):
    spec = {"prior": {"fixture": "gaussian-diag3"}, "N": 2, "r": 1, "trials": 2, "seed": 1}
    spec.update(kw)
    return spec


def _write(tmp_path, spec, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return path


def test_default_s():
    assert [default_s(r) for r in (1, 2, 3, 6, 16)] == [2, 3, 4, 8, 22]


def test_run_writes_csv_and_masks(tmp_path):
    cfg = ExperimentConfig.load(CONFIGS / "run_gaussian.json")
    rows = cmd_run(cfg, tmp_path)
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER == "strategy,N,r,s,trial,mse,psnr,time_ms,status"
    assert len(lines) == 2 and rows[0].status == "ok"
    mask = read_matrix(tmp_path / "masks" / "trial_0000_rows.txt")
    np.testing.assert_allclose(mask, np.eye(3)[:2], atol=1e-12)
    export = json.loads((tmp_path / "masks" / "trial_0000.json").read_text())
    assert export["status"] == "ok" and export["orthonormal"] is True
    assert (tmp_path / "summary.csv").exists()


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="trials"):
        ExperimentConfig.from_dict(_cfg(trials=0))
    with pytest.raises(ConfigError, match="missing.json"):
        ExperimentConfig.from_dict(_cfg(prior="missing.json"), tmp_path)
    with pytest.raises(ConfigError, match="strategies"):
        ExperimentConfig.from_dict(_cfg(strategies=["adasense-unconstrained", "telepathy"]))
    with pytest.raises(ConfigError, match="fixture"):
        ExperimentConfig.from_dict(_cfg(prior={"fixture": "nope"}))
    bad = tmp_path / "bad.json"
    bad.write_text('{"prior": ')
    with pytest.raises(ConfigError, match="bad.json:1"):
        ExperimentConfig.load(bad)


def test_empty_strategy_list(tmp_path):
    with pytest.raises(ConfigError, match="at least one"):
        cmd_bench(ExperimentConfig.from_dict(_cfg(strategies=[])), tmp_path)


def test_grid_budget_violation(tmp_path):
    cfg = ExperimentConfig.from_dict(_cfg(grid=[[1, 2], [3, 1]], budget=2))
    with pytest.raises(ConfigError, match="budget"):
        cmd_sweep_adaptivity(cfg, tmp_path)


def test_single_pair_sweep_equals_run(tmp_path):
    cfg = ExperimentConfig.from_dict(_cfg(grid=[[2, 1]], s=4))
    sweep = cmd_sweep_adaptivity(cfg, tmp_path / "a")
    run = cmd_run(cfg, tmp_path / "b")
    assert [r.to_csv() for r in sweep] == [r.to_csv() for r in run]


def test_trials_are_paired_across_strategies():
    cfg = ExperimentConfig.from_dict(
        _cfg(strategies=["adasense-unconstrained", "offline-pca"], selection={"covariance": "exact"}, trials=4)
    )
    a = [o.row.mse for o in run_trials(cfg, "adasense-unconstrained")]
    b = [o.row.mse for o in run_trials(cfg, "offline-pca")]
    # Gaussian prior: adaptive = offline PCA, trial by trial
    np.testing.assert_allclose(a, b, rtol=1e-9)


def test_threads_do_not_change_results():
    cfg = ExperimentConfig.from_dict(_cfg(prior={"fixture": "gmm-8"}, N=2, r=2, trials=6,
                                          sampler={"sampler": "ddrm", "steps": 5}))
    one = [o.row.to_csv() for o in run_trials(cfg, "adasense-unconstrained", threads=1)]
    four = [o.row.to_csv() for o in run_trials(cfg, "adasense-unconstrained", threads=4)]
    assert one == four


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("ADASENSE_THREADS", raising=False)
    assert resolve_threads(None, 3) == 3
    monkeypatch.setenv("ADASENSE_THREADS", "5")
    assert resolve_threads(None, 3) == 5
    assert resolve_threads(2, 3) == 2
    monkeypatch.setenv("ADASENSE_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_threads(None, 1)


def test_paired_comparison_direction():
    rng = np.random.default_rng(0)
    a = rng.random(100)
    res = paired_comparison(a, a + 0.1 + 0.01 * rng.standard_normal(100))
    assert res["p_less"] < 1e-6 and res["p_greater"] > 0.99


def test_bench_is_deterministic(tmp_path):
    path = _write(tmp_path, _cfg(prior={"fixture": "gmm-3d"}, strategies=["adasense-unconstrained", "random-orthonormal"],
                                 trials=5, s=8))
    assert main(["bench", "--config", str(path), "--out", str(tmp_path / "a")]) == 0
    assert main(["bench", "--config", str(path), "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    assert b",nan,ok" in a


def test_cli_exit_codes(tmp_path, capsys):
    missing = _write(tmp_path, _cfg(prior="nowhere.prior.json"))
    assert main(["run", "--config", str(missing), "--out", str(tmp_path / "o")]) == 2
    assert "nowhere.prior.json" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o")]) == 2
    ok = _write(tmp_path, _cfg(), "ok.json")
    assert main(["run", "--config", str(ok), "--out", str(tmp_path / "o"), "--trials", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2


def test_cli_runs_shipped_config(tmp_path, capsys):
    cfg = tmp_path / "configs"
    shutil.copytree(CONFIGS, cfg)
    assert main(["run", "--config", str(cfg / "run_gaussian.json"), "--out", str(tmp_path / "o")]) == 0
    assert "adasense" in capsys.readouterr().out


def test_matrix_io_round_trip(tmp_path):
    a = np.random.default_rng(0).standard_normal((3, 4))
    write_matrix(tmp_path / "m.txt", a)
    assert np.array_equal(read_matrix(tmp_path / "m.txt"), a)
    assert parse_matrix(format_matrix(np.zeros((0, 3)))).shape == (0, 3)
    with pytest.raises(ConfigError):
        parse_matrix("2 2\n1 2\n3\n")


def test_ground_truth_file(tmp_path):
    write_matrix(tmp_path / "gt.txt", np.array([[1.0, 2.0, 3.0]]))
    cfg = ExperimentConfig.from_dict(_cfg(ground_truth="gt.txt", selection={"covariance": "exact"}), tmp_path)
    rows = cmd_run(cfg, tmp_path / "o")
    # rows e1, e2 measured; third coordinate restored to the prior mean 0
    assert rows[0].mse == pytest.approx(9.0 / 3)
    assert all(not math.isnan(r.psnr) for r in rows)
