import csv
import hashlib
import os

import numpy as np
import pytest
from click.testing import CliRunner
from scipy.stats import norm

from cpbo.bench import (
    OracleConfig,
    RunRecord,
    feasible_fraction,
    optimality_gap,
    run_experiment,
    run_single,
    simulate_choice,
)
from cpbo.cli import main
from cpbo.problems import gardner2d


def test_oracle_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(noise="loud")
    with pytest.raises(ValueError):
        OracleConfig(noise="thurstone", sigma_sim=0.0)


def test_simulate_choice_noiseless_argmax():
    p = gardner2d()
    rng = np.random.default_rng(0)
    oracle = OracleConfig()
    # f(3.8, 0) > f(0, 0) on this problem
    assert p.f([3.8, 0.0]) > p.f([0.0, 0.0])
    assert simulate_choice(p, [3.8, 0.0], [0.0, 0.0], oracle, rng) == "i"
    assert simulate_choice(p, [0.0, 0.0], [3.8, 0.0], oracle, rng) == "j"


def test_simulate_choice_tie_rule():
    p = gardner2d()
    rng = np.random.default_rng(1)
    oracle = OracleConfig()
    x = [1.0, 2.0]
    wins = sum(simulate_choice(p, x, x, oracle, rng) == "i" for _ in range(10_000))
    assert abs(wins / 10_000 - 0.5) <= 0.02


def test_simulate_choice_thurstone_rate():
    p = gardner2d()
    sigma = 0.7
    oracle = OracleConfig(noise="thurstone", sigma_sim=sigma)
    # find points with f_i - f_j = sqrt(2)*sigma via a 1D scan on x2 = 0
    target = np.sqrt(2.0) * sigma
    xs = np.linspace(0, 6, 20001)
    fs = np.array([p.f([x, 0.0]) for x in xs])
    j = 0
    i = int(np.argmin(np.abs(fs - (fs[j] + target))))
    assert abs((fs[i] - fs[j]) - target) < 1e-3
    rng = np.random.default_rng(2)
    wins = sum(
        simulate_choice(p, [xs[i], 0.0], [xs[j], 0.0], oracle, rng) == "i"
        for _ in range(10_000)
    )
    assert abs(wins / 10_000 - norm.cdf(1.0)) <= 0.013


def _random_record(problem, seed, iters=12):
    return run_single(problem, "random", seed, iters=iters, warm_points=0)


def test_gap_matches_bruteforce_and_is_monotone():
    p = gardner2d()
    rec = _random_record(p, 5)
    gaps = optimality_gap(rec, p)
    stored = np.array([r["gap"] for r in rec.rows])
    assert np.allclose(gaps, stored)
    assert np.all(np.diff(gaps) <= 1e-12)


def test_no_feasible_gap_constant():
    p = gardner2d()
    rows = []
    for n in range(1, 6):
        rows.append(
            {"iter": n, "x_i": np.zeros(2), "x_j": np.zeros(2), "gap": None}
        )
    rec = RunRecord(method="random", seed=0, rows=rows)
    gaps = optimality_gap(rec, p)
    assert np.allclose(gaps, 1.88875 - (-2.0))
    assert gaps[0] == pytest.approx(3.88875)


def test_feasible_fraction_bounds_and_recount():
    p = gardner2d()
    rec = _random_record(p, 6)
    frac = feasible_fraction(rec, p)
    stored = np.array([r["feasible_frac"] for r in rec.rows])
    assert np.allclose(frac, stored)
    assert np.all((0 <= frac) & (frac <= 1))


def test_engine_feasibility_flags_agree_with_truth():
    p = gardner2d()
    rec = run_single(p, "eubo-cons", 3, iters=5, warm_points=0)
    for row in rec.rows:
        assert row["feas_i"] == (p.c(row["x_i"]) >= p.lam)
        assert row["feas_j"] == (p.c(row["x_j"]) >= p.lam)


def test_run_experiment_shapes_and_determinism(tmp_path):
    p = gardner2d()
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    for d in (d1, d2):
        run_experiment(p, ["random"], runs=2, iters=3, warm_points=0, seed=3, out_dir=str(d))
    with open(d1 / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    # 2 runs x 3 iters x 2 metrics
    assert len(rows) == 12
    for name in ("runs.csv", "metrics.csv", "summary.csv"):
        h1 = hashlib.sha256((d1 / name).read_bytes()).hexdigest()
        h2 = hashlib.sha256((d2 / name).read_bytes()).hexdigest()
        assert h1 == h2


def test_cli_run_and_summarize(tmp_path):
    out = tmp_path / "out"
    r = CliRunner().invoke(
        main,
        ["run", "--problem", "gardner2d", "--methods", "random", "--iters", "2",
         "--runs", "1", "--warm-points", "0", "--out", str(out)],
    )
    assert r.exit_code == 0, r.output
    assert (out / "summary.csv").exists()
    r2 = CliRunner().invoke(main, ["summarize", str(out)])
    assert r2.exit_code == 0


def test_cli_invalid_config_exits_2(tmp_path):
    r = CliRunner().invoke(
        main,
        ["run", "--problem", "gardner2d", "--methods", "bogus", "--out", str(tmp_path)],
    )
    assert r.exit_code == 2
    r2 = CliRunner().invoke(
        main,
        ["run", "--problem", "nope", "--methods", "random", "--out", str(tmp_path)],
    )
    assert r2.exit_code == 2
    r3 = CliRunner().invoke(
        main,
        ["run", "--problem", "gardner2d", "--methods", "random", "--runs", "0",
         "--out", str(tmp_path)],
    )
    assert r3.exit_code == 2
