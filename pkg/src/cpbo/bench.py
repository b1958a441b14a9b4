"""Simulation benchmark: simulated choosers, metrics, and the multi-run driver.

Outputs are deterministic per (seed, method, run index): a wide per-row log
CSV plus a long metric CSV (method,seed,iter,metric,value) and a summary CSV
(method,iter,metric,mean,std).
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from cpbo.engine import Engine, Policy, auto_win_rule, _child_seed
from cpbo.problems import ProblemSpec

NOISELESS = "noiseless"
THURSTONE = "thurstone"


@dataclass(frozen=True)
class OracleConfig:
    noise: str = NOISELESS
    sigma_sim: float = 1.0

    def __post_init__(self):
        if self.noise not in (NOISELESS, THURSTONE):
            raise ValueError(f"unknown oracle noise mode {self.noise!r}")
        if self.noise == THURSTONE and self.sigma_sim <= 0:
            raise ValueError("sigma_sim must be positive")


def simulate_choice(problem: ProblemSpec, x_i, x_j, oracle: OracleConfig, rng) -> str:
    """Winner 'i' or 'j' for native-domain points under the simulated chooser."""
    fi, fj = problem.f(x_i), problem.f(x_j)
    if oracle.noise == NOISELESS:
        if fi == fj:
            return "i" if rng.random() < 0.5 else "j"
        return "i" if fi > fj else "j"
    p_i = float(ndtr((fi - fj) / (np.sqrt(2.0) * oracle.sigma_sim)))
    return "i" if rng.random() < p_i else "j"


@dataclass
class RunRecord:
    method: str
    seed: int
    rows: list  # dict per iteration


def _run_rows(problem, engine, method, run_seed, iters, oracle, auto_win):
    rng = np.random.default_rng(_child_seed(run_seed, 900))
    rows = []
    best_feasible_f = None
    n_feasible_pts = 0
    for n in range(1, iters + 1):
        ui, uj = engine.propose_pair()
        xi, xj = problem.to_native(ui), problem.to_native(uj)
        ci, cj = problem.c(xi), problem.c(xj)
        winner = None
        auto = False
        if auto_win:
            w = auto_win_rule(ci, cj, problem.lam)
            if w is not None:
                winner, auto = w, True
        if winner is None:
            winner = simulate_choice(problem, xi, xj, oracle, rng)
        engine.apply_feedback(winner, ci, cj, auto_won=auto)

        fi, fj = problem.f(xi), problem.f(xj)
        feas_i, feas_j = ci >= problem.lam, cj >= problem.lam
        n_feasible_pts += int(feas_i) + int(feas_j)
        if feas_i and (best_feasible_f is None or fi > best_feasible_f):
            best_feasible_f = fi
        if feas_j and (best_feasible_f is None or fj > best_feasible_f):
            best_feasible_f = fj
        gap = problem.f_opt - (best_feasible_f if best_feasible_f is not None else problem.f_min)
        rows.append(
            {
                "method": method,
                "seed": run_seed,
                "iter": n,
                "x_i": xi,
                "x_j": xj,
                "winner": winner,
                "auto_won": auto,
                "c_i": ci,
                "c_j": cj,
                "f_i": fi,
                "f_j": fj,
                "feas_i": feas_i,
                "feas_j": feas_j,
                "gap": gap,
                "feasible_frac": n_feasible_pts / (2 * n),
            }
        )
    return rows


def run_single(
    problem: ProblemSpec,
    method: str,
    run_seed: int,
    iters: int = 50,
    warm_points: int = 200,
    oracle: OracleConfig = OracleConfig(),
) -> RunRecord:
    policy = Policy(method)
    engine = Engine(problem.dim, policy, lam=problem.lam, seed=run_seed)
    if policy is Policy.EUBOC and warm_points > 0:
        engine.warm_start(lambda u: problem.c(problem.to_native(u)), warm_points)
    rows = _run_rows(
        problem,
        engine,
        method,
        run_seed,
        iters,
        oracle,
        auto_win=(policy is Policy.EUBO_CONS),
    )
    return RunRecord(method=method, seed=run_seed, rows=rows)


def optimality_gap(record: RunRecord, problem: ProblemSpec) -> np.ndarray:
    """Recomputed (not stored) gap curve: brute-force rescan of the record."""
    gaps = []
    best = None
    for row in record.rows:
        for x, key in ((row["x_i"], "c_i"), (row["x_j"], "c_j")):
            if problem.c(x) >= problem.lam:
                fv = problem.f(x)
                if best is None or fv > best:
                    best = fv
        gaps.append(problem.f_opt - (best if best is not None else problem.f_min))
    return np.array(gaps)


def feasible_fraction(record: RunRecord, problem: ProblemSpec) -> np.ndarray:
    count = 0
    out = []
    for n, row in enumerate(record.rows, start=1):
        count += int(problem.c(row["x_i"]) >= problem.lam)
        count += int(problem.c(row["x_j"]) >= problem.lam)
        out.append(count / (2 * n))
    return np.array(out)


_WIDE_FIELDS = [
    "method",
    "seed",
    "iter",
    "winner",
    "auto_won",
    "c_i",
    "c_j",
    "f_i",
    "f_j",
    "feas_i",
    "feas_j",
    "gap",
    "feasible_frac",
]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_run_files(records: list[RunRecord], problem: ProblemSpec, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    dim = problem.dim
    wide_fields = _WIDE_FIELDS + [f"xi_{d}" for d in range(dim)] + [f"xj_{d}" for d in range(dim)]
    with open(os.path.join(out_dir, "runs.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(wide_fields)
        for rec in records:
            for row in rec.rows:
                vals = [_fmt(row[k]) for k in _WIDE_FIELDS]
                vals += [_fmt(v) for v in row["x_i"]]
                vals += [_fmt(v) for v in row["x_j"]]
                w.writerow(vals)
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seed", "iter", "metric", "value"])
        for rec in records:
            for row in rec.rows:
                w.writerow([rec.method, rec.seed, row["iter"], "gap", _fmt(row["gap"])])
                w.writerow(
                    [rec.method, rec.seed, row["iter"], "feasible_frac", _fmt(row["feasible_frac"])]
                )


def summarize(out_dir: str) -> str:
    """Aggregate metrics.csv into summary.csv (method,iter,metric,mean,std)."""
    path = os.path.join(out_dir, "metrics.csv")
    groups: dict[tuple, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["method"], int(row["iter"]), row["metric"])
            groups.setdefault(key, []).append(float(row["value"]))
    out_path = os.path.join(out_dir, "summary.csv")
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "iter", "metric", "mean", "std"])
        for key in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
            vals = np.array(groups[key])
            w.writerow([key[0], key[1], key[2], _fmt(vals.mean()), _fmt(vals.std())])
    return out_path


def run_experiment(
    problem: ProblemSpec,
    methods: list[str],
    runs: int = 20,
    iters: int = 50,
    warm_points: int = 200,
    oracle: OracleConfig = OracleConfig(),
    seed: int = 7,
    out_dir: str | None = None,
    progress=None,
) -> list[RunRecord]:
    for m in methods:
        Policy(m)  # validate early
    records = []
    for m in methods:
        for r in range(runs):
            run_seed = _child_seed(seed, 500, sorted(p.value for p in Policy).index(m), r)
            rec = run_single(
                problem, m, run_seed, iters=iters, warm_points=warm_points, oracle=oracle
            )
            records.append(rec)
            if progress is not None:
                progress(m, r)
    if out_dir is not None:
        write_run_files(records, problem, out_dir)
        summarize(out_dir)
    return records


def mean_metric(records: list[RunRecord], method: str, metric: str) -> np.ndarray:
    """Per-iteration mean of a stored metric across the runs of one method."""
    curves = [
        [row[metric] for row in rec.rows] for rec in records if rec.method == method
    ]
    return np.mean(np.array(curves, dtype=float), axis=0)
