"""Command line entry points: the benchmark driver and the session server."""

from __future__ import annotations

import sys
import time

import click

from cpbo.bench import OracleConfig, run_experiment, summarize as summarize_dir
from cpbo.problems import PROBLEMS

METHOD_CHOICES = ["euboc", "euboc-cold", "eubo", "eubo-cons", "random"]


@click.group()
def main():
    """Simulation benchmark for constrained preference-based optimization."""


@main.command()
@click.option("--problem", type=click.Choice(sorted(PROBLEMS)), required=True)
@click.option("--methods", default="euboc,random", show_default=True,
              help="comma-separated subset of: " + ",".join(METHOD_CHOICES))
@click.option("--iters", default=50, show_default=True, type=int)
@click.option("--runs", default=20, show_default=True, type=int)
@click.option("--warm-points", default=200, show_default=True, type=int)
@click.option("--oracle", default="noiseless", show_default=True,
              type=click.Choice(["noiseless", "thurstone"]))
@click.option("--sigma-sim", default=1.0, show_default=True, type=float)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--problem-seed", default=0, show_default=True, type=int,
              help="seed for problems with randomized instances (refmatch6)")
@click.option("--out", "out_dir", required=True, type=click.Path())
def run(problem, methods, iters, runs, warm_points, oracle, sigma_sim, seed, problem_seed, out_dir):
    """Run the benchmark and write runs.csv / metrics.csv / summary.csv."""
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    bad = [m for m in method_list if m not in METHOD_CHOICES]
    if bad or not method_list:
        raise click.UsageError(f"invalid methods: {bad or methods!r}")
    if iters < 1 or runs < 1 or warm_points < 0:
        raise click.UsageError("iters/runs must be >= 1 and warm-points >= 0")
    spec = PROBLEMS[problem](seed=problem_seed)
    t0 = time.time()

    def progress(method, r):
        click.echo(f"[{time.time() - t0:7.1f}s] {problem} {method} run {r + 1}/{runs}")

    run_experiment(
        spec,
        method_list,
        runs=runs,
        iters=iters,
        warm_points=warm_points,
        oracle=OracleConfig(noise=oracle, sigma_sim=sigma_sim),
        seed=seed,
        out_dir=out_dir,
        progress=progress,
    )
    click.echo(f"wrote {out_dir} in {time.time() - t0:.1f}s")


@main.command()
@click.argument("out_dir", type=click.Path(exists=True))
def summarize(out_dir):
    """Rebuild summary.csv from an existing metrics.csv."""
    path = summarize_dir(out_dir)
    click.echo(f"wrote {path}")


@click.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8731, show_default=True, type=int)
@click.option("--data-dir", default="./sessions", show_default=True, type=click.Path())
@click.option("--default-budget", default=50, show_default=True, type=int)
def serve(host, port, data_dir, default_budget):
    """Start the interactive pairwise-comparison session service."""
    import uvicorn

    from cpbo.service import create_app

    app = create_app(data_dir=data_dir, default_budget=default_budget)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
