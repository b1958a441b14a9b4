"""Synthetic test problems for the simulation benchmark.

Each problem is a maximization of f subject to c(x) >= lambda on a native box
domain, which is mapped affinely to the unit box for the engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    objective: Callable[[np.ndarray], float]
    constraint: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    lam: float
    f_opt: float
    f_min: float
    # optimality gaps for runs with no feasible observation fall back to
    # f_opt - f_min (the worst attainable objective value)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (self.dim,) or hi.shape != (self.dim,):
            raise ValueError("bounds must match problem dimension")
        if not np.all(hi > lo):
            raise ValueError("upper bounds must exceed lower bounds")
        if self.f_min > self.f_opt:
            raise ValueError("f_min must be <= f_opt")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def to_native(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u) * (self.upper - self.lower)

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.lower) / (self.upper - self.lower)

    def f(self, x) -> float:
        return float(self.objective(np.asarray(x, dtype=float)))

    def c(self, x) -> float:
        return float(self.constraint(np.asarray(x, dtype=float)))

    def feasible(self, x) -> bool:
        return self.c(x) >= self.lam


def gardner2d() -> ProblemSpec:
    """2D sine/cosine problem; feasible where -cos(x1+x2) >= 0.5."""

    def f(x):
        return -np.cos(2.0 * x[0]) * np.cos(x[1]) - np.sin(x[0])

    def c(x):
        return -np.cos(x[0]) * np.cos(x[1]) + np.sin(x[0]) * np.sin(x[1])

    return ProblemSpec(
        name="gardner2d",
        dim=2,
        objective=f,
        constraint=c,
        lower=np.zeros(2),
        upper=np.full(2, 6.0),
        lam=0.5,
        f_opt=1.88875,
        f_min=-2.0,
    )


_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_H6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def hartmann6c() -> ProblemSpec:
    """Hartmann-6 objective with a norm constraint -||x|| >= -1."""

    def f(x):
        inner = np.sum(_H6_A * (x[None, :] - _H6_P) ** 2, axis=1)
        return float(np.sum(_H6_ALPHA * np.exp(-inner)))

    def c(x):
        return -float(np.linalg.norm(x))

    return ProblemSpec(
        name="hartmann6",
        dim=6,
        objective=f,
        constraint=c,
        lower=np.zeros(6),
        upper=np.ones(6),
        lam=-1.0,
        f_opt=3.32237,
        f_min=0.0,
    )


def refmatch6(seed: int = 0) -> ProblemSpec:
    """6D reference-matching analog of the banner-design setting.

    The objective rewards closeness (L1) to a hidden feasible reference point;
    the constraint is a seeded sum of three Gaussian bumps with the threshold
    set to the mean constraint value over 1000 uniform samples.  The gap
    metric for this problem is the parameter gap |x - x_ref|_1, with the
    maximum attainable gap as the no-feasible-observation fallback.
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(size=(3, 6))
    scales = rng.uniform(0.1, 0.3, size=3)

    def c(x):
        d2 = np.sum((x[None, :] - centers) ** 2, axis=1)
        return float(np.sum(np.exp(-d2 / (2.0 * scales**2))))

    lam_samples = rng.uniform(size=(1000, 6))
    lam = float(np.mean([c(s) for s in lam_samples]))

    # draw the reference from the feasible region
    x_ref = None
    while x_ref is None:
        cand = rng.uniform(size=6)
        if c(cand) >= lam:
            x_ref = cand

    def f(x):
        return -float(np.sum(np.abs(x - x_ref)))

    max_gap = float(np.sum(np.maximum(x_ref, 1.0 - x_ref)))
    return ProblemSpec(
        name="refmatch6",
        dim=6,
        objective=f,
        constraint=c,
        lower=np.zeros(6),
        upper=np.ones(6),
        lam=lam,
        f_opt=0.0,
        f_min=-max_gap,
    )


PROBLEMS = {
    "gardner2d": lambda seed=0: gardner2d(),
    "hartmann6": lambda seed=0: hartmann6c(),
    "refmatch6": refmatch6,
}
