"""Acquisition values for pairwise queries and their joint maximization.

EUBO is the closed-form expected utility of the best of two candidates under
the Gaussian posterior of the latent utility; the constrained variant
multiplies it by the probability that both candidates satisfy c(x) >= lambda,
using the independence approximation of the two marginal feasibility factors.

Maximization works on the concatenated pair (x_i, x_j) in [0,1]^{2N}: uniform
raw sampling, top-k restart selection, then box-constrained L-BFGS-B with
batched central-difference gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr
from scipy.stats import norm

from cpbo.gp import GPModel, PredictiveDistribution, gp_marginals
from cpbo.prefgp import PreferenceModel

SIGMA_FLOOR = 1e-6
FD_STEP = 1e-6


@dataclass(frozen=True)
class PairStats:
    delta: float
    sigma_pair: float
    mu_second: float


@dataclass(frozen=True)
class AcqConfig:
    lam: float = 0.0
    num_restarts: int = 3
    raw_samples: int = 512
    sigma_floor: float = SIGMA_FLOOR
    seed: int = 0
    maxiter: int = 40

    def __post_init__(self):
        if self.raw_samples < self.num_restarts:
            raise ValueError("raw_samples must be >= num_restarts")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")


def pair_stats(pred: PredictiveDistribution, sigma_floor: float = SIGMA_FLOOR) -> PairStats:
    if pred.means.shape[0] != 2 or pred.covariance.shape != (2, 2):
        raise ValueError("pair_stats needs a predictive distribution over exactly 2 points")
    var = pred.variances
    v = var[0] + var[1] - 2.0 * pred.covariance[0, 1]
    if v < -1e-8:
        raise ArithmeticError(f"negative pair variance {v:g}")
    sigma = max(sigma_floor, np.sqrt(max(v, 0.0)))
    return PairStats(
        delta=float(pred.means[0] - pred.means[1]),
        sigma_pair=float(sigma),
        mu_second=float(pred.means[1]),
    )


def eubo(ps: PairStats) -> float:
    z = ps.delta / ps.sigma_pair
    return float(ps.delta * ndtr(z) + ps.sigma_pair * norm.pdf(z) + ps.mu_second)


def _eubo_vec(delta, sigma, mu2):
    z = delta / sigma
    return delta * ndtr(z) + sigma * norm.pdf(z) + mu2


def feasibility_prob(mu_i, sd_i, mu_j, sd_j, lam) -> float:
    return float(_feas_vec(np.asarray([mu_i]), np.asarray([sd_i]),
                           np.asarray([mu_j]), np.asarray([sd_j]), lam)[0])


def _feas_factor(mu, sd, lam):
    out = np.where(
        sd > 0,
        1.0 - ndtr((lam - mu) / np.where(sd > 0, sd, 1.0)),
        (mu >= lam).astype(float),
    )
    return out


def _feas_vec(mu_i, sd_i, mu_j, sd_j, lam):
    return _feas_factor(mu_i, sd_i, lam) * _feas_factor(mu_j, sd_j, lam)


def euboc(ps: PairStats, feas: float) -> float:
    if not 0.0 <= feas <= 1.0:
        raise ValueError("feasibility probability must lie in [0, 1]")
    return feas * eubo(ps)


def acquisition_values(
    objective_model: PreferenceModel,
    constraint_model: GPModel | None,
    cfg: AcqConfig,
    policy: str,
    A: np.ndarray,
    B: np.ndarray,
) -> np.ndarray:
    """Batched acquisition over the pairs (A[k], B[k])."""
    mu_a, mu_b, var_a, var_b, cov = objective_model.pair_marginals(A, B)
    delta = mu_a - mu_b
    sigma = np.maximum(cfg.sigma_floor, np.sqrt(np.maximum(var_a + var_b - 2 * cov, 0.0)))
    vals = _eubo_vec(delta, sigma, mu_b)
    if policy == "euboc" and constraint_model is not None:
        m_a, s_a = gp_marginals(constraint_model, A)
        m_b, s_b = gp_marginals(constraint_model, B)
        vals = vals * _feas_vec(m_a, s_a, m_b, s_b, cfg.lam)
    return vals


def maximize_pair(
    objective_model: PreferenceModel,
    constraint_model: GPModel | None,
    cfg: AcqConfig,
    policy: str = "euboc",
):
    """Best pair by raw sampling + multi-start quasi-Newton polish.

    Deterministic for a given ``cfg.seed``; ties between restarts are broken
    by the lowest restart index.
    """
    if policy not in ("eubo", "euboc"):
        raise ValueError(f"unknown policy {policy!r}")
    dim = objective_model.dim
    rng = np.random.default_rng(cfg.seed)
    raw = rng.uniform(size=(cfg.raw_samples, 2 * dim))
    vals = acquisition_values(
        objective_model, constraint_model, cfg, policy, raw[:, :dim], raw[:, dim:]
    )
    if not np.any(np.isfinite(vals)):
        raise ArithmeticError("all raw acquisition values are non-finite")
    order = np.argsort(-vals, kind="stable")[: cfg.num_restarts]

    def neg_batch(Z):
        return -acquisition_values(
            objective_model, constraint_model, cfg, policy, Z[:, :dim], Z[:, dim:]
        )

    def fun_and_grad(z):
        h = FD_STEP
        P = 2 * dim
        Z = np.tile(z, (2 * P + 1, 1))
        for k in range(P):
            Z[1 + 2 * k, k] = min(z[k] + h, 1.0)
            Z[2 + 2 * k, k] = max(z[k] - h, 0.0)
        f = neg_batch(Z)
        g = np.empty(P)
        for k in range(P):
            dz = Z[1 + 2 * k, k] - Z[2 + 2 * k, k]
            g[k] = (f[1 + 2 * k] - f[2 + 2 * k]) / dz if dz > 0 else 0.0
        return f[0], g

    bounds = [(0.0, 1.0)] * (2 * dim)
    best = None
    for rank, idx in enumerate(order):
        res = minimize(
            fun_and_grad,
            raw[idx],
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.maxiter},
        )
        cand = np.clip(res.x, 0.0, 1.0)
        val = -neg_batch(cand[None, :])[0]
        # keep the better of the polished point and its start
        if vals[idx] > val:
            cand, val = raw[idx], vals[idx]
        if best is None or val > best[0] + 1e-12:
            best = (val, rank, cand)
    z = best[2]
    return z[:dim].copy(), z[dim:].copy()
