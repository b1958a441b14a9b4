"""Gaussian-process regression for the constraint surrogate.

Hyperparameters (per-dimension lengthscales, output scale, constant mean) are
fit by maximizing the log marginal likelihood plus log gamma-prior densities,
with multi-start L-BFGS-B in log-parameter space and analytic gradients.
Targets are standardized internally so the priors stay meaningful across
problems; predictions are de-standardized.  Inputs live in [0,1]^N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, LinAlgError
from scipy.optimize import minimize

from cpbo.kernels import (
    MATERN52,
    KernelSpec,
    kernel_diag,
    kernel_grad_log_params,
    kernel_matrix,
)

# Gamma(shape, rate) hyperpriors, standard defaults of the surrounding toolkit
# ecosystem: lengthscale mean 0.5, output scale broad.
LS_PRIOR = (3.0, 6.0)
OS_PRIOR = (2.0, 0.15)

DEFAULT_JITTER = 1e-6
MAX_JITTER = 1e-2

_UNIT_TOL = 1e-9


class NumericsError(RuntimeError):
    """Raised when a covariance factorization fails even after jitter escalation."""


def check_unit_box(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.size and (x.min() < -_UNIT_TOL or x.max() > 1.0 + _UNIT_TOL):
        raise ValueError("inputs must lie in the unit box [0, 1]^N")
    return x


def chol_with_jitter(K: np.ndarray, jitter: float):
    """Cholesky of K + jitter*I, escalating jitter x10 up to MAX_JITTER."""
    j = jitter
    n = K.shape[0]
    while True:
        try:
            L = cholesky(K + j * np.eye(n), lower=True)
            return L, j
        except LinAlgError:
            if j >= MAX_JITTER:
                raise NumericsError(
                    f"covariance not positive definite at jitter {j:g}"
                )
            j = 1e-10 if j == 0 else j * 10.0


def _log_gamma_pdf_grad(value: float, shape: float, rate: float):
    """(log density, d/d log(value)) of a Gamma prior evaluated at value."""
    from scipy.special import gammaln

    logp = shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(value) - rate * value
    dlogp_dlog = (shape - 1.0) - rate * value
    return logp, dlogp_dlog


@dataclass(frozen=True)
class PredictiveDistribution:
    means: np.ndarray
    covariance: np.ndarray

    @property
    def variances(self) -> np.ndarray:
        return np.maximum(np.diag(self.covariance), 0.0)


@dataclass(frozen=True)
class GPModel:
    """Immutable fitted GP: safe to share across threads."""

    inputs: np.ndarray
    targets: np.ndarray
    kernel: KernelSpec
    mean_constant: float
    jitter: float
    # standardization applied to targets before fitting
    y_shift: float
    y_scale: float
    # cached pieces in standardized space
    chol: np.ndarray | None
    alpha: np.ndarray | None

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.kernel.dim


def _standardize(targets: np.ndarray):
    shift = float(np.mean(targets)) if targets.size else 0.0
    scale = float(np.std(targets)) if targets.size else 1.0
    if not np.isfinite(scale) or scale < 1e-12:
        scale = 1.0
    return shift, scale


def _neg_log_posterior(theta, X, y, kind, jitter):
    """Negative penalized log marginal likelihood and gradient in log-space.

    theta = [log lengthscales (dim), log output_scale, mean_constant].
    """
    dim = X.shape[1]
    ls = np.exp(theta[:dim])
    os_ = np.exp(theta[dim])
    mean = theta[dim + 1]
    spec = KernelSpec(kind, ls, os_)
    K = kernel_matrix(spec, X, X)
    n = X.shape[0]
    try:
        L, _ = chol_with_jitter(K, jitter)
    except NumericsError:
        return 1e12, np.zeros_like(theta)
    r = y - mean
    alpha = cho_solve((L, True), r)
    ll = (
        -0.5 * r @ alpha
        - np.sum(np.log(np.diag(L)))
        - 0.5 * n * np.log(2.0 * np.pi)
    )
    grad = np.zeros_like(theta)
    Kinv = cho_solve((L, True), np.eye(n))
    AA = np.outer(alpha, alpha) - Kinv
    dKs = kernel_grad_log_params(spec, X, K)
    for k, dK in enumerate(dKs):
        grad[k] = 0.5 * np.sum(AA * dK)
    grad[dim + 1] = np.sum(alpha)

    # gamma hyperpriors (one shared prior per lengthscale, one for output scale)
    for d in range(dim):
        lp, dlp = _log_gamma_pdf_grad(ls[d], *LS_PRIOR)
        ll += lp
        grad[d] += dlp
    lp, dlp = _log_gamma_pdf_grad(os_, *OS_PRIOR)
    ll += lp
    grad[dim] += dlp
    return -ll, -grad


def fit_gp(
    inputs,
    targets,
    kind: str = MATERN52,
    jitter: float = DEFAULT_JITTER,
    restarts: int = 3,
    seed: int = 0,
    init: KernelSpec | None = None,
    max_opt_iter: int = 100,
) -> GPModel:
    """Fit hyperparameters by penalized marginal likelihood, multi-start.

    ``init``, when given, replaces the first restart's random initial point
    (used to warm-start refits along an optimization run).
    """
    X = check_unit_box(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] < 1:
        raise ValueError("need at least one training point")
    if y.shape[0] != X.shape[0]:
        raise ValueError("targets length must equal number of inputs")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    dim = X.shape[1]

    shift, scale = _standardize(y)
    ys = (y - shift) / scale

    rng = np.random.default_rng(seed)
    starts = []
    for k in range(max(1, restarts)):
        ls0 = rng.gamma(LS_PRIOR[0], 1.0 / LS_PRIOR[1], size=dim)
        os0 = rng.gamma(OS_PRIOR[0], 1.0 / OS_PRIOR[1])
        theta0 = np.concatenate([np.log(ls0), [np.log(os0)], [float(np.mean(ys))]])
        starts.append(theta0)
    if init is not None:
        starts[0] = np.concatenate(
            [np.log(init.lengthscales), [np.log(init.output_scale)], [float(np.mean(ys))]]
        )

    lb = np.concatenate([np.full(dim, np.log(1e-3)), [np.log(1e-6)], [-1e3]])
    ub = np.concatenate([np.full(dim, np.log(1e3)), [np.log(1e6)], [1e3]])

    best = None
    for k, theta0 in enumerate(starts):
        res = minimize(
            _neg_log_posterior,
            np.clip(theta0, lb, ub),
            args=(X, ys, kind, jitter),
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(lb, ub)),
            options={"maxiter": max_opt_iter},
        )
        # ties broken by lowest restart index for determinism
        if best is None or res.fun < best[0] - 1e-12:
            best = (res.fun, k, res.x)
    theta = best[2]

    spec = KernelSpec(kind, np.exp(theta[:dim]), float(np.exp(theta[dim])))
    mean = float(theta[dim + 1])
    K = kernel_matrix(spec, X, X)
    L, eff_jitter = chol_with_jitter(K, jitter)
    alpha = cho_solve((L, True), ys - mean)
    return GPModel(
        inputs=X,
        targets=y,
        kernel=spec,
        mean_constant=mean,
        jitter=eff_jitter,
        y_shift=shift,
        y_scale=scale,
        chol=L,
        alpha=alpha,
    )


def condition_gp(
    inputs,
    targets,
    kernel: KernelSpec,
    jitter: float = DEFAULT_JITTER,
) -> GPModel:
    """Condition on data with a fixed kernel (no hyperparameter optimization).

    The constant mean is set to its closed-form generalized-least-squares
    value under the fixed kernel.
    """
    X = check_unit_box(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    shift, scale = _standardize(y)
    ys = (y - shift) / scale
    K = kernel_matrix(kernel, X, X)
    L, eff_jitter = chol_with_jitter(K, jitter)
    ones = np.ones(X.shape[0])
    Ki1 = cho_solve((L, True), ones)
    mean = float(ys @ Ki1 / (ones @ Ki1))
    alpha = cho_solve((L, True), ys - mean)
    return GPModel(
        inputs=X,
        targets=y,
        kernel=kernel,
        mean_constant=mean,
        jitter=eff_jitter,
        y_shift=shift,
        y_scale=scale,
        chol=L,
        alpha=alpha,
    )


def prior_model(kind: str = MATERN52, dim: int = 1, kernel: KernelSpec | None = None) -> GPModel:
    """A GP with no training data: posterior equals the prior everywhere."""
    spec = kernel if kernel is not None else KernelSpec(kind, np.full(dim, 0.5), 1.0)
    return GPModel(
        inputs=np.zeros((0, spec.dim)),
        targets=np.zeros(0),
        kernel=spec,
        mean_constant=0.0,
        jitter=DEFAULT_JITTER,
        y_shift=0.0,
        y_scale=1.0,
        chol=None,
        alpha=None,
    )


def gp_posterior(model: GPModel, queries) -> PredictiveDistribution:
    """Predictive mean and covariance (full matrix over the query points)."""
    Q = check_unit_box(queries)
    if Q.shape[1] != model.dim:
        raise ValueError(f"query dimension {Q.shape[1]} != model dimension {model.dim}")
    Kqq = kernel_matrix(model.kernel, Q, Q)
    if model.n == 0:
        means = np.full(Q.shape[0], model.y_shift + model.y_scale * model.mean_constant)
        cov = Kqq * model.y_scale**2
        return PredictiveDistribution(means=means, covariance=cov)
    Kq = kernel_matrix(model.kernel, model.inputs, Q)
    mean_s = model.mean_constant + Kq.T @ model.alpha
    V = cho_solve((model.chol, True), Kq)
    cov_s = Kqq - Kq.T @ V
    cov_s = 0.5 * (cov_s + cov_s.T)
    means = model.y_shift + model.y_scale * mean_s
    cov = cov_s * model.y_scale**2
    return PredictiveDistribution(means=means, covariance=cov)


def gp_marginals(model: GPModel, queries):
    """(means, standard deviations) at query points, avoiding the full covariance."""
    Q = check_unit_box(queries)
    if Q.shape[1] != model.dim:
        raise ValueError(f"query dimension {Q.shape[1]} != model dimension {model.dim}")
    kd = kernel_diag(model.kernel, Q)
    if model.n == 0:
        means = np.full(Q.shape[0], model.y_shift + model.y_scale * model.mean_constant)
        return means, np.sqrt(kd) * model.y_scale
    Kq = kernel_matrix(model.kernel, model.inputs, Q)
    mean_s = model.mean_constant + Kq.T @ model.alpha
    from scipy.linalg import solve_triangular

    W = solve_triangular(model.chol, Kq, lower=True)
    var_s = np.maximum(kd - np.sum(W**2, axis=0), 0.0)
    return model.y_shift + model.y_scale * mean_s, model.y_scale * np.sqrt(var_s)
