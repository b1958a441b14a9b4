"""Preference-based GP surrogate for the latent utility.

Pairwise winner/loser observations enter through the Thurstone-Mosteller
probit likelihood Phi((f_w - f_l) / (sqrt(2) sigma)); the latent-utility
posterior is approximated by a Laplace fit (Newton ascent with step halving),
and hyperparameters are refit by maximizing the Laplace-approximate evidence
penalized by the same gamma priors as the regression GP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import log_ndtr, ndtr
from scipy.stats import norm

from cpbo.gp import (
    LS_PRIOR,
    OS_PRIOR,
    DEFAULT_JITTER,
    NumericsError,
    _log_gamma_pdf_grad,
    check_unit_box,
    chol_with_jitter,
)
from cpbo.kernels import RBF, KernelSpec, kernel_diag, kernel_matrix

DUP_TOL = 1e-9
_LOG_FLOOR = np.log(1e-300)


@dataclass(frozen=True)
class Comparison:
    winner_idx: int
    loser_idx: int

    def __post_init__(self):
        if self.winner_idx == self.loser_idx:
            raise ValueError("winner and loser must be distinct points")


class PreferenceDataset:
    """Unique evaluated points plus pairwise outcomes between them."""

    def __init__(self, dim: int, sigma_cmp: float = 1.0):
        if sigma_cmp <= 0:
            raise ValueError("sigma_cmp must be positive")
        self.dim = dim
        self.sigma_cmp = float(sigma_cmp)
        self.points = np.zeros((0, dim))
        self.comparisons: list[Comparison] = []

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def add_point(self, x) -> int:
        """Index of x, appending it unless it duplicates an existing point."""
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError("point dimension mismatch")
        if self.n_points:
            d = np.max(np.abs(self.points - x), axis=1)
            hit = np.where(d <= DUP_TOL)[0]
            if hit.size:
                return int(hit[0])
        self.points = np.vstack([self.points, x])
        return self.n_points - 1

    def add_comparison(self, winner: int, loser: int):
        if not (0 <= winner < self.n_points and 0 <= loser < self.n_points):
            raise ValueError("comparison references unknown point")
        self.comparisons.append(Comparison(winner, loser))

    def pair_indices(self) -> np.ndarray:
        """(m, 2) array of (winner, loser) indices."""
        if not self.comparisons:
            return np.zeros((0, 2), dtype=int)
        return np.array([(c.winner_idx, c.loser_idx) for c in self.comparisons])


def tm_log_likelihood(ds: PreferenceDataset, latents) -> float:
    f = np.asarray(latents, dtype=float).ravel()
    if f.shape[0] != ds.n_points:
        raise ValueError("latents length must equal point count")
    pairs = ds.pair_indices()
    if pairs.shape[0] == 0:
        return 0.0
    z = (f[pairs[:, 0]] - f[pairs[:, 1]]) / (np.sqrt(2.0) * ds.sigma_cmp)
    return float(np.sum(np.maximum(log_ndtr(z), _LOG_FLOOR)))


def _loglik_grad_w(ds: PreferenceDataset, f: np.ndarray):
    """(log-likelihood, gradient, W) where W = -Hessian of the log-likelihood."""
    n = f.shape[0]
    pairs = ds.pair_indices()
    if pairs.shape[0] == 0:
        return 0.0, np.zeros(n), np.zeros((n, n))
    c = np.sqrt(2.0) * ds.sigma_cmp
    z = (f[pairs[:, 0]] - f[pairs[:, 1]]) / c
    ll = float(np.sum(np.maximum(log_ndtr(z), _LOG_FLOOR)))
    # hazard ratio phi/Phi, computed stably via exp(log phi - log Phi)
    ratio = np.exp(norm.logpdf(z) - log_ndtr(z))
    g1 = ratio / c
    w = ratio * (z + ratio) / c**2  # positive, so W is PSD
    grad = np.zeros(n)
    np.add.at(grad, pairs[:, 0], g1)
    np.add.at(grad, pairs[:, 1], -g1)
    W = np.zeros((n, n))
    iw, il = pairs[:, 0], pairs[:, 1]
    np.add.at(W, (iw, iw), w)
    np.add.at(W, (il, il), w)
    np.add.at(W, (iw, il), -w)
    np.add.at(W, (il, iw), -w)
    return ll, grad, W


@dataclass(frozen=True)
class LatentPosterior:
    map_latents: np.ndarray
    neg_loglik_hessian: np.ndarray  # W at the MAP
    kernel_matrix: np.ndarray  # jittered Gram matrix over the points
    chol: np.ndarray  # Cholesky of the jittered Gram matrix
    alpha: np.ndarray  # K^{-1} f_hat, for predictive means
    cov_correction: np.ndarray  # (K + W^{-1})^{-1} = W - W (W + K^{-1})^{-1} W
    log_evidence: float
    converged: bool
    grad_norm: float


def laplace_fit(
    ds: PreferenceDataset,
    kernel: KernelSpec,
    tol: float = 1e-6,
    max_iter: int = 100,
    jitter: float = DEFAULT_JITTER,
    f0: np.ndarray | None = None,
) -> LatentPosterior:
    """Newton ascent on the log posterior of the latent utilities.

    The iteration runs in whitened coordinates f = L a, which keeps the Newton
    system (I + L^T W L) symmetric positive definite for any PSD W.  Step
    halving (up to 20 times) guards against overshooting.
    """
    X = check_unit_box(ds.points)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    K = kernel_matrix(kernel, X, X)
    L, eff_jitter = chol_with_jitter(K, jitter)
    Kj = K + eff_jitter * np.eye(n)

    if not ds.comparisons:
        f = np.zeros(n)
        _, grad, W = _loglik_grad_w(ds, f)
        return _finalize(ds, f, W, Kj, L, tol, True, 0.0)

    if f0 is not None and f0.shape == (n,) and np.all(np.isfinite(f0)):
        a = solve_triangular(L, f0, lower=True)
    else:
        a = np.zeros(n)
    f = L @ a

    def psi(a_vec, f_vec):
        ll, grad, W = _loglik_grad_w(ds, f_vec)
        return ll - 0.5 * a_vec @ a_vec, grad, W

    val, grad, W = psi(a, f)
    converged = False
    grad_norm = np.inf
    for _ in range(max_iter):
        # gradient of the objective in f-space: grad_ll - K^{-1} f
        gf = grad - solve_triangular(L.T, a, lower=False)
        grad_norm = float(np.linalg.norm(gf))
        if grad_norm <= tol:
            converged = True
            break
        ga = L.T @ grad - a
        H = L.T @ W @ L + np.eye(n)
        cf = cho_factor(H, lower=True)
        step = cho_solve(cf, ga)
        t = 1.0
        for _ in range(20):
            a_new = a + t * step
            f_new = L @ a_new
            val_new, grad_new, W_new = psi(a_new, f_new)
            if val_new >= val - 1e-12:
                break
            t *= 0.5
        a, f, val, grad, W = a_new, f_new, val_new, grad_new, W_new
    else:
        gf = grad - solve_triangular(L.T, a, lower=False)
        grad_norm = float(np.linalg.norm(gf))
        converged = grad_norm <= tol

    return _finalize(ds, f, W, Kj, L, tol, converged, grad_norm)


def _finalize(ds, f, W, Kj, L, tol, converged, grad_norm) -> LatentPosterior:
    n = f.shape[0]
    alpha = cho_solve((L, True), f)
    # (K + W^{-1})^{-1} via the Woodbury identity; valid for singular W
    Kinv = cho_solve((L, True), np.eye(n))
    B = W + Kinv
    cfB = cho_factor(0.5 * (B + B.T), lower=True)
    corr = W - W @ cho_solve(cfB, W)
    corr = 0.5 * (corr + corr.T)
    ll = tm_log_likelihood(ds, f)
    # log det(I + K W) = log det(B) + log det(K)
    logdet = 2.0 * np.sum(np.log(np.diag(cfB[0]))) + 2.0 * np.sum(np.log(np.diag(L)))
    log_ev = ll - 0.5 * f @ alpha - 0.5 * logdet
    return LatentPosterior(
        map_latents=f,
        neg_loglik_hessian=W,
        kernel_matrix=Kj,
        chol=L,
        alpha=alpha,
        cov_correction=corr,
        log_evidence=float(log_ev),
        converged=converged,
        grad_norm=grad_norm,
    )


def _cross_cov(kernel: KernelSpec, X: np.ndarray, Q: np.ndarray, jitter: float):
    """Cross-covariance including the jitter term on exact input matches.

    Jitter is treated as part of the (noise-free) covariance, which makes the
    predictive mean interpolate the MAP latents exactly at training points.
    """
    Kq = kernel_matrix(kernel, X, Q)
    if X.shape[0] and Q.shape[0]:
        for j in range(Q.shape[0]):
            d = np.max(np.abs(X - Q[j]), axis=1) if X.shape[0] else np.array([])
            hits = np.where(d <= 1e-12)[0]
            if hits.size:
                Kq[hits, j] += jitter
    return Kq


def pref_posterior(
    lp: LatentPosterior, kernel: KernelSpec, points, queries
) -> "PredictiveDistribution":
    from cpbo.gp import PredictiveDistribution

    X = np.atleast_2d(np.asarray(points, dtype=float))
    Q = check_unit_box(queries)
    if Q.shape[1] != X.shape[1]:
        raise ValueError("query dimension mismatch")
    jitter = float(lp.kernel_matrix[0, 0] - kernel.output_scale) if X.shape[0] else 0.0
    Kq = _cross_cov(kernel, X, Q, jitter)
    Kqq = kernel_matrix(kernel, Q, Q)
    mean = Kq.T @ lp.alpha
    cov = Kqq - Kq.T @ (lp.cov_correction @ Kq)
    cov = 0.5 * (cov + cov.T)
    return PredictiveDistribution(means=mean, covariance=cov)


class PreferenceModel:
    """Bundle of dataset, kernel and Laplace posterior with refit support."""

    def __init__(self, ds: PreferenceDataset, kernel: KernelSpec, lp: LatentPosterior):
        self.ds = ds
        self.kernel = kernel
        self.lp = lp

    @property
    def dim(self) -> int:
        return self.ds.dim

    def posterior(self, queries):
        if self.ds.n_points == 0:
            from cpbo.gp import PredictiveDistribution

            Q = check_unit_box(queries)
            return PredictiveDistribution(
                means=np.zeros(Q.shape[0]), covariance=kernel_matrix(self.kernel, Q, Q)
            )
        return pref_posterior(self.lp, self.kernel, self.ds.points, queries)

    def pair_marginals(self, A: np.ndarray, B: np.ndarray):
        """Vectorized 2x2 posterior blocks for the pairs (A[k], B[k]).

        Returns (mu_a, mu_b, var_a, var_b, cov_ab) with one entry per pair.
        """
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        X = self.ds.points
        kd_a = kernel_diag(self.kernel, A)
        kd_b = kernel_diag(self.kernel, B)
        k_ab = _pairwise_kdiag(self.kernel, A, B)
        if X.shape[0] == 0:
            z = np.zeros(A.shape[0])
            return z, z.copy(), kd_a, kd_b, k_ab
        jitter = float(self.lp.kernel_matrix[0, 0] - self.kernel.output_scale)
        Ka = _cross_cov(self.kernel, X, A, jitter)
        Kb = _cross_cov(self.kernel, X, B, jitter)
        mu_a = Ka.T @ self.lp.alpha
        mu_b = Kb.T @ self.lp.alpha
        CKa = self.lp.cov_correction @ Ka
        CKb = self.lp.cov_correction @ Kb
        var_a = np.maximum(kd_a - np.sum(Ka * CKa, axis=0), 0.0)
        var_b = np.maximum(kd_b - np.sum(Kb * CKb, axis=0), 0.0)
        cov_ab = k_ab - np.sum(Ka * CKb, axis=0)
        return mu_a, mu_b, var_a, var_b, cov_ab


def _pairwise_kdiag(kernel: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """k(A[k], B[k]) for each row pair, without forming the full matrix."""
    from cpbo.kernels import MATERN52, SQRT5

    sa = A / kernel.lengthscales
    sb = B / kernel.lengthscales
    d2 = np.maximum(np.sum((sa - sb) ** 2, axis=1), 0.0)
    if kernel.kind == RBF:
        return kernel.output_scale * np.exp(-0.5 * d2)
    r = np.sqrt(d2)
    return kernel.output_scale * (1.0 + SQRT5 * r + (5.0 / 3.0) * d2) * np.exp(-SQRT5 * r)


def fit_preference_model(
    ds: PreferenceDataset,
    restarts: int = 2,
    seed: int = 0,
    init: KernelSpec | None = None,
    max_opt_iter: int = 25,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> PreferenceModel:
    """Refit kernel hyperparameters by penalized Laplace evidence, then refit
    the latent posterior at the selected hyperparameters.

    With no comparisons the kernel is left at its initial (or default) value.
    """
    dim = ds.dim
    default = init if init is not None else KernelSpec(RBF, np.full(dim, 0.5), 1.0)
    if ds.n_points == 0:
        return PreferenceModel(ds, default, None)
    if not ds.comparisons or ds.n_points < 2:
        lp = laplace_fit(ds, default, tol=tol, max_iter=max_iter)
        return PreferenceModel(ds, default, lp)

    warm_f = {"f": None}

    def neg_evidence(theta):
        spec = KernelSpec(RBF, np.exp(theta[:dim]), float(np.exp(theta[dim])))
        try:
            lp = laplace_fit(
                ds, spec, tol=1e-5, max_iter=50, f0=warm_f["f"]
            )
        except NumericsError:
            return 1e12
        warm_f["f"] = lp.map_latents
        pen = 0.0
        for d in range(dim):
            pen += _log_gamma_pdf_grad(float(np.exp(theta[d])), *LS_PRIOR)[0]
        pen += _log_gamma_pdf_grad(float(np.exp(theta[dim])), *OS_PRIOR)[0]
        return -(lp.log_evidence + pen)

    rng = np.random.default_rng(seed)
    starts = []
    theta_init = np.concatenate(
        [np.log(default.lengthscales), [np.log(default.output_scale)]]
    )
    starts.append(theta_init)
    for _ in range(max(0, restarts - 1)):
        ls0 = rng.gamma(LS_PRIOR[0], 1.0 / LS_PRIOR[1], size=dim)
        os0 = rng.gamma(OS_PRIOR[0], 1.0 / OS_PRIOR[1])
        starts.append(np.concatenate([np.log(ls0), [np.log(os0)]]))

    lb = np.concatenate([np.full(dim, np.log(1e-3)), [np.log(1e-6)]])
    ub = np.concatenate([np.full(dim, np.log(1e3)), [np.log(1e6)]])
    best = None
    for k, theta0 in enumerate(starts):
        warm_f["f"] = None
        res = minimize(
            neg_evidence,
            np.clip(theta0, lb, ub),
            method="L-BFGS-B",
            bounds=list(zip(lb, ub)),
            options={"maxiter": max_opt_iter, "eps": 1e-5},
        )
        if best is None or res.fun < best[0] - 1e-12:
            best = (res.fun, k, res.x)
    theta = best[2]
    spec = KernelSpec(RBF, np.exp(theta[:dim]), float(np.exp(theta[dim])))
    lp = laplace_fit(ds, spec, tol=tol, max_iter=max_iter)
    return PreferenceModel(ds, spec, lp)
