import numpy as np
import pytest
from scipy.stats import kendalltau, multivariate_normal, norm

from cpbo.kernels import RBF, KernelSpec, kernel_matrix
from cpbo.prefgp import (
    Comparison,
    PreferenceDataset,
    fit_preference_model,
    laplace_fit,
    pref_posterior,
    tm_log_likelihood,
)


def chain_dataset():
    ds = PreferenceDataset(1)
    a = ds.add_point([0.2])
    b = ds.add_point([0.5])
    c = ds.add_point([0.8])
    ds.add_comparison(a, b)
    ds.add_comparison(b, c)
    ds.add_comparison(a, c)
    return ds


def test_comparison_rejects_self_pair():
    with pytest.raises(ValueError):
        Comparison(2, 2)


def test_duplicate_points_reuse_index():
    ds = PreferenceDataset(2)
    i = ds.add_point([0.1, 0.2])
    j = ds.add_point([0.1, 0.2 + 1e-12])
    assert i == j
    assert ds.n_points == 1


def test_tm_log_likelihood_values():
    ds = PreferenceDataset(1)
    a = ds.add_point([0.1])
    b = ds.add_point([0.9])
    ds.add_comparison(a, b)
    assert tm_log_likelihood(ds, [0.0, 0.0]) == pytest.approx(np.log(0.5), abs=1e-12)
    # winner leads by sqrt(2)*sigma => log Phi(1)
    d = np.sqrt(2.0) * ds.sigma_cmp
    assert tm_log_likelihood(ds, [d, 0.0]) == pytest.approx(np.log(norm.cdf(1.0)), abs=1e-10)


def test_tm_log_likelihood_sums_over_comparisons():
    ds = chain_dataset()
    f = np.array([0.7, 0.1, -0.4])
    total = tm_log_likelihood(ds, f)
    partial = 0.0
    for c in ds.comparisons:
        single = PreferenceDataset(1)
        single.points = ds.points.copy()
        single.comparisons = [c]
        partial += tm_log_likelihood(single, f)
    assert total == pytest.approx(partial, abs=1e-12)


def test_tm_shift_invariance():
    ds = chain_dataset()
    rng = np.random.default_rng(3)
    f = rng.normal(size=3)
    assert tm_log_likelihood(ds, f) == pytest.approx(
        tm_log_likelihood(ds, f + 17.3), abs=1e-10
    )


def test_complementarity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        fi, fj, s = rng.normal(), rng.normal(), rng.uniform(0.2, 2.0)
        z = (fi - fj) / (np.sqrt(2) * s)
        assert norm.cdf(z) + norm.cdf(-z) == pytest.approx(1.0, abs=1e-12)


def test_latents_length_mismatch():
    ds = chain_dataset()
    with pytest.raises(ValueError):
        tm_log_likelihood(ds, [0.0, 0.0])


def test_laplace_zero_comparisons_prior_mode():
    ds = PreferenceDataset(1)
    ds.add_point([0.4])
    ds.add_point([0.6])
    lp = laplace_fit(ds, KernelSpec(RBF, np.array([0.5]), 1.0))
    assert np.allclose(lp.map_latents, 0.0)
    assert lp.converged


def test_laplace_single_comparison_orders_latents():
    ds = PreferenceDataset(1)
    a = ds.add_point([0.3])
    b = ds.add_point([0.7])
    ds.add_comparison(a, b)
    lp = laplace_fit(ds, KernelSpec(RBF, np.array([0.5]), 1.0))
    assert lp.map_latents[a] > lp.map_latents[b]


def quadrature_posterior_means(ds, kernel, half_width=4.0, nodes=81):
    """Dense 3D quadrature over the exact (probit x GP prior) posterior."""
    K = kernel_matrix(kernel, ds.points, ds.points) + 1e-6 * np.eye(3)
    sd = np.sqrt(kernel.output_scale)
    axis = np.linspace(-half_width * sd, half_width * sd, nodes)
    F = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    logp = multivariate_normal(mean=np.zeros(3), cov=K).logpdf(F)
    c = np.sqrt(2.0) * ds.sigma_cmp
    for cmp_ in ds.comparisons:
        z = (F[:, cmp_.winner_idx] - F[:, cmp_.loser_idx]) / c
        logp += norm.logcdf(z)
    w = np.exp(logp - logp.max())
    w /= w.sum()
    return w @ F


def test_laplace_chain_matches_quadrature_oracle():
    ds = chain_dataset()
    kernel = KernelSpec(RBF, np.array([0.5]), 1.0)
    lp = laplace_fit(ds, kernel, tol=1e-8)
    assert lp.converged and lp.grad_norm <= 1e-6
    oracle = quadrature_posterior_means(ds, kernel)
    assert np.max(np.abs(lp.map_latents - oracle)) <= 0.05


def test_pref_posterior_interpolates_map():
    ds = chain_dataset()
    kernel = KernelSpec(RBF, np.array([0.5]), 1.0)
    lp = laplace_fit(ds, kernel)
    p = pref_posterior(lp, kernel, ds.points, ds.points)
    assert np.allclose(p.means, lp.map_latents, atol=1e-8)


def test_pref_posterior_reverts_to_prior_far_away():
    ds = PreferenceDataset(1)
    a = ds.add_point([0.0])
    b = ds.add_point([0.02])
    ds.add_comparison(a, b)
    kernel = KernelSpec(RBF, np.array([0.01]), 1.0)  # query 20+ lengthscales away
    lp = laplace_fit(ds, kernel)
    p = pref_posterior(lp, kernel, ds.points, np.array([[1.0]]))
    assert abs(p.means[0]) <= 1e-6
    assert abs(p.variances[0] - kernel.output_scale) <= 1e-6


def test_pref_posterior_chain_ranking():
    ds = chain_dataset()
    kernel = KernelSpec(RBF, np.array([0.5]), 1.0)
    lp = laplace_fit(ds, kernel)
    grid = np.array([[0.2], [0.5], [0.8]])
    means = pref_posterior(lp, kernel, ds.points, grid).means
    assert means[0] > means[1] > means[2]


def test_newton_objective_ascends():
    # objective at the MAP must not be below the start (f = 0)
    ds = chain_dataset()
    kernel = KernelSpec(RBF, np.array([0.3]), 2.0)
    lp = laplace_fit(ds, kernel)
    K = kernel_matrix(kernel, ds.points, ds.points) + 1e-6 * np.eye(3)
    f = lp.map_latents

    def psi(f):
        return tm_log_likelihood(ds, f) - 0.5 * f @ np.linalg.solve(K, f)

    assert psi(f) >= psi(np.zeros(3)) - 1e-12


def _simulated_tau(n_cmp, seed):
    truth = lambda x: np.sin(6 * x)
    rng = np.random.default_rng(seed)
    ds = PreferenceDataset(1)
    xs = rng.uniform(size=(n_cmp, 2))
    for a, b in xs:
        ia, ib = ds.add_point([a]), ds.add_point([b])
        if truth(a) >= truth(b):
            ds.add_comparison(ia, ib)
        else:
            ds.add_comparison(ib, ia)
    model = fit_preference_model(ds, seed=seed, max_opt_iter=15)
    grid = np.linspace(0, 1, 50)[:, None]
    means = model.posterior(grid).means
    return kendalltau(means, truth(grid[:, 0])).statistic


def test_data_monotonicity_kendall_tau():
    wins = 0
    for seed in range(20):
        if _simulated_tau(40, seed) >= _simulated_tau(5, seed):
            wins += 1
    assert wins >= 18  # >= 90% of 20 seeded trials
