import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpbo.kernels import (
    MATERN52,
    RBF,
    KernelSpec,
    kernel_eval,
    kernel_grad_log_params,
    kernel_matrix,
)


def spec(kind=RBF, ls=(1.0,), os_=1.0):
    return KernelSpec(kind, np.array(ls), os_)


def test_kernel_self_value_equals_output_scale():
    for kind in (RBF, MATERN52):
        s = spec(kind, (0.3, 0.7), 2.0)
        x = np.array([0.1, 0.9])
        assert kernel_eval(s, x, x) == pytest.approx(2.0)


def test_rbf_unit_distance():
    s = spec(RBF, (1.0,), 1.0)
    assert kernel_eval(s, [0.0], [1.0]) == pytest.approx(np.exp(-0.5), abs=1e-12)


def test_matern_decays_to_zero():
    s = spec(MATERN52, (0.01,), 1.0)
    # separation of 100 lengthscales
    assert kernel_eval(s, [0.0], [1.0]) < 1e-10


def test_dimension_mismatch_raises():
    s = spec(RBF, (1.0, 1.0))
    with pytest.raises(ValueError):
        kernel_eval(s, [0.0], [1.0])


def test_invalid_params_raise():
    with pytest.raises(ValueError):
        spec(RBF, (0.0,))
    with pytest.raises(ValueError):
        spec(RBF, (1.0,), -1.0)
    with pytest.raises(ValueError):
        KernelSpec("cubic", np.array([1.0]), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([RBF, MATERN52]))
def test_symmetry_and_range(seed, kind):
    rng = np.random.default_rng(seed)
    s = spec(kind, rng.uniform(0.05, 2.0, size=3), rng.uniform(0.1, 3.0))
    a, b = rng.uniform(size=3), rng.uniform(size=3)
    kab = kernel_eval(s, a, b)
    assert kab == pytest.approx(kernel_eval(s, b, a), rel=1e-12)
    assert 0.0 < kab <= s.output_scale + 1e-12


@pytest.mark.parametrize("kind", [RBF, MATERN52])
def test_gram_psd_with_jitter(kind):
    rng = np.random.default_rng(5)
    for _ in range(5):
        X = rng.uniform(size=(20, 2))
        s = spec(kind, rng.uniform(0.05, 1.0, size=2), rng.uniform(0.2, 2.0))
        K = kernel_matrix(s, X, X) + 1e-6 * np.eye(20)
        np.linalg.cholesky(K)  # raises if not PD


@pytest.mark.parametrize("kind", [RBF, MATERN52])
def test_log_param_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(7)
    X = rng.uniform(size=(8, 2))
    ls = np.array([0.3, 0.8])
    os_ = 1.7
    s = spec(kind, ls, os_)
    K = kernel_matrix(s, X, X)
    grads = kernel_grad_log_params(s, X, K)
    eps = 1e-6
    for d in range(2):
        ls2 = ls.copy()
        ls2[d] = np.exp(np.log(ls[d]) + eps)
        Kp = kernel_matrix(spec(kind, ls2, os_), X, X)
        ls2[d] = np.exp(np.log(ls[d]) - eps)
        Km = kernel_matrix(spec(kind, ls2, os_), X, X)
        fd = (Kp - Km) / (2 * eps)
        assert np.allclose(grads[d], fd, atol=1e-5)
    Kp = kernel_matrix(spec(kind, ls, np.exp(np.log(os_) + eps)), X, X)
    Km = kernel_matrix(spec(kind, ls, np.exp(np.log(os_) - eps)), X, X)
    assert np.allclose(grads[2], (Kp - Km) / (2 * eps), atol=1e-5)
