"""Stationary covariance kernels with per-dimension lengthscales.

Two kinds are supported: the squared-exponential (RBF) kernel used for the
latent-utility surrogate and the Matern 5/2 kernel used for the constraint
surrogate.  ``output_scale`` is the kernel variance, i.e. k(x, x) equals
``output_scale`` for both kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

SQRT5 = np.sqrt(5.0)

RBF = "squared-exponential"
MATERN52 = "matern-5/2"
_KINDS = (RBF, MATERN52)


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    lengthscales: np.ndarray
    output_scale: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kernel kind: {self.kind!r}")
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError("lengthscales must be finite and > 0")
        if not np.isfinite(self.output_scale) or self.output_scale <= 0:
            raise ValueError("output_scale must be finite and > 0")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "output_scale", float(self.output_scale))

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]

    def with_params(self, lengthscales=None, output_scale=None) -> "KernelSpec":
        out = self
        if lengthscales is not None:
            out = replace(out, lengthscales=np.asarray(lengthscales, dtype=float))
        if output_scale is not None:
            out = replace(out, output_scale=float(output_scale))
        return out


def _check_dims(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != spec.dim:
        raise ValueError(
            f"input has dimension {x.shape[-1]}, kernel expects {spec.dim}"
        )
    return x


def scaled_sqdists(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared distances of lengthscale-scaled inputs, (n, m)."""
    sa = a / spec.lengthscales
    sb = b / spec.lengthscales
    d2 = (
        np.sum(sa**2, axis=1)[:, None]
        + np.sum(sb**2, axis=1)[None, :]
        - 2.0 * sa @ sb.T
    )
    return np.maximum(d2, 0.0)


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-covariance matrix k(a_i, b_j) of shape (len(a), len(b))."""
    a = _check_dims(spec, a)
    b = _check_dims(spec, b)
    d2 = scaled_sqdists(spec, a, b)
    if spec.kind == RBF:
        return spec.output_scale * np.exp(-0.5 * d2)
    r = np.sqrt(d2)
    return spec.output_scale * (1.0 + SQRT5 * r + (5.0 / 3.0) * d2) * np.exp(-SQRT5 * r)


def kernel_eval(spec: KernelSpec, a, b) -> float:
    """Single kernel evaluation k(a, b)."""
    return float(kernel_matrix(spec, np.atleast_2d(a), np.atleast_2d(b))[0, 0])


def kernel_diag(spec: KernelSpec, a: np.ndarray) -> np.ndarray:
    a = _check_dims(spec, a)
    return np.full(a.shape[0], spec.output_scale)


def kernel_grad_log_params(spec: KernelSpec, a: np.ndarray, K: np.ndarray):
    """Derivatives of the Gram matrix w.r.t. log lengthscales and log output scale.

    Returns a list of ``dim`` matrices dK/d(log ls_d) followed by
    dK/d(log output_scale) = K itself.  ``K`` must be the Gram matrix of ``a``
    under ``spec`` (without jitter).
    """
    a = _check_dims(spec, a)
    grads = []
    if spec.kind == RBF:
        for d in range(spec.dim):
            D2 = (a[:, d][:, None] - a[:, d][None, :]) ** 2 / spec.lengthscales[d] ** 2
            grads.append(K * D2)
    else:
        d2 = scaled_sqdists(spec, a, a)
        r = np.sqrt(d2)
        # dk/d(D2_d) = output_scale * (5/6)(1 + sqrt(5) r) exp(-sqrt(5) r), times
        # d(D2_d)/d(log ls_d) = -2 D2_d / ... folded into the per-dim factor below
        base = spec.output_scale * (5.0 / 6.0) * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
        for d in range(spec.dim):
            D2 = (a[:, d][:, None] - a[:, d][None, :]) ** 2 / spec.lengthscales[d] ** 2
            grads.append(2.0 * base * D2)
    grads.append(K.copy())
    return grads
