"""Kernels and Nadaraya-Watson type estimators on a regression sample.

Component indices ``j`` are 0-based throughout. Every estimator accepts a
scalar or an array of evaluation points and broadcasts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import RegressionSample

__all__ = [
    "Kernel",
    "EvalGrid",
    "RestrictedDomain",
    "kernel_value",
    "kh_value",
    "kernel_matrix",
    "density_1d",
    "density_2d",
    "nw_regress_1d",
    "restricted_density_1d",
    "restricted_density_2d",
    "full_dim_nw",
    "default_domain",
    "safe_divide",
]

_SQRT_2PI = np.sqrt(2.0 * np.pi)
KERNEL_FAMILIES = ("gaussian", "epanechnikov")


class EmptyDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Kernel:
    family: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("bandwidth must be positive")

    def with_bandwidth(self, h: float) -> "Kernel":
        return Kernel(self.family, float(h))


@dataclass(frozen=True)
class EvalGrid:
    """Equispaced tabulation points from ``lower`` to ``upper``."""

    lower: float
    upper: float
    n_points: int = 101

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("grid needs lower < upper")
        if self.n_points < 2:
            raise ValueError("grid needs at least two points")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.n_points - 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n_points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


@dataclass(frozen=True)
class RestrictedDomain:
    """Intervals ``A_j = [lower_j, upper_j]``; pair sets are ``A_j x A_k``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("domain needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return len(self.lower)

    def contains(self, j: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lower[j]) & (x <= self.upper[j])

    def contains_pair(self, j: int, k: int, xj, xk) -> np.ndarray:
        return self.contains(j, xj) & self.contains(k, xk)

    def grids(self, n_points: int = 101) -> list[EvalGrid]:
        return [EvalGrid(lo, hi, n_points) for lo, hi in zip(self.lower, self.upper)]


def kernel_value(kernel: Kernel, t):
    """Unscaled kernel ``K(t)``."""
    t = np.asarray(t, dtype=float)
    if kernel.family == "gaussian":
        out = np.exp(-0.5 * t * t) / _SQRT_2PI
    else:
        out = np.where(np.abs(t) <= 1.0, 0.75 * (1.0 - t * t), 0.0)
    return out[()] if out.ndim == 0 else out


def kh_value(kernel: Kernel, t):
    """Scaled kernel ``K_h(t) = K(t / h) / h``."""
    h = kernel.bandwidth
    return kernel_value(kernel, np.asarray(t, dtype=float) / h) / h


def kernel_matrix(kernel: Kernel, points, data) -> np.ndarray:
    """``K_h(points[g] - data[i])`` as a ``(len(points), len(data))`` array."""
    points = np.asarray(points, dtype=float)
    data = np.asarray(data, dtype=float)
    return kh_value(kernel, points[:, None] - data[None, :])


def safe_divide(num, den):
    """``num / den`` with the convention ``x / 0 = 0``."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    num, den = np.broadcast_arrays(num, den)
    out = np.zeros(num.shape)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    return out[()] if out.ndim == 0 else out


def _check_component(sample: RegressionSample, j: int) -> None:
    if not 0 <= j < sample.d:
        raise IndexError(f"component {j} out of range for d={sample.d}")
    if sample.n == 0:
        raise ValueError("empty sample")


def _weights_1d(sample, j, kernel, x):
    x = np.asarray(x, dtype=float)
    return kh_value(kernel, x[..., None] - sample.designs[:, j])


def density_1d(sample: RegressionSample, j: int, kernel: Kernel, x):
    """Marginal density estimate of design column ``j``."""
    _check_component(sample, j)
    out = _weights_1d(sample, j, kernel, x).mean(axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def density_2d(sample: RegressionSample, j: int, k: int, kernel: Kernel, xj, xk):
    """Bivariate density estimate of design columns ``(j, k)``; broadcasts ``xj``, ``xk``."""
    if j == k:
        raise ValueError("density_2d needs two distinct components")
    _check_component(sample, j)
    _check_component(sample, k)
    xj, xk = np.broadcast_arrays(np.asarray(xj, float), np.asarray(xk, float))
    out = (_weights_1d(sample, j, kernel, xj) * _weights_1d(sample, k, kernel, xk)).mean(axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def nw_regress_1d(sample: RegressionSample, j: int, kernel: Kernel, x):
    """Marginal Nadaraya-Watson regression of responses on column ``j``."""
    _check_component(sample, j)
    w = _weights_1d(sample, j, kernel, x)
    return safe_divide(w @ sample.responses, w.sum(axis=-1))


def restricted_density_1d(sample, j, kernel, domain: RestrictedDomain, x):
    """Kernel sum over all rows divided by the number of column-``j`` values in ``A_j``."""
    _check_component(sample, j)
    count = np.count_nonzero(domain.contains(j, sample.designs[:, j]))
    if count == 0:
        raise EmptyDomainError(f"empty restricted domain for component {j}")
    x = np.asarray(x, dtype=float)
    out = np.where(domain.contains(j, x), _weights_1d(sample, j, kernel, x).sum(axis=-1) / count, 0.0)
    return out[()] if out.ndim == 0 else out


def restricted_density_2d(sample, j, k, kernel, domain: RestrictedDomain, xj, xk):
    if j == k:
        raise ValueError("restricted_density_2d needs two distinct components")
    _check_component(sample, j)
    _check_component(sample, k)
    count = np.count_nonzero(domain.contains_pair(j, k, sample.designs[:, j], sample.designs[:, k]))
    if count == 0:
        raise EmptyDomainError(f"empty restricted domain for pair ({j}, {k})")
    xj, xk = np.broadcast_arrays(np.asarray(xj, float), np.asarray(xk, float))
    s = (_weights_1d(sample, j, kernel, xj) * _weights_1d(sample, k, kernel, xk)).sum(axis=-1)
    out = np.where(domain.contains_pair(j, k, xj, xk), s / count, 0.0)
    return out[()] if out.ndim == 0 else out


def full_dim_nw(sample: RegressionSample, kernel: Kernel, x):
    """d-variate Nadaraya-Watson estimate with a product kernel.

    ``x`` has shape ``(d,)`` or ``(m, d)``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != sample.d:
        raise ValueError(f"x must have trailing dimension {sample.d}")
    w = np.ones(x.shape[:-1] + (sample.n,))
    for j in range(sample.d):
        w = w * kh_value(kernel, x[..., j, None] - sample.designs[:, j])
    return safe_divide(w @ sample.responses, w.sum(axis=-1))


def default_domain(sample: RegressionSample, trim: float = 0.0) -> RestrictedDomain:
    """Per-component ``[q_trim, q_{1-trim}]`` with linearly interpolated quantiles."""
    if not 0.0 <= trim < 0.5:
        raise ValueError("trim must lie in [0, 0.5)")
    if sample.n == 0:
        raise ValueError("empty sample")
    lo = np.quantile(sample.designs, trim, axis=0, method="linear")
    hi = np.quantile(sample.designs, 1.0 - trim, axis=0, method="linear")
    if np.any(lo >= hi):
        bad = int(np.flatnonzero(lo >= hi)[0])
        raise ValueError(f"design column {bad} is degenerate (no spread)")
    return RestrictedDomain(lo, hi)
