"""Spatial data-generating processes and Besag's coding estimator."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import cholesky_banded, solve_banded

from .lattice import LatticeField, checkerboard_coding

__all__ = [
    "AutoNormalParams",
    "UnilateralModel",
    "AutoNormalSampler",
    "simulate_unilateral",
    "simulate_autonormal",
    "coding_fit",
    "neighbor_sums",
    "make_rng",
]


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class AutoNormalParams:
    """First-order auto-normal scheme.

    The conditional mean of ``Y(u, v)`` given the rest of the field is
    ``alpha + theta1 * (vertical neighbours - 2 alpha) + theta2 * (horizontal
    neighbours - 2 alpha)`` and the conditional variance is ``cond_var``.
    """

    theta1: float
    theta2: float
    alpha: float = 0.0
    cond_var: float = 1.0

    def spectral_radius(self, n_rows: int | None = None, n_cols: int | None = None) -> float:
        """``2 (|theta1| c_r + |theta2| c_c)``; the precision is positive definite iff this is < 1.

        ``c_r = cos(pi / (n_rows + 1))`` is the top eigenvalue factor of a free
        path of length ``n_rows``; an unbounded lattice has ``c_r = c_c = 1``.
        """
        c_r = 1.0 if n_rows is None else np.cos(np.pi / (n_rows + 1))
        c_c = 1.0 if n_cols is None else np.cos(np.pi / (n_cols + 1))
        return 2.0 * (abs(self.theta1) * c_r + abs(self.theta2) * c_c)

    def check(self, n_rows: int | None = None, n_cols: int | None = None) -> None:
        """Raise unless the joint precision on an ``n_rows x n_cols`` grid is positive definite.

        Without a grid size this is ``|theta1| + |theta2| < 1/2``.
        """
        if not self.cond_var > 0:
            raise ValueError("cond_var must be positive")
        if self.spectral_radius(n_rows, n_cols) >= 1.0:
            raise ValueError(
                f"theta = ({self.theta1:.4f}, {self.theta2:.4f}) gives a precision matrix that is "
                "not positive definite"
            )

    def shrunk_to(self, n_rows: int, n_cols: int, margin: float = 0.99) -> "AutoNormalParams":
        """Scale ``theta`` towards 0 so the spectral radius is at most ``margin``."""
        rho = self.spectral_radius(n_rows, n_cols)
        if rho <= margin:
            return self
        return replace(self, theta1=self.theta1 * margin / rho, theta2=self.theta2 * margin / rho)

    def to_dict(self) -> dict:
        return {"theta1": self.theta1, "theta2": self.theta2,
                "alpha": self.alpha, "cond_var": self.cond_var}


@dataclass(frozen=True)
class UnilateralModel:
    """``Y(u,v) = g1(Y(u-1,v)) + g2(Y(u,v-1)) + noise_sd * e(u,v)``."""

    g1: Callable[[float], float] = np.sin
    g2: Callable[[float], float] = np.cos
    noise_sd: float = 1.0
    burn_in: int = 20

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


def simulate_unilateral(model: UnilateralModel, n_rows: int, n_cols: int, seed=None) -> LatticeField:
    """Raster recursion on an enlarged grid; the leading ``burn_in`` rows and columns are dropped.

    The first row and column of the enlarged grid are pure noise.
    """
    if n_rows < 1 or n_cols < 1:
        raise ValueError("dimensions must be positive")
    rng = make_rng(seed)
    R, C = n_rows + model.burn_in, n_cols + model.burn_in
    e = model.noise_sd * rng.standard_normal((R, C))
    y = np.zeros((R, C))
    y[0, :] = e[0, :]
    y[:, 0] = e[:, 0]
    g1, g2 = model.g1, model.g2
    for u in range(1, R):
        up = g1(y[u - 1, :])
        row = y[u]
        for v in range(1, C):
            row[v] = up[v] + g2(row[v - 1]) + e[u, v]
    return LatticeField(y[model.burn_in:, model.burn_in:])


class AutoNormalSampler:
    """Exact sampler from the joint Gaussian law of an auto-normal field.

    The precision matrix ``Q = (I - theta1 A_vert - theta2 A_horiz) / cond_var``
    (free boundary) is banded in raster order with half-bandwidth ``n_cols``;
    it is factorised once and reused for every draw.
    """

    def __init__(self, params: AutoNormalParams, n_rows: int, n_cols: int):
        if n_rows < 1 or n_cols < 1:
            raise ValueError("dimensions must be positive")
        params.check(n_rows, n_cols)
        self.params = params
        self.shape = (n_rows, n_cols)
        n = n_rows * n_cols
        bw = n_cols
        ab = np.zeros((bw + 1, n))
        ab[bw, :] = 1.0 / params.cond_var
        j = np.arange(n)
        if n_cols > 1:
            # (j-1, j): horizontal neighbours within a row
            ab[bw - 1, :] = np.where(j % n_cols != 0, -params.theta2 / params.cond_var, 0.0)
        if n_rows > 1:
            # (j-n_cols, j): vertical neighbours
            ab[0, n_cols:] += -params.theta1 / params.cond_var
        try:
            self._upper = cholesky_banded(ab, lower=False)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"precision factorisation failed: {exc}") from exc
        self._bw = bw

    def draw(self, rng, size: int | None = None) -> np.ndarray:
        """One field ``(n_rows, n_cols)`` or a stack ``(size, n_rows, n_cols)``."""
        rng = make_rng(rng)
        n = self.shape[0] * self.shape[1]
        z = rng.standard_normal(n if size is None else (n, size))
        # Q = U^T U, so U^{-1} z has covariance Q^{-1}
        x = solve_banded((0, self._bw), self._upper, z, check_finite=False)
        if size is None:
            return self.params.alpha + x.reshape(self.shape)
        return self.params.alpha + x.T.reshape((size,) + self.shape)


def _gibbs(params: AutoNormalParams, n_rows, n_cols, rng, sweeps):
    y = params.alpha + np.sqrt(params.cond_var) * rng.standard_normal((n_rows, n_cols))
    parity = np.add.outer(np.arange(n_rows), np.arange(n_cols)) % 2
    sd = np.sqrt(params.cond_var)
    for _ in range(sweeps):
        for p in (0, 1):
            c = y - params.alpha
            vert = np.zeros_like(c)
            vert[1:] += c[:-1]
            vert[:-1] += c[1:]
            hor = np.zeros_like(c)
            hor[:, 1:] += c[:, :-1]
            hor[:, :-1] += c[:, 1:]
            mean = params.alpha + params.theta1 * vert + params.theta2 * hor
            draw = mean + sd * rng.standard_normal(y.shape)
            y = np.where(parity == p, draw, y)
    return y


def simulate_autonormal(params: AutoNormalParams, n_rows: int, n_cols: int, seed=None,
                        method: str = "exact", sweeps: int = 200) -> LatticeField:
    """Draw one auto-normal field.

    ``method="exact"`` uses a banded Cholesky factor of the joint precision.
    ``method="gibbs"`` runs ``sweeps`` checkerboard Gibbs sweeps (each sweep
    updates one colour, then the other) from an independent start.
    """
    params.check(n_rows, n_cols)
    rng = make_rng(seed)
    if method == "exact":
        return LatticeField(AutoNormalSampler(params, n_rows, n_cols).draw(rng))
    if method == "gibbs":
        return LatticeField(_gibbs(params, n_rows, n_cols, rng, sweeps))
    raise ValueError(f"unknown method {method!r}")


def neighbor_sums(values: np.ndarray):
    """Interior responses with vertical and horizontal neighbour sums."""
    y = values[1:-1, 1:-1]
    vert = values[:-2, 1:-1] + values[2:, 1:-1]
    hor = values[1:-1, :-2] + values[1:-1, 2:]
    return y, vert, hor


def coding_fit(field: LatticeField, with_intercept: bool = True, combine: str = "average",
               cond_var: float | None = None) -> AutoNormalParams:
    """Besag's coding estimator for the first-order auto-normal scheme.

    ``alpha`` is the field mean (0 without intercept). On each checkerboard
    code the centred response is regressed by OLS on the centred vertical
    and horizontal neighbour sums. ``combine="average"`` averages the two
    code estimates, ``combine="stack"`` pools both codes into one regression.
    ``cond_var`` defaults to the pooled residual mean square; pass a value to
    fix it.
    """
    partition = checkerboard_coding(field)
    vals = field.values
    alpha = float(vals.mean()) if with_intercept else 0.0

    def design(sites):
        u, v = sites[:, 0] - 1, sites[:, 1] - 1
        resp = vals[u, v] - alpha
        vert = vals[u - 1, v] + vals[u + 1, v] - 2 * alpha
        hor = vals[u, v - 1] + vals[u, v + 1] - 2 * alpha
        return np.column_stack([vert, hor]), resp

    def ols(Z, r):
        if Z.shape[0] < 2 or np.linalg.matrix_rank(Z) < 2:
            raise ValueError("degenerate coding regression")
        coef, *_ = np.linalg.lstsq(Z, r, rcond=None)
        resid = r - Z @ coef
        return coef, float(resid @ resid), Z.shape[0]

    codes = [design(c) for c in (partition.code_a, partition.code_b) if len(c)]
    if combine == "average":
        fits = [ols(Z, r) for Z, r in codes]
        theta = np.mean([f[0] for f in fits], axis=0)
        ssr = sum(f[1] for f in fits)
        dof = sum(f[2] - 2 for f in fits)
    elif combine == "stack":
        Z = np.vstack([c[0] for c in codes])
        r = np.concatenate([c[1] for c in codes])
        theta, ssr, nobs = ols(Z, r)
        dof = nobs - 2
    else:
        raise ValueError(f"unknown combine rule {combine!r}")
    if cond_var is None:
        cond_var = ssr / dof if dof > 0 else float("nan")
        if not cond_var > 0:
            raise ValueError("degenerate coding regression")
    return AutoNormalParams(float(theta[0]), float(theta[1]), alpha, float(cond_var))


def with_cond_var(params: AutoNormalParams, cond_var: float) -> AutoNormalParams:
    return replace(params, cond_var=cond_var)
