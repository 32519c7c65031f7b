"""Wild-bootstrap confidence bands and the parametric-bootstrap linearity test."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .backfitting import AdditiveFit, BackfitOptions, SmoothingSystem, _make_fit, default_grids
from .kernels import EvalGrid, Kernel, RestrictedDomain
from .lattice import LatticeField, RegressionSample
from .simulate import AutoNormalParams, AutoNormalSampler, coding_fit, make_rng, neighbor_sums

__all__ = [
    "ConfidenceBand",
    "LinearityTestResult",
    "spawn_seeds",
    "wild_resample",
    "bootstrap_ci",
    "linearity_statistic",
    "linearity_test",
]

log = logging.getLogger(__name__)

ORDER_MODES = ("componentwise", "lexicographic")


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """Counter-indexed child seeds: replicate ``b`` always gets child ``b``.

    A ``SeedSequence`` argument is copied first, so repeated calls with the
    same object give the same children.
    """
    if isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    else:
        seed = np.random.SeedSequence(seed)
    return seed.spawn(n)


@dataclass
class ConfidenceBand:
    component: int
    grid: EvalGrid
    estimate: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_boot: int

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)


@dataclass
class LinearityTestResult:
    t_observed: float
    t_boot: np.ndarray
    p_value: float
    fitted: AutoNormalParams
    order_mode: str = "componentwise"
    simulated_from: AutoNormalParams | None = None

    @property
    def shrunk(self) -> bool:
        return self.simulated_from is not None and self.simulated_from != self.fitted

    @property
    def n_boot(self) -> int:
        return len(self.t_boot)


def _multipliers(rng, n, kind):
    if kind == "normal":
        return rng.standard_normal(n)
    if kind == "rademacher":
        return rng.choice([-1.0, 1.0], size=n)
    raise ValueError(f"unknown multiplier {kind!r}")


def wild_resample(sample: RegressionSample, fit: AdditiveFit, seed=None,
                  multiplier: str = "normal", eps=None) -> np.ndarray:
    """Bootstrap responses ``fitted + eps * (Y - fitted)``; designs are kept.

    ``eps`` overrides the random multipliers (one per row).
    """
    fitted = fit.predict(sample.designs)
    if eps is None:
        eps = _multipliers(make_rng(seed), sample.n, multiplier)
    eps = np.asarray(eps, dtype=float)
    return fitted + eps * (sample.responses - fitted)


def bootstrap_ci(sample: RegressionSample, kernel: Kernel, grids=None,
                 opts: BackfitOptions | None = None, level: float = 0.95, n_boot: int = 100,
                 seed=None, multiplier: str = "normal", domain: RestrictedDomain | None = None,
                 max_drop: float = 0.2):
    """Bias-corrected pointwise bands ``2 m_j - mean(m*_j) +/- z sd(m*_j - m_j)``.

    Every replicate reuses the designs, bandwidth and grids of the original
    fit, so only the response-dependent terms are recomputed and all
    replicates are solved as one batch. Replicates that fail to converge are
    dropped; more than ``max_drop`` of them is an error.

    Returns ``(fit, bands)``.
    """
    if n_boot < 2:
        raise ValueError("n_boot must be at least 2")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    opts = opts or BackfitOptions()
    if grids is None:
        grids = domain.grids(opts.n_grid) if domain is not None else default_grids(sample, opts.n_grid)
    system = SmoothingSystem(sample, kernel, grids, domain=domain)
    base = system.solve(opts=opts)
    if not base.converged:
        raise RuntimeError("backfitting of the original sample did not converge")
    fit = _make_fit(system, base, system.m0())

    fitted = fit.predict(sample.designs)
    resid = sample.responses - fitted
    eps = np.stack([_multipliers(np.random.default_rng(s), sample.n, multiplier)
                    for s in spawn_seeds(seed, n_boot)])
    y_star = fitted[None, :] + eps * resid[None, :]
    boot = system.solve(y_star, opts=opts, init=base.components)
    keep = np.asarray(boot.converged)
    dropped = int(n_boot - keep.sum())
    if dropped:
        warnings.warn(f"{dropped} bootstrap replicate(s) did not converge and were dropped",
                      RuntimeWarning, stacklevel=2)
        if dropped > max_drop * n_boot:
            raise RuntimeError(f"{dropped}/{n_boot} bootstrap replicates failed to converge")
    z = norm.ppf(0.5 * (1 + level))
    bands = []
    for j, comp in enumerate(fit.components):
        reps = boot.components[j][keep]
        est = comp.values
        center = 2 * est - reps.mean(axis=0)
        sd = (reps - est).std(axis=0, ddof=1)
        bands.append(ConfidenceBand(j, comp.grid, est, center, center - z * sd, center + z * sd,
                                    level, int(keep.sum())))
    return fit, bands


# --------------------------------------------------------------------------
# linearity test

def _residuals_and_designs(values: np.ndarray, params: AutoNormalParams):
    if values.shape[0] < 3 or values.shape[1] < 3:
        raise ValueError("no interior sites for the 4-neighbour scheme")
    y, vert, hor = neighbor_sums(values)
    a = params.alpha
    eps = y - a - params.theta1 * (vert - 2 * a) - params.theta2 * (hor - 2 * a)
    X = np.stack([values[:-2, 1:-1], values[1:-1, :-2], values[2:, 1:-1], values[1:-1, 2:]], axis=-1)
    return eps.ravel(), X.reshape(-1, 4)


def _sup_marked_sum(eps, X, order_mode, chunk=256):
    n = len(eps)
    if order_mode == "componentwise":
        cols = [np.ascontiguousarray(X[:, c]) for c in range(X.shape[1])]
        best = 0.0
        for start in range(0, n, chunk):
            below = cols[0][None, :] <= cols[0][start:start + chunk, None]
            for col in cols[1:]:
                below &= col[None, :] <= col[start:start + chunk, None]
            best = max(best, float(np.max(np.abs(below.astype(float) @ eps))))
        return best / n
    if order_mode == "lexicographic":
        order = np.lexsort(X.T[::-1])
        xs, cs = X[order], np.cumsum(eps[order])
        # ties: the partial sum must include every row equal to X_k
        same_next = np.append(np.all(xs[1:] == xs[:-1], axis=1), False)
        last_of_run = ~same_next
        return float(np.max(np.abs(cs[last_of_run]))) / n
    raise ValueError(f"unknown order mode {order_mode!r}")


def linearity_statistic(field: LatticeField | np.ndarray, params: AutoNormalParams,
                        order_mode: str = "componentwise") -> float:
    """``max_k |sum_j eps_j 1{X_j <= X_k}| / N`` over the 4-neighbour interior."""
    values = field.values if isinstance(field, LatticeField) else np.asarray(field, float)
    eps, X = _residuals_and_designs(values, params)
    return _sup_marked_sum(eps, X, order_mode)


def linearity_test(field: LatticeField, n_boot: int = 200, seed=None,
                   order_mode: str = "componentwise", with_intercept: bool = True,
                   cond_var: float | None = None, combine: str = "average") -> LinearityTestResult:
    """Parametric bootstrap test of the auto-normal null.

    Null fields are drawn from the coding-fitted scheme on the observed grid
    size, refitted by coding, and their statistics compared with the observed
    one. ``cond_var`` fixes the conditional variance of both the fit and the
    simulated fields. A fitted ``theta`` whose precision matrix is not
    positive definite on this grid is shrunk towards 0 for simulation only
    (see ``LinearityTestResult.simulated_from``).
    """
    if n_boot < 19:
        raise ValueError("n_boot must be at least 19")
    if order_mode not in ORDER_MODES:
        raise ValueError(f"unknown order mode {order_mode!r}")
    fitted = coding_fit(field, with_intercept=with_intercept, combine=combine, cond_var=cond_var)
    t_obs = linearity_statistic(field, fitted, order_mode)
    null = fitted.shrunk_to(*field.shape)
    if null is not fitted:
        warnings.warn("fitted auto-normal parameters are inadmissible on this grid; "
                      "simulating from a shrunk theta", RuntimeWarning, stacklevel=2)
    sampler = AutoNormalSampler(null, *field.shape)
    t_boot = np.empty(n_boot)
    for b, s in enumerate(spawn_seeds(seed, n_boot)):
        sim = LatticeField(sampler.draw(np.random.default_rng(s)))
        refit = coding_fit(sim, with_intercept=with_intercept, combine=combine, cond_var=cond_var)
        t_boot[b] = linearity_statistic(sim, refit, order_mode)
    p = (1 + np.count_nonzero(t_boot >= t_obs)) / (1 + n_boot)
    return LinearityTestResult(float(t_obs), t_boot, float(p), fitted, order_mode, null)
