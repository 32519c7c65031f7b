"""Monte Carlo studies: the unilateral and auto-normal simulation examples.

Every study draws one child seed per replicate from ``SeedSequence(seed)``,
so replicate ``r`` sees the same random numbers whatever the execution order
or number of worker processes.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache, partial

import numpy as np

from .backfitting import BackfitOptions, backfit, default_grids
from .bandwidth import select_bandwidth
from .bootstrap import bootstrap_ci, linearity_test, spawn_seeds
from .kernels import Kernel
from .lattice import FOUR_NEIGHBORS, NeighborScheme, extract_samples
from .simulate import AutoNormalParams, UnilateralModel, simulate_autonormal, simulate_unilateral

__all__ = [
    "EXAMPLE1_SCHEME",
    "EXAMPLE2_SCHEME",
    "EXAMPLE2_PARAMS",
    "STUDIES",
    "unilateral_reference",
    "example1_truth",
    "run_study",
]

log = logging.getLogger(__name__)

# X(s) = (Y(u-1,v), Y(u,v-1), Y(u-1,v-1))
EXAMPLE1_SCHEME = NeighborScheme(((1, 0), (0, 1), (1, 1)))
EXAMPLE1_SHAPE = (24, 28)
EXAMPLE1_CANDIDATES = tuple(np.round(np.arange(0.15, 1.0 + 1e-9, 0.05), 2))
EXAMPLE2_SCHEME = FOUR_NEIGHBORS
EXAMPLE2_PARAMS = AutoNormalParams(0.2, 0.25)
EXAMPLE2_SHAPE = (20, 20)
EXAMPLE2_SLOPES = (0.2, 0.25, 0.2, 0.25)
EXAMPLE2_POINTS = np.linspace(-1.5, 1.5, 11)


@lru_cache(maxsize=4)
def unilateral_reference(seed: int = 20070401, size: int = 200, n_fields: int = 4):
    """Moments of the stationary unilateral field from large simulations.

    Returns ``(E sin Y, E cos Y, q05, q95)``; the quantiles are of the
    pooled marginal.
    """
    seeds = spawn_seeds(seed, n_fields)
    vals = np.concatenate([simulate_unilateral(UnilateralModel(), size, size, s).values.ravel()
                           for s in seeds])
    q05, q95 = np.quantile(vals, [0.05, 0.95])
    return float(np.sin(vals).mean()), float(np.cos(vals).mean()), float(q05), float(q95)


def example1_points(n: int = 13) -> np.ndarray:
    _, _, q05, q95 = unilateral_reference()
    return np.linspace(q05, q95, n)


def example1_truth(x) -> np.ndarray:
    """True components ``(sin x - E sin Y, cos x - E cos Y, 0)`` stacked as rows."""
    es, ec, _, _ = unilateral_reference()
    x = np.asarray(x, dtype=float)
    return np.stack([np.sin(x) - es, np.cos(x) - ec, np.zeros_like(x)])


CENTRAL = slice(3, 10)  # 7 central points of 13


# --------------------------------------------------------------------------
# single replicates; each takes a SeedSequence and returns a JSON-able dict

def example1_replicate(seed, candidates=EXAMPLE1_CANDIDATES, n_grid: int = 41, stride: int = 4):
    field = simulate_unilateral(UnilateralModel(), *EXAMPLE1_SHAPE, seed=np.random.default_rng(seed))
    sample = extract_samples(field, EXAMPLE1_SCHEME)
    grids = default_grids(sample, n_grid)
    opts = BackfitOptions()
    cv = select_bandwidth(sample, "gaussian", candidates, grids, opts, stride)
    fit = backfit(sample, Kernel("gaussian", cv.chosen), grids, opts)
    pts = example1_points()
    est = np.stack([c(pts) for c in fit.components])
    return {
        "bandwidth": cv.chosen,
        "cv_scores": cv.scores.tolist(),
        "estimates": est.tolist(),
        "m3_central_abs": float(np.mean(np.abs(est[2, CENTRAL]))),
    }


def example2_curves_replicate(seed, h: float = 0.4, n_grid: int = 101):
    field = simulate_autonormal(EXAMPLE2_PARAMS, *EXAMPLE2_SHAPE, seed=np.random.default_rng(seed))
    sample = extract_samples(field, EXAMPLE2_SCHEME)
    fit = backfit(sample, Kernel("gaussian", h), default_grids(sample, n_grid), BackfitOptions())
    est = np.stack([c(EXAMPLE2_POINTS) for c in fit.components])
    slopes = [float(np.polyfit(EXAMPLE2_POINTS, e, 1)[0]) for e in est]
    return {"slopes": slopes, "iterations": fit.iterations, "converged": fit.converged}


def example2_test_replicate(seed, n_boot: int = 200, order_mode: str = "componentwise"):
    field_seed, boot_seed = spawn_seeds(seed, 2)
    field = simulate_autonormal(EXAMPLE2_PARAMS, *EXAMPLE2_SHAPE, seed=np.random.default_rng(field_seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = linearity_test(field, n_boot, boot_seed, order_mode, with_intercept=False, cond_var=1.0)
    return {"t_observed": res.t_observed, "p_value": res.p_value, "shrunk": res.shrunk,
            "theta": [res.fitted.theta1, res.fitted.theta2]}


def power_replicate(seed, n_boot: int = 200, size: int = 61, order_mode: str = "componentwise"):
    field_seed, boot_seed = spawn_seeds(seed, 2)
    field = simulate_unilateral(UnilateralModel(), size, size, seed=np.random.default_rng(field_seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = linearity_test(field, n_boot, boot_seed, order_mode, with_intercept=True)
    return {"t_observed": res.t_observed, "p_value": res.p_value, "shrunk": res.shrunk}


def ci_coverage_replicate(seed, h: float | None = None, n_boot: int = 100, level: float = 0.95,
                          n_grid: int = 41, stride: int = 4):
    """Coverage of the bands at the central points; ``h=None`` picks the bandwidth by CV as in example1."""
    field_seed, boot_seed = spawn_seeds(seed, 2)
    field = simulate_unilateral(UnilateralModel(), *EXAMPLE1_SHAPE, seed=np.random.default_rng(field_seed))
    sample = extract_samples(field, EXAMPLE1_SCHEME)
    grids = default_grids(sample, n_grid)
    opts = BackfitOptions()
    if h is None:
        h = select_bandwidth(sample, "gaussian", EXAMPLE1_CANDIDATES, grids, opts, stride).chosen
    _, bands = bootstrap_ci(sample, Kernel("gaussian", h), grids, opts, level, n_boot, boot_seed)
    pts = example1_points()[CENTRAL]
    truth = example1_truth(pts)
    covered = []
    for j, band in enumerate(bands):
        lo = np.interp(pts, band.grid.points, band.lower)
        hi = np.interp(pts, band.grid.points, band.upper)
        covered.append(((lo <= truth[j]) & (truth[j] <= hi)).tolist())
    return {"covered": covered, "bandwidth": float(h)}


def _summary_example1(reps):
    h = np.array([r["bandwidth"] for r in reps])
    est = np.array([r["estimates"] for r in reps])
    return {
        "bandwidth_mean": float(h.mean()),
        "bandwidth_var": float(h.var(ddof=1)) if len(h) > 1 else 0.0,
        "m3_central_mean_abs": float(np.mean([r["m3_central_abs"] for r in reps])),
        "eval_points": example1_points().tolist(),
        "estimate_mean": est.mean(axis=0).tolist(),
        "truth": example1_truth(example1_points()).tolist(),
        "target": {"bandwidth_mean": 0.416, "bandwidth_var": 0.064},
    }


def _summary_example2_curves(reps):
    slopes = np.array([r["slopes"] for r in reps])
    return {"slope_mean": slopes.mean(axis=0).tolist(), "slope_sd": slopes.std(axis=0, ddof=1).tolist(),
            "target": list(EXAMPLE2_SLOPES), "eval_points": EXAMPLE2_POINTS.tolist()}


def _rejection_summary(reps):
    p = np.array([r["p_value"] for r in reps])
    return {"reject_10": float(np.mean(p <= 0.10)), "reject_05": float(np.mean(p <= 0.05)),
            "n_shrunk": int(sum(r["shrunk"] for r in reps))}


def _summary_example2_test(reps):
    out = _rejection_summary(reps)
    out["target"] = {"reject_10": 0.108, "reject_05": 0.044}
    return out


def _summary_coverage(reps):
    cov = np.array([r["covered"] for r in reps], dtype=float)  # (reps, d, 7)
    return {"coverage": float(cov.mean()), "coverage_by_component": cov.mean(axis=(0, 2)).tolist(),
            "bandwidth_mean": float(np.mean([r["bandwidth"] for r in reps]))}


STUDIES = {
    "example1": (example1_replicate, _summary_example1),
    "example2-curves": (example2_curves_replicate, _summary_example2_curves),
    "example2-test": (example2_test_replicate, _summary_example2_test),
    "power": (power_replicate, _rejection_summary),
    "ci-coverage": (ci_coverage_replicate, _summary_coverage),
}


def _safe_call(func, seed):
    try:
        return func(seed)
    except Exception as exc:  # recorded per replicate, judged in aggregate
        return {"error": f"{type(exc).__name__}: {exc}"}


def run_study(name: str, n_reps: int, seed: int = 0, jobs: int = 1, max_fail: float = 0.1, **kwargs):
    """Run ``n_reps`` replicates of a named study and summarise them."""
    if name not in STUDIES:
        raise ValueError(f"unknown study {name!r}; choose from {sorted(STUDIES)}")
    replicate, summarise = STUDIES[name]
    func = partial(_safe_call, partial(replicate, **kwargs))
    seeds = spawn_seeds(seed, n_reps)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            reps = list(pool.map(func, seeds))
    else:
        reps = [func(s) for s in seeds]
    failed = [i for i, r in enumerate(reps) if "error" in r]
    if len(failed) > max_fail * n_reps:
        raise RuntimeError(f"{len(failed)}/{n_reps} replicates failed: {reps[failed[0]]['error']}")
    good = [r for r in reps if "error" not in r]
    summary = summarise(good) if good else {}
    summary.update({"n_reps": n_reps, "n_failed": len(failed)})
    return {"study": name, "seed": seed, "params": kwargs, "summary": summary, "replicates": reps}
