import numpy as np
import pytest
from scipy.stats import norm

from lattice_additive.backfitting import BackfitOptions, backfit, default_grids
from lattice_additive.bootstrap import (
    bootstrap_ci,
    linearity_statistic,
    linearity_test,
    spawn_seeds,
    wild_resample,
)
from lattice_additive.kernels import Kernel
from lattice_additive.lattice import FOUR_NEIGHBORS, LatticeField, RegressionSample, extract_samples
from lattice_additive.simulate import AutoNormalParams, UnilateralModel, simulate_autonormal, simulate_unilateral

from conftest import random_sample
from test_simulate import conditional_field


def brute_statistic(values, params, lexicographic=False):
    R, C = values.shape
    a = params.alpha
    eps, X = [], []
    for u in range(1, R - 1):
        for v in range(1, C - 1):
            vert = values[u - 1, v] + values[u + 1, v]
            hor = values[u, v - 1] + values[u, v + 1]
            eps.append(values[u, v] - a - params.theta1 * (vert - 2 * a) - params.theta2 * (hor - 2 * a))
            X.append((values[u - 1, v], values[u, v - 1], values[u + 1, v], values[u, v + 1]))
    best = 0.0
    for xk in X:
        s = 0.0
        for e, xj in zip(eps, X):
            below = xj <= xk if lexicographic else all(p <= q for p, q in zip(xj, xk))
            if below:
                s += e
        best = max(best, abs(s))
    return best / len(eps)


def additive_sample():
    X = np.random.default_rng(0).normal(size=(40, 2))
    return RegressionSample.from_arrays(X, np.zeros(40))


def test_zero_residuals_are_preserved():
    sample = additive_sample()
    fit = backfit(sample, Kernel("gaussian", 0.5))
    y_star = wild_resample(sample, fit, seed=3)
    np.testing.assert_array_equal(y_star, sample.responses)


def test_zero_multipliers_give_fitted_values(rng):
    sample = random_sample(rng)
    fit = backfit(sample, Kernel("gaussian", 0.5))
    np.testing.assert_array_equal(wild_resample(sample, fit, eps=np.zeros(sample.n)), fit.predict(sample.designs))


def test_wild_resample_deterministic(rng):
    sample = random_sample(rng)
    fit = backfit(sample, Kernel("gaussian", 0.5))
    a = wild_resample(sample, fit, seed=9)
    b = wild_resample(sample, fit, seed=9)
    assert a.tobytes() == b.tobytes()
    r = wild_resample(sample, fit, seed=9, multiplier="rademacher")
    resid = np.abs(sample.responses - fit.predict(sample.designs))
    np.testing.assert_allclose(np.abs(r - fit.predict(sample.designs)), resid)


def test_zero_residual_bands_have_zero_width():
    sample = additive_sample()
    fit, bands = bootstrap_ci(sample, Kernel("gaussian", 0.5), n_boot=20, seed=1)
    for band in bands:
        assert np.max(band.half_width) < 1e-12
        np.testing.assert_allclose(band.center, band.estimate, atol=1e-12)


def test_band_shape_and_multiplier(rng):
    sample = random_sample(rng, n=80)
    grids = default_grids(sample, 31)
    fit, bands = bootstrap_ci(sample, Kernel("gaussian", 0.5), grids, level=0.95, n_boot=60, seed=4)
    assert len(bands) == sample.d
    for band in bands:
        assert np.all(band.lower <= band.center) and np.all(band.center <= band.upper)
        assert band.n_boot == 60
    # recompute one band from explicit replicates
    y = np.stack([wild_resample(sample, fit, eps=np.random.default_rng(s).standard_normal(sample.n))
                  for s in spawn_seeds(4, 60)])
    reps = np.stack([backfit(RegressionSample.from_arrays(sample.designs, yb), Kernel("gaussian", 0.5), grids)
                     .components[0].values for yb in y])
    sd = (reps - fit.components[0].values).std(axis=0, ddof=1)
    np.testing.assert_allclose(bands[0].half_width, norm.ppf(0.975) * sd, atol=1e-6)
    assert norm.ppf(0.975) == pytest.approx(1.959964, abs=1e-6)


def test_bootstrap_ci_validation(rng):
    sample = random_sample(rng)
    with pytest.raises(ValueError):
        bootstrap_ci(sample, Kernel("gaussian", 0.5), n_boot=1)
    with pytest.raises(ValueError):
        bootstrap_ci(sample, Kernel("gaussian", 0.5), level=1.0)


def test_bands_deterministic(rng):
    sample = random_sample(rng)
    a = bootstrap_ci(sample, Kernel("gaussian", 0.5), n_boot=10, seed=np.random.SeedSequence(5))[1]
    b = bootstrap_ci(sample, Kernel("gaussian", 0.5), n_boot=10, seed=np.random.SeedSequence(5))[1]
    assert a[1].upper.tobytes() == b[1].upper.tobytes()


def test_bands_shrink_with_sample_size():
    p = AutoNormalParams(0.2, 0.25)
    med = {}
    for size in (20, 40):
        widths = []
        for s in range(20):
            field = simulate_autonormal(p, size, size, seed=1000 * size + s)
            sample = extract_samples(field, FOUR_NEIGHBORS)
            _, bands = bootstrap_ci(sample, Kernel("gaussian", 0.4), default_grids(sample, 31, trim=0.05),
                                    n_boot=30, seed=s)
            widths.append(np.median([np.median(b.half_width) for b in bands]))
        med[size] = np.median(widths)
    assert med[40] < med[20]


@pytest.mark.parametrize("mode", ["componentwise", "lexicographic"])
def test_statistic_matches_double_loop(null_field, mode):
    params = AutoNormalParams(0.21, 0.18, alpha=0.05)
    got = linearity_statistic(null_field, params, mode)
    want = brute_statistic(null_field.values, params, lexicographic=mode == "lexicographic")
    assert abs(got - want) < 1e-12


def test_statistic_with_ties():
    values = np.random.default_rng(2).integers(0, 3, size=(9, 9)).astype(float)
    params = AutoNormalParams(0.1, 0.2)
    for mode in ("componentwise", "lexicographic"):
        got = linearity_statistic(values, params, mode)
        assert abs(got - brute_statistic(values, params, mode == "lexicographic")) < 1e-12


def test_statistic_single_site():
    values = np.arange(9, dtype=float).reshape(3, 3)
    p = AutoNormalParams(0.1, 0.2)
    eps = 4 - 0.1 * (1 + 7) - 0.2 * (3 + 5)
    assert linearity_statistic(values, p) == pytest.approx(abs(eps))


def test_statistic_zero_for_exact_scheme():
    f = conditional_field(0.2, 0.25, 12, 12, 0.0, np.random.default_rng(6))
    assert linearity_statistic(f, AutoNormalParams(0.2, 0.25)) < 1e-12


def test_statistic_errors():
    with pytest.raises(ValueError):
        linearity_statistic(np.zeros((2, 5)), AutoNormalParams(0.1, 0.1))
    with pytest.raises(ValueError):
        linearity_statistic(np.zeros((4, 4)), AutoNormalParams(0.1, 0.1), "radial")


def test_linearity_test_p_value(null_field):
    res = linearity_test(null_field, n_boot=19, seed=3)
    assert res.p_value == (1 + np.sum(res.t_boot >= res.t_observed)) / 20
    assert 1 / 20 <= res.p_value <= 1
    again = linearity_test(null_field, n_boot=19, seed=3)
    assert again.p_value == res.p_value
    assert again.t_boot.tobytes() == res.t_boot.tobytes()
    with pytest.raises(ValueError):
        linearity_test(null_field, n_boot=18)


def test_linearity_test_minimum_p_on_nonlinear_field():
    field = simulate_unilateral(UnilateralModel(), 61, 61, seed=np.random.default_rng(5))
    res = linearity_test(field, n_boot=19, seed=0)
    assert res.p_value == pytest.approx(0.05)


def test_linearity_test_shift_invariance(null_field):
    a = linearity_test(null_field, n_boot=19, seed=1)
    b = linearity_test(null_field.shifted(3.0), n_boot=19, seed=1)
    assert abs(a.t_observed - b.t_observed) < 1e-8


def test_linearity_test_shrinks_inadmissible_fit():
    f = conditional_field(0.3, 0.3, 8, 8, 0.3, np.random.default_rng(0))
    with pytest.warns(RuntimeWarning, match="inadmissible"):
        res = linearity_test(f, n_boot=19, seed=0, with_intercept=False)
    assert res.shrunk
    assert res.simulated_from.spectral_radius(8, 8) <= 0.99 + 1e-12


def test_spawn_seeds_accepts_sequences():
    ss = np.random.SeedSequence(42)
    a = [s.generate_state(1)[0] for s in spawn_seeds(ss, 3)]
    b = [s.generate_state(1)[0] for s in spawn_seeds(ss, 3)]
    c = [s.generate_state(1)[0] for s in spawn_seeds(42, 3)]
    assert a == b == c
