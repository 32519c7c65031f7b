import numpy as np
import pytest

from lattice_additive.lattice import LatticeField, checkerboard_coding
from lattice_additive.simulate import (
    AutoNormalParams,
    AutoNormalSampler,
    UnilateralModel,
    coding_fit,
    neighbor_sums,
    simulate_autonormal,
    simulate_unilateral,
)


def precision(params, R, C):
    n = R * C
    Q = np.eye(n)
    for u in range(R):
        for v in range(C):
            i = u * C + v
            if u + 1 < R:
                Q[i, i + C] = Q[i + C, i] = -params.theta1
            if v + 1 < C:
                Q[i, i + 1] = Q[i + 1, i] = -params.theta2
    return Q / params.cond_var


def lag1(values):
    c = values - values.mean()
    var = np.mean(c * c)
    return np.mean(c[1:] * c[:-1]) / var, np.mean(c[:, 1:] * c[:, :-1]) / var


def conditional_field(theta1, theta2, R, C, noise, rng):
    """Interior sites satisfy Y = theta1 * vsum + theta2 * hsum + noise exactly."""
    p = AutoNormalParams(theta1, theta2)
    Q = precision(p, R, C)
    interior = np.zeros((R, C), bool)
    interior[1:-1, 1:-1] = True
    rhs = np.where(interior, noise * rng.standard_normal((R, C)), rng.normal(size=(R, C))).ravel()
    # boundary rows of Q are replaced by identity so boundary values are free
    A = np.where(interior.ravel()[:, None], Q, np.eye(R * C))
    return LatticeField(np.linalg.solve(A, rhs).reshape(R, C))


def test_unilateral_degenerate_is_zero():
    f = simulate_unilateral(UnilateralModel(g1=np.zeros_like, g2=np.zeros_like, noise_sd=0.0), 6, 7, seed=1)
    assert f.shape == (6, 7)
    assert np.all(f.values == 0)


def test_unilateral_recursion_and_bounds():
    m = UnilateralModel(burn_in=0)
    f = simulate_unilateral(m, 40, 50, seed=5)
    assert np.mean(np.abs(f.values) <= 8) == 1.0
    # with burn_in 0 the recursion can be undone to recover the noise
    y = f.values
    e = y[1:, 1:] - np.sin(y[:-1, 1:]) - np.cos(y[1:, :-1])
    assert abs(e.std() - 1) < 0.05


def test_unilateral_is_reproducible():
    a = simulate_unilateral(UnilateralModel(), 24, 28, seed=11)
    b = simulate_unilateral(UnilateralModel(), 24, 28, seed=11)
    np.testing.assert_array_equal(a.values, b.values)


def test_unilateral_moments_are_stable():
    ests = [np.sin(simulate_unilateral(UnilateralModel(), 200, 200, seed=s).values).mean() for s in range(4)]
    assert np.std(ests, ddof=1) < 0.01


def test_independent_autonormal():
    f = simulate_autonormal(AutoNormalParams(0.0, 0.0, alpha=1.5, cond_var=2.0), 100, 100, seed=3)
    x = f.values.ravel()
    se_mean = np.sqrt(2.0 / x.size)
    se_var = 2.0 * np.sqrt(2.0 / (x.size - 1))
    assert abs(x.mean() - 1.5) < 4 * se_mean
    assert abs(x.var(ddof=1) - 2.0) < 4 * se_var


def test_exact_sampler_covariance():
    p = AutoNormalParams(0.3, -0.15, cond_var=0.7)
    sampler = AutoNormalSampler(p, 3, 4)
    draws = sampler.draw(np.random.default_rng(0), size=200_000).reshape(200_000, -1)
    emp = np.cov(draws, rowvar=False)
    np.testing.assert_allclose(emp, np.linalg.inv(precision(p, 3, 4)), atol=0.02)


def test_exact_sampler_recovers_conditional_mean():
    f = simulate_autonormal(AutoNormalParams(0.2, 0.25), 200, 200, seed=8)
    y, vert, hor = neighbor_sums(f.values)
    coef = np.linalg.lstsq(np.column_stack([vert.ravel(), hor.ravel()]), y.ravel(), rcond=None)[0]
    np.testing.assert_allclose(coef, [0.2, 0.25], atol=0.02)


def test_exact_and_gibbs_agree():
    p = AutoNormalParams(0.2, 0.25)
    exact = np.mean([lag1(simulate_autonormal(p, 50, 50, seed=s).values) for s in range(10)], axis=0)
    gibbs = np.mean([lag1(simulate_autonormal(p, 50, 50, seed=100 + s, method="gibbs", sweeps=1000).values)
                     for s in range(10)], axis=0)
    np.testing.assert_allclose(exact, gibbs, atol=0.03)


def test_parameter_check():
    with pytest.raises(ValueError):
        simulate_autonormal(AutoNormalParams(0.3, 0.3), 10, 10)
    with pytest.raises(ValueError):
        AutoNormalParams(0.1, 0.1, cond_var=0).check()
    # admissible on a small grid, not on the infinite lattice
    AutoNormalParams(0.26, 0.25).check(5, 5)
    p = AutoNormalParams(0.4, 0.3)
    q = p.shrunk_to(20, 20)
    assert q.spectral_radius(20, 20) == pytest.approx(0.99)
    assert q.theta1 / q.theta2 == pytest.approx(p.theta1 / p.theta2)
    with pytest.raises(ValueError):
        simulate_autonormal(AutoNormalParams(0.1, 0.1), 5, 5, method="metropolis")


def test_coding_fit_on_constructed_field():
    f = conditional_field(0.2, 0.25, 20, 20, 1e-6, np.random.default_rng(4))
    est = coding_fit(f, with_intercept=False)
    assert est.theta1 == pytest.approx(0.2, abs=1e-4)
    assert est.theta2 == pytest.approx(0.25, abs=1e-4)
    stacked = coding_fit(f, with_intercept=False, combine="stack")
    assert stacked.theta1 == pytest.approx(0.2, abs=1e-4)


def test_coding_fit_constant_field():
    with pytest.raises(ValueError, match="degenerate coding regression"):
        coding_fit(LatticeField(np.full((6, 6), 3.0)))


def test_coding_fit_shift_equivariance(null_field):
    a = coding_fit(null_field)
    b = coding_fit(null_field.shifted(4.0))
    assert b.alpha == pytest.approx(a.alpha + 4.0)
    assert abs(a.theta1 - b.theta1) < 1e-10 and abs(a.theta2 - b.theta2) < 1e-10


def test_coding_fit_fixed_variance(null_field):
    assert coding_fit(null_field, cond_var=1.0).cond_var == 1.0


def test_coding_fit_mean_over_replications():
    p = AutoNormalParams(0.2, 0.25)
    sampler = AutoNormalSampler(p, 20, 20)
    rng = np.random.default_rng(77)
    est = [coding_fit(LatticeField(sampler.draw(rng))) for _ in range(100)]
    assert np.mean([e.theta1 for e in est]) == pytest.approx(0.2, abs=0.03)
    assert np.mean([e.theta2 for e in est]) == pytest.approx(0.25, abs=0.03)


def test_codes_agree_on_null_data():
    f = simulate_autonormal(AutoNormalParams(0.2, 0.25), 60, 60, seed=21)
    part = checkerboard_coding(f)
    v = f.values
    coefs, covs = [], []
    for sites in (part.code_a, part.code_b):
        u, c = sites[:, 0] - 1, sites[:, 1] - 1
        Z = np.column_stack([v[u - 1, c] + v[u + 1, c], v[u, c - 1] + v[u, c + 1]])
        r = v[u, c]
        beta = np.linalg.lstsq(Z, r, rcond=None)[0]
        s2 = np.sum((r - Z @ beta) ** 2) / (len(r) - 2)
        coefs.append(beta)
        covs.append(s2 * np.linalg.inv(Z.T @ Z))
    se = np.sqrt(np.diag(covs[0]) + np.diag(covs[1]))
    assert np.all(np.abs(coefs[0] - coefs[1]) < 4 * se)
