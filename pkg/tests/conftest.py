import sys

import numpy as np
import pytest

from lattice_additive import AutoNormalParams, LatticeField, RegressionSample, simulate_autonormal


def random_sample(rng, n=60, d=2, noise=0.3):
    X = rng.normal(size=(n, d))
    y = np.sin(X[:, 0]) + (X[:, 1] ** 2 if d > 1 else 0) + noise * rng.normal(size=n)
    return RegressionSample.from_arrays(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def null_field():
    """20x20 auto-normal field with the reference parameters."""
    return simulate_autonormal(AutoNormalParams(0.2, 0.25), 20, 20, seed=2024)


@pytest.fixture
def ramp_field():
    return LatticeField(np.arange(12, dtype=float).reshape(3, 4))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)
