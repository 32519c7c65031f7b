"""Additive autoregression on rectangular lattices by smooth backfitting.

The package fits ``Y(s) = m0 + sum_j m_j(Y(s - i_j)) + e(s)`` to a field
observed on a grid, with kernel-smoothed backfitting, leave-one-out bandwidth
choice, wild-bootstrap bands and a parametric-bootstrap test of the
auto-normal (linear) alternative. Simulators for a nonlinear unilateral
recursion and the first-order auto-normal scheme are included.
"""

__version__ = "0.1.0"

from .backfitting import (
    AdditiveFit,
    BackfitOptions,
    ComponentFunction,
    backfit,
    backfit_restricted,
    default_grids,
    direct_additive_oracle,
    evaluate_fit,
)
from .bandwidth import CvResult, cv_score, select_bandwidth
from .bootstrap import (
    ConfidenceBand,
    LinearityTestResult,
    bootstrap_ci,
    linearity_statistic,
    linearity_test,
    wild_resample,
)
from .estimator import SmoothBackfitRegressor, field_design
from .kernels import EvalGrid, Kernel, RestrictedDomain, default_domain
from .lattice import (
    FOUR_NEIGHBORS,
    LatticeField,
    NeighborScheme,
    RegressionSample,
    extract_samples,
    read_field,
    write_csv_field,
)
from .simulate import (
    AutoNormalParams,
    UnilateralModel,
    coding_fit,
    simulate_autonormal,
    simulate_unilateral,
)

__all__ = [
    "AdditiveFit",
    "AutoNormalParams",
    "BackfitOptions",
    "ComponentFunction",
    "ConfidenceBand",
    "CvResult",
    "EvalGrid",
    "FOUR_NEIGHBORS",
    "Kernel",
    "LatticeField",
    "LinearityTestResult",
    "NeighborScheme",
    "RegressionSample",
    "RestrictedDomain",
    "SmoothBackfitRegressor",
    "UnilateralModel",
    "backfit",
    "backfit_restricted",
    "bootstrap_ci",
    "coding_fit",
    "cv_score",
    "default_domain",
    "default_grids",
    "direct_additive_oracle",
    "evaluate_fit",
    "extract_samples",
    "field_design",
    "linearity_statistic",
    "linearity_test",
    "read_field",
    "select_bandwidth",
    "simulate_autonormal",
    "simulate_unilateral",
    "wild_resample",
]
