"""scikit-learn compatible front end for smooth backfitting."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .backfitting import BackfitOptions, backfit, backfit_restricted
from .bandwidth import select_bandwidth
from .kernels import Kernel, default_domain
from .lattice import LatticeField, NeighborScheme, RegressionSample, extract_samples


class SmoothBackfitRegressor(RegressorMixin, TransformerMixin, BaseEstimator):
    """Additive regression ``m0 + sum_j m_j(x_j)`` by smooth backfitting.

    Parameters
    ----------
    bandwidth : float or None
        Common kernel bandwidth. ``None`` selects it by leave-one-out
        cross-validation over ``candidates``.
    kernel : {"gaussian", "epanechnikov"}
    n_grid : int
        Tabulation points per component.
    trim : float
        Quantile trimmed from each end of every design column when placing
        the grids (and the restricted sets when ``restricted=True``).
    tol, max_cycles : float, int
        Stopping rule of the backfitting cycles.
    restricted : bool
        Use densities restricted to the trimmed compact sets.
    later_sign : {1, -1}
        Sign of the later-component sum in the restricted update.
    candidates : array-like or None
        Bandwidth candidates for cross-validation.
    cv_stride : int
        Hold out every ``cv_stride``-th row during cross-validation.

    Attributes
    ----------
    fit_ : AdditiveFit
    bandwidth_ : float
    cv_result_ : CvResult or None
    """

    def __init__(self, bandwidth=None, kernel="gaussian", n_grid=101, trim=0.0, tol=1e-8,
                 max_cycles=100, restricted=False, later_sign=1, candidates=None, cv_stride=1):
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.n_grid = n_grid
        self.trim = trim
        self.tol = tol
        self.max_cycles = max_cycles
        self.restricted = restricted
        self.later_sign = later_sign
        self.candidates = candidates
        self.cv_stride = cv_stride

    def _options(self):
        return BackfitOptions(tolerance=self.tol, max_cycles=self.max_cycles,
                              n_grid=self.n_grid, later_sign=self.later_sign)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        sample = RegressionSample.from_arrays(X, y)
        opts = self._options()
        domain = default_domain(sample, self.trim)
        grids = domain.grids(self.n_grid)
        self.cv_result_ = None
        h = self.bandwidth
        if h is None:
            if self.restricted:
                raise ValueError("bandwidth selection is only available for plain backfitting")
            self.cv_result_ = select_bandwidth(sample, self.kernel, self.candidates, grids, opts,
                                               self.cv_stride)
            h = self.cv_result_.chosen
        kernel = Kernel(self.kernel, h)
        if self.restricted:
            self.fit_ = backfit_restricted(sample, kernel, domain, grids, opts)
        else:
            self.fit_ = backfit(sample, kernel, grids, opts)
        self.bandwidth_ = float(h)
        self.n_iter_ = self.fit_.iterations
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.fit_.predict(X)

    def transform(self, X):
        """Per-component contributions ``m_j(x_j)`` as an ``(n, d)`` array."""
        check_is_fitted(self, "fit_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.column_stack([c(X[:, j]) for j, c in enumerate(self.fit_.components)])

    @property
    def m0_(self):
        check_is_fitted(self, "fit_")
        return self.fit_.m0


def field_design(field: LatticeField | np.ndarray, scheme: NeighborScheme | str):
    """``(X, y)`` arrays for a lattice field, ready for :class:`SmoothBackfitRegressor`."""
    if not isinstance(field, LatticeField):
        field = LatticeField(field)
    if isinstance(scheme, str):
        scheme = NeighborScheme.parse(scheme)
    sample = extract_samples(field, scheme)
    return sample.designs, sample.responses
