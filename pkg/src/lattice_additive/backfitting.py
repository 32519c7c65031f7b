"""Smooth backfitting for the additive projection of a conditional mean.

Component functions are tabulated on equispaced grids; every integral in
the update is a trapezoid sum over the corresponding grid. The solver works
on raw kernel sums so that leave-one-out and bootstrap refits can reuse
them (see :class:`SmoothingSystem`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    EvalGrid,
    Kernel,
    RestrictedDomain,
    default_domain,
    kernel_matrix,
    safe_divide,
)
from .lattice import RegressionSample

__all__ = [
    "BackfitOptions",
    "ComponentFunction",
    "AdditiveFit",
    "SmoothingSystem",
    "grid_integrate",
    "default_grids",
    "backfit",
    "backfit_restricted",
    "direct_additive_oracle",
    "evaluate_fit",
]


@dataclass(frozen=True)
class BackfitOptions:
    """Stopping rule and grid defaults for the backfitting solver.

    ``later_sign`` is the sign in front of the sum over later components
    (``l > j``) in the restricted update. ``+1`` follows the restricted
    iteration literally; ``-1`` uses the same sign as the earlier
    components, which is what the restricted fixed-point equation implies.
    Plain mode always uses ``-1``.
    """

    tolerance: float = 1e-8
    max_cycles: int = 100
    n_grid: int = 101
    later_sign: int = 1

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")
        if self.n_grid < 2:
            raise ValueError("n_grid must be at least 2")
        if self.later_sign not in (-1, 1):
            raise ValueError("later_sign must be +1 or -1")


@dataclass(frozen=True)
class ComponentFunction:
    grid: EvalGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError("component values must match the grid length")
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        """Linear interpolation; points outside the grid take the boundary value."""
        out = np.interp(x, self.grid.points, self.values)
        return out[()] if np.ndim(out) == 0 else out


@dataclass
class AdditiveFit:
    m0: float
    components: list[ComponentFunction]
    bandwidth: float
    iterations: int
    final_delta: float
    converged: bool
    mode: str = "plain"
    kernel_family: str = "gaussian"
    densities: list[np.ndarray] = field(default_factory=list, repr=False)
    deltas: list[float] = field(default_factory=list, repr=False)

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def grids(self) -> list[EvalGrid]:
        return [c.grid for c in self.components]

    def predict(self, designs) -> np.ndarray:
        designs = np.atleast_2d(np.asarray(designs, dtype=float))
        out = np.full(designs.shape[0], self.m0)
        for j, comp in enumerate(self.components):
            out += comp(designs[:, j])
        return out


def grid_integrate(values, grid: EvalGrid, weight=None) -> float:
    """Trapezoid rule for ``sum w * v`` over an equispaced grid."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        raise ValueError(f"expected {grid.n_points} values, got {values.shape}")
    if weight is not None:
        weight = np.asarray(weight, dtype=float)
        if weight.shape != values.shape:
            raise ValueError("values and weight lengths differ")
        values = values * weight
    return float(grid.weights @ values)


def default_grids(sample: RegressionSample, n_points: int = 101, trim: float = 0.0) -> list[EvalGrid]:
    return default_domain(sample, trim).grids(n_points)


def _matvec(mat, vec):
    # mat (..., G, H) or (G, H); vec (..., H)
    return np.matmul(mat, vec[..., None])[..., 0]


class SmoothingSystem:
    """Kernel sums and the linear operator of one backfitting problem.

    The update for component ``j`` reads
    ``m_j = mhat_j - const_j - sum_l sign_jl * cross[j, l] @ m_l`` on the
    grid points where the (restricted) marginal density is positive, and
    ``0`` elsewhere.
    """

    def __init__(self, sample: RegressionSample, kernel: Kernel, grids,
                 domain: RestrictedDomain | None = None):
        if sample.n == 0:
            raise ValueError("empty sample")
        if len(grids) != sample.d:
            raise ValueError(f"need {sample.d} grids, got {len(grids)}")
        self.sample = sample
        self.kernel = kernel
        self.grids = list(grids)
        self.domain = domain
        self.weights = [g.weights for g in self.grids]
        X = sample.designs
        d = sample.d
        self.kmats = [kernel_matrix(kernel, g.points, X[:, j]) for j, g in enumerate(self.grids)]
        self.s1 = [k.sum(axis=1) for k in self.kmats]
        self.s2 = {}
        for j in range(d):
            for l in range(j + 1, d):
                self.s2[j, l] = self.kmats[j] @ self.kmats[l].T
                self.s2[l, j] = self.s2[j, l].T
        if domain is None:
            self._build_plain()
        else:
            self._build_restricted(domain)

    @property
    def d(self) -> int:
        return self.sample.d

    @property
    def mode(self) -> str:
        return "plain" if self.domain is None else "restricted"

    def _build_plain(self):
        n = self.sample.n
        self.density = [s / n for s in self.s1]
        self.active = [s > 0 for s in self.s1]
        self.center_w = [w * f for w, f in zip(self.weights, self.density)]
        self.cross = {
            (j, l): safe_divide(self.s2[j, l] * self.weights[l][None, :], self.s1[j][:, None])
            for (j, l) in self.s2
        }

    def _build_restricted(self, domain):
        X = self.sample.designs
        d = self.d
        if domain.d != d:
            raise ValueError("domain dimension does not match the sample")
        inside = [domain.contains(j, X[:, j]) for j in range(d)]
        grid_in = [domain.contains(j, g.points) for j, g in enumerate(self.grids)]
        self.density = []
        for j in range(d):
            count = np.count_nonzero(inside[j])
            if count == 0:
                raise ValueError(f"empty restricted domain for component {j}")
            self.density.append(np.where(grid_in[j], self.s1[j] / count, 0.0))
        self.active = [p > 0 for p in self.density]
        self.center_w = [w * p for w, p in zip(self.weights, self.density)]
        self.cross = {}
        for (j, l), s2 in self.s2.items():
            count = np.count_nonzero(inside[j] & inside[l])
            if count == 0:
                raise ValueError(f"empty restricted domain for pair ({j}, {l})")
            p2 = np.where(grid_in[j][:, None] & grid_in[l][None, :], s2 / count, 0.0)
            ratio = safe_divide(p2, self.density[j][:, None])
            marginal = (self.weights[j] @ p2) / (self.weights[j] @ self.density[j])
            kern = (ratio - marginal[None, :]) * self.weights[l][None, :]
            self.cross[j, l] = np.where(self.active[j][:, None], kern, 0.0)

    def response_terms(self, responses):
        """``mhat_j`` on the grids and the per-component constants for ``responses``.

        ``responses`` may be ``(N,)`` or a batch ``(B, N)``.
        """
        y = np.asarray(responses, dtype=float)
        mhat = [safe_divide(y @ k.T, s) for k, s in zip(self.kmats, self.s1)]
        if self.domain is None:
            ybar = y.mean(axis=-1)
            const = [ybar] * self.d
        else:
            mhat = [np.where(g, m, 0.0) for g, m in zip(self.active, mhat)]
            const = [(m @ cw) / cw.sum() for m, cw in zip(mhat, self.center_w)]
        return mhat, const

    def solve(self, responses=None, opts: BackfitOptions | None = None, init=None,
              later_sign: int | None = None, order=None):
        opts = opts or BackfitOptions()
        if responses is None:
            responses = self.sample.responses
        mhat, const = self.response_terms(responses)
        if later_sign is None:
            later_sign = -1 if self.domain is None else opts.later_sign
        return gauss_seidel(mhat, const, self.cross, self.active, self.center_w,
                            opts, later_sign=later_sign, init=init, order=order)

    def m0(self, responses=None):
        if responses is None:
            responses = self.sample.responses
        y = np.asarray(responses, dtype=float)
        if self.domain is None:
            return y.mean(axis=-1)
        _, const = self.response_terms(y)
        return np.mean(const, axis=0)


@dataclass
class SolverResult:
    components: list[np.ndarray]
    cycles: int
    deltas: list[float]
    final_delta: np.ndarray
    converged: np.ndarray


def gauss_seidel(mhat, const, cross, active, center_w, opts: BackfitOptions,
                 later_sign: int = -1, init=None, order=None) -> SolverResult:
    """Cyclic component updates with immediate re-centering.

    Works on a leading batch shape shared by ``mhat`` and ``const``; ``cross``
    matrices may carry the same batch shape or be shared.
    """
    d = len(mhat)
    order = list(range(d)) if order is None else list(order)
    if sorted(order) != list(range(d)):
        raise ValueError("order must be a permutation of the components")
    rank = {j: r for r, j in enumerate(order)}
    batch = np.shape(mhat[0])[:-1]
    const = [np.asarray(c, dtype=float) for c in const]
    if init is None:
        m = [np.zeros(np.shape(mh)) for mh in mhat]
    else:
        m = [np.array(np.broadcast_to(np.asarray(i, float), np.shape(mh))) for i, mh in zip(init, mhat)]
    cw_sum = [np.sum(cw, axis=-1) for cw in center_w]
    deltas = []
    delta = np.full(batch, np.inf)
    cycle = 0
    for cycle in range(1, opts.max_cycles + 1):
        delta = np.zeros(batch)
        for j in order:
            acc = mhat[j] - const[j][..., None]
            for l in range(d):
                if l == j:
                    continue
                sign = -1.0 if rank[l] < rank[j] else float(later_sign)
                acc = acc + sign * _matvec(cross[j, l], m[l])
            new = np.where(active[j], acc, 0.0)
            shift = safe_divide(np.sum(new * center_w[j], axis=-1), cw_sum[j])
            new = np.where(active[j], new - np.asarray(shift)[..., None], 0.0)
            change = np.max(np.abs(new - m[j]), axis=-1, initial=0.0)
            delta = np.maximum(delta, change)
            m[j] = new
        deltas.append(float(np.max(delta)) if delta.size else 0.0)
        if not np.all(np.isfinite(delta)):
            break
        if np.all(delta <= opts.tolerance):
            break
    return SolverResult(m, cycle, deltas, delta, delta <= opts.tolerance)


def _make_fit(system: SmoothingSystem, result: SolverResult, m0: float) -> AdditiveFit:
    comps = [ComponentFunction(g, v) for g, v in zip(system.grids, result.components)]
    return AdditiveFit(
        m0=float(m0),
        components=comps,
        bandwidth=system.kernel.bandwidth,
        iterations=result.cycles,
        final_delta=float(result.final_delta),
        converged=bool(result.converged),
        mode=system.mode,
        kernel_family=system.kernel.family,
        densities=[np.asarray(f) for f in system.density],
        deltas=list(result.deltas),
    )


def backfit(sample: RegressionSample, kernel: Kernel, grids=None,
            opts: BackfitOptions | None = None, init=None, order=None) -> AdditiveFit:
    """Smooth backfitting estimate of the additive approximation.

    ``m0`` is the response mean. Components start at zero (or ``init``) and
    are updated in ``order`` until the largest grid change in a cycle drops
    below ``opts.tolerance``. A run that hits ``max_cycles`` is returned
    with ``converged=False``.
    """
    opts = opts or BackfitOptions()
    if sample.n == 0:
        raise ValueError("empty sample")
    if grids is None:
        grids = default_grids(sample, opts.n_grid)
    system = SmoothingSystem(sample, kernel, grids)
    result = system.solve(opts=opts, init=init, order=order)
    if not result.converged:
        warnings.warn(f"backfitting did not converge in {opts.max_cycles} cycles "
                      f"(last change {float(result.final_delta):.3g})", RuntimeWarning, stacklevel=2)
    return _make_fit(system, result, sample.responses.mean())


def backfit_restricted(sample: RegressionSample, kernel: Kernel, domain: RestrictedDomain,
                       grids=None, opts: BackfitOptions | None = None, init=None) -> AdditiveFit:
    """Backfitting with densities restricted to the compact sets of ``domain``.

    The reported ``m0`` is the average of the per-component constants
    ``int mhat_j p_j / int p_j``.
    """
    opts = opts or BackfitOptions()
    if grids is None:
        grids = domain.grids(opts.n_grid)
    system = SmoothingSystem(sample, kernel, grids, domain=domain)
    result = system.solve(opts=opts, init=init)
    if not result.converged:
        warnings.warn("restricted backfitting did not converge", RuntimeWarning, stacklevel=2)
    return _make_fit(system, result, system.m0())


def evaluate_fit(fit: AdditiveFit, x, return_flag: bool = False):
    """``m0 + sum_j m_j(x_j)`` by linear interpolation, clamped at grid ends."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fit.d,):
        raise ValueError(f"x must have shape ({fit.d},)")
    value = fit.m0 + sum(float(c(xj)) for c, xj in zip(fit.components, x))
    if return_flag:
        clamped = any(not (c.grid.lower <= xj <= c.grid.upper) for c, xj in zip(fit.components, x))
        return value, clamped
    return value


# --------------------------------------------------------------------------
# direct solution of the discretised least-squares problem

def _solve_kkt(hess, rhs, constraints):
    n = hess.shape[0]
    k = constraints.shape[0]
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = hess
    kkt[:n, n:] = constraints.T
    kkt[n:, :n] = constraints
    sol = np.linalg.lstsq(kkt, np.concatenate([rhs, np.zeros(k)]), rcond=None)[0]
    return sol[:n]


def direct_additive_oracle(sample: RegressionSample, kernel: Kernel, grids,
                           method: str = "marginal") -> AdditiveFit:
    """Minimise the kernel-weighted squared error over centred additive functions directly.

    ``method="marginal"`` reduces the d-dimensional integral to one- and
    two-dimensional kernel marginals and applies trapezoid weights on each
    component grid, i.e. the quadrature the backfitting solver uses. Its
    constrained minimiser is therefore the solver's fixed point.

    ``method="product"`` evaluates the full product-kernel density and
    regression on the product grid (``d <= 3``) and solves the weighted least
    squares problem there, with ``m0`` free. It matches the marginal form
    only when the grids carry essentially all kernel mass.
    """
    d = sample.d
    if len(grids) != d:
        raise ValueError(f"need {d} grids")
    n = sample.n
    X, y = sample.designs, sample.responses
    pts = [g.points for g in grids]
    wts = [g.weights for g in grids]
    sizes = [g.n_points for g in grids]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    kmats = [kernel_matrix(kernel, p, X[:, j]) for j, p in enumerate(pts)]

    if method == "marginal":
        ybar = y.mean()
        total = offs[-1]
        hess = np.zeros((total, total))
        rhs = np.zeros(total)
        cons = np.zeros((d, total))
        dens = []
        for j in range(d):
            sj = slice(offs[j], offs[j + 1])
            f_j = kmats[j].mean(axis=1)
            r_j = kmats[j] @ y / n
            dens.append(f_j)
            hess[sj, sj] = np.diag(wts[j] * f_j)
            rhs[sj] = wts[j] * (r_j - ybar * f_j)
            cons[j, sj] = wts[j] * f_j
            for l in range(d):
                if l != j:
                    f_jl = np.einsum("gi,hi->gh", kmats[j], kmats[l]) / n
                    hess[sj, offs[l]:offs[l + 1]] = wts[j][:, None] * f_jl * wts[l][None, :]
        sol = _solve_kkt(hess, rhs, cons)
        m0 = ybar
    elif method == "product":
        if d > 3:
            raise NotImplementedError("product-grid oracle supports d <= 3 only")
        letters = "abc"[:d]
        spec = ",".join(f"{c}i" for c in letters)
        f_full = np.einsum(f"{spec}->{letters}", *kmats) / n
        r_full = np.einsum(f"{spec},i->{letters}", *kmats, y) / n
        w_full = np.ones(sizes)
        for j in range(d):
            shape = [1] * d
            shape[j] = sizes[j]
            w_full = w_full * wts[j].reshape(shape)
        mw = (w_full * f_full).ravel()
        target = safe_divide(r_full, f_full).ravel()
        idx = np.indices(sizes).reshape(d, -1)
        total = 1 + offs[-1]
        design = np.zeros((mw.size, total))
        design[:, 0] = 1.0
        for j in range(d):
            design[np.arange(mw.size), 1 + offs[j] + idx[j]] = 1.0
        hess = design.T @ (design * mw[:, None])
        rhs = design.T @ (mw * target)
        cons = np.zeros((d, total))
        dens = []
        for j in range(d):
            axes = tuple(a for a in range(d) if a != j)
            other = w_full / wts[j].reshape([sizes[j] if a == j else 1 for a in range(d)])
            marg = (other * f_full).sum(axis=axes)
            dens.append(marg)
            cons[j, 1 + offs[j]:1 + offs[j + 1]] = wts[j] * marg
        full = _solve_kkt(hess, rhs, cons)
        m0, sol = full[0], full[1:]
    else:
        raise ValueError(f"unknown oracle method {method!r}")

    comps = [ComponentFunction(g, sol[offs[j]:offs[j + 1]]) for j, g in enumerate(grids)]
    return AdditiveFit(float(m0), comps, kernel.bandwidth, 0, 0.0, True,
                       mode=f"oracle-{method}", kernel_family=kernel.family, densities=dens)
