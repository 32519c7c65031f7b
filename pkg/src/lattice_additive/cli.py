"""Command-line front end.

Subcommands ``simulate``, ``fit``, ``cv``, ``ci``, ``test`` and ``reproduce``
write JSON documents (see :mod:`lattice_additive.io`) plus CSV files for
fields and curves. Failures exit with status 1 (2 for usage errors) and a
JSON object ``{"error": {...}}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .backfitting import BackfitOptions, backfit, backfit_restricted
from .bandwidth import select_bandwidth
from .bootstrap import bootstrap_ci, linearity_test
from .experiments import STUDIES, run_study
from .kernels import Kernel, default_domain
from .lattice import FOUR_NEIGHBORS, NeighborScheme, extract_samples, read_field, write_csv_field
from .simulate import AutoNormalParams, UnilateralModel, simulate_autonormal, simulate_unilateral

log = logging.getLogger("lattice_additive")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message, self.prog)
        sys.exit(2)


def _emit_error(kind, message, command=None):
    err = {"type": kind, "message": str(message)}
    if command:
        err["command"] = command
    sys.stderr.write(json.dumps({"error": err}, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# argument types

def _positive_float(text):
    val = float(text)
    if not np.isfinite(val) or val <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return val


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return val


def _nonneg_int(text):
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return val


def _unit_interval(text):
    val = float(text)
    if not 0 < val < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text!r}")
    return val


def _trim(text):
    val = float(text)
    if not 0 <= val < 0.5:
        raise argparse.ArgumentTypeError(f"trim must lie in [0, 0.5), got {text!r}")
    return val


def _window(text):
    try:
        parts = [int(t) for t in text.split(",")]
    except ValueError:
        parts = []
    if len(parts) != 4 or min(parts) < 1:
        raise argparse.ArgumentTypeError("window must be u0,v0,rows,cols with positive integers")
    return parts


def _offsets(text):
    try:
        return NeighborScheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _candidates(text):
    vals = [_positive_float(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("candidate list is empty")
    return vals


# --------------------------------------------------------------------------
# shared helpers

def _config(args) -> dict:
    """Effective configuration echoed into every output document."""
    cfg = {}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "verbose"):
            continue
        if isinstance(val, NeighborScheme):
            val = val.format()
        elif isinstance(val, Path):
            val = str(val)
        cfg[key] = val
    return cfg


def _load_sample(args):
    field = read_field(args.field)
    if args.window is not None:
        field = field.window(*args.window)
    scheme = args.offsets
    return field, extract_samples(field, scheme)


def _options(args) -> BackfitOptions:
    return BackfitOptions(tolerance=args.tol, max_cycles=args.max_cycles, n_grid=args.n_grid,
                          later_sign=args.later_sign)


def _write_doc(doc, path):
    if path is None or str(path) == "-":
        sys.stdout.write(io.dumps(doc))
    else:
        io.write_json(doc, path)


def _curve_path(prefix, j):
    return f"{prefix}_m{j + 1}.csv"


# --------------------------------------------------------------------------
# commands

def cmd_simulate(args):
    rng = np.random.default_rng(args.seed)
    if args.model == "unilateral":
        model = UnilateralModel(noise_sd=args.noise_sd, burn_in=args.burn_in)
        field = simulate_unilateral(model, args.rows, args.cols, rng)
        params = {"g1": "sin", "g2": "cos", "noise_sd": args.noise_sd, "burn_in": args.burn_in}
    else:
        params_obj = AutoNormalParams(args.theta1, args.theta2, args.alpha, args.cond_var)
        field = simulate_autonormal(params_obj, args.rows, args.cols, rng, method=args.method,
                                    sweeps=args.sweeps)
        params = params_obj.to_dict()
        params["method"] = args.method
    out = Path(args.output)
    write_csv_field(field, out)
    doc = io.document("simulate", _config(args),
                      {"model": args.model, "parameters": params, "seed": args.seed,
                       "shape": list(field.shape), "field": str(out.name)})
    io.write_json(doc, out.with_suffix(".json"))


def cmd_fit(args):
    field, sample = _load_sample(args)
    opts = _options(args)
    domain = default_domain(sample, args.trim)
    grids = domain.grids(args.n_grid)
    h = args.bandwidth
    cv = None
    if h is None:
        if args.restricted:
            raise CliError("--restricted needs an explicit --bandwidth")
        cv = select_bandwidth(sample, args.kernel, args.candidates, grids, opts, args.stride)
        h = cv.chosen
    kernel = Kernel(args.kernel, h)
    if args.restricted:
        fit = backfit_restricted(sample, kernel, domain, grids, opts)
    else:
        fit = backfit(sample, kernel, grids, opts)
    result = {"fit": io.fit_to_dict(fit), "n": sample.n, "d": sample.d,
              "field_shape": list(field.shape)}
    if cv is not None:
        result["cv"] = {"candidates": cv.candidates, "scores": cv.scores, "chosen": cv.chosen}
    if args.curves:
        for j, comp in enumerate(fit.components):
            io.write_curve_csv(_curve_path(args.curves, j), {"x": comp.grid.points, "m": comp.values})
    _write_doc(io.document("fit", _config(args), result), args.output)


def cmd_cv(args):
    _, sample = _load_sample(args)
    opts = _options(args)
    grids = default_domain(sample, args.trim).grids(args.n_grid)
    cv = select_bandwidth(sample, args.kernel, args.candidates, grids, opts, args.stride)
    result = {"candidates": cv.candidates, "scores": cv.scores, "chosen": cv.chosen,
              "stride": args.stride, "n": sample.n}
    _write_doc(io.document("cv", _config(args), result), args.output)


def cmd_ci(args):
    _, sample = _load_sample(args)
    opts = _options(args)
    domain = default_domain(sample, args.trim)
    grids = domain.grids(args.n_grid)
    fit, bands = bootstrap_ci(sample, Kernel(args.kernel, args.bandwidth), grids, opts,
                              args.level, args.n_boot, args.seed, args.multiplier,
                              domain if args.restricted else None)
    files = []
    for band in bands:
        if args.bands:
            path = _curve_path(args.bands, band.component)
            io.write_curve_csv(path, {"x": band.grid.points, "estimate": band.estimate,
                                      "center": band.center, "lower": band.lower,
                                      "upper": band.upper})
            files.append(path)
    result = {
        "fit": io.fit_to_dict(fit),
        "bands": [{"component": b.component, "x": b.grid.points, "center": b.center,
                   "lower": b.lower, "upper": b.upper, "n_boot": b.n_boot} for b in bands],
        "level": args.level,
        "band_files": files,
    }
    _write_doc(io.document("ci", _config(args), result), args.output)


def cmd_test(args):
    field = read_field(args.field)
    if args.window is not None:
        field = field.window(*args.window)
    res = linearity_test(field, args.n_boot, args.seed, args.order_mode,
                         with_intercept=not args.no_intercept, cond_var=args.cond_var,
                         combine=args.combine)
    result = {"t_observed": res.t_observed, "p_value": res.p_value, "n_boot": res.n_boot,
              "t_boot": res.t_boot, "fitted": res.fitted.to_dict(),
              "simulated_from": res.simulated_from.to_dict(), "shrunk": res.shrunk,
              "order_mode": res.order_mode}
    _write_doc(io.document("test", _config(args), result), args.output)


def cmd_reproduce(args):
    kwargs = {}
    if args.n_boot is not None:
        if args.experiment not in ("example2-test", "power", "ci-coverage"):
            raise CliError(f"--n-boot does not apply to {args.experiment}")
        kwargs["n_boot"] = args.n_boot
    if args.stride is not None:
        if args.experiment not in ("example1", "ci-coverage"):
            raise CliError("--stride only applies to example1 and ci-coverage")
        kwargs["stride"] = args.stride
    out = run_study(args.experiment, args.reps, args.seed, args.jobs, **kwargs)
    _write_doc(io.document("reproduce", _config(args), out), args.output)


# --------------------------------------------------------------------------
# parser

def _add_field_args(p):
    p.add_argument("field", help="CSV or PGM field")
    p.add_argument("--window", type=_window, default=None, metavar="U0,V0,ROWS,COLS",
                   help="1-based sub-window of the field")


def _add_smoothing_args(p, bandwidth_required=False):
    p.add_argument("--offsets", type=_offsets, default=FOUR_NEIGHBORS,
                   help='neighbour offsets, e.g. "1,0;0,1" (default: the four nearest neighbours)')
    p.add_argument("--kernel", choices=("gaussian", "epanechnikov"), default="gaussian")
    p.add_argument("--bandwidth", type=_positive_float, required=bandwidth_required,
                   default=None)
    p.add_argument("--n-grid", type=_positive_int, default=101)
    p.add_argument("--trim", type=_trim, default=0.0,
                   help="quantile trimmed from each end of every design column")
    p.add_argument("--restricted", action="store_true",
                   help="densities restricted to the trimmed sets")
    p.add_argument("--later-sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--tol", type=_positive_float, default=1e-8)
    p.add_argument("--max-cycles", type=_positive_int, default=100)


def _add_cv_args(p):
    p.add_argument("--candidates", type=_candidates, default=None, metavar="H1,H2,...")
    p.add_argument("--stride", type=_positive_int, default=1,
                   help="hold out every k-th observation")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lattice-additive", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a field")
    p.add_argument("--model", choices=("unilateral", "autonormal"), required=True)
    p.add_argument("--rows", type=_positive_int, required=True)
    p.add_argument("--cols", type=_positive_int, required=True)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--burn-in", type=_nonneg_int, default=20)
    p.add_argument("--theta1", type=float, default=0.2)
    p.add_argument("--theta2", type=float, default=0.25)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--cond-var", type=_positive_float, default=1.0)
    p.add_argument("--method", choices=("exact", "gibbs"), default="exact")
    p.add_argument("--sweeps", type=_positive_int, default=200)
    p.add_argument("-o", "--output", required=True, help="CSV path; the sidecar gets a .json suffix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="smooth backfitting fit")
    _add_field_args(p)
    _add_smoothing_args(p)
    _add_cv_args(p)
    p.add_argument("--curves", default=None, metavar="PREFIX",
                   help="write PREFIX_m<j>.csv with columns x,m")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="leave-one-out bandwidth selection")
    _add_field_args(p)
    _add_smoothing_args(p)
    _add_cv_args(p)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("ci", help="wild-bootstrap pointwise bands")
    _add_field_args(p)
    _add_smoothing_args(p, bandwidth_required=True)
    p.add_argument("--level", type=_unit_interval, default=0.95)
    p.add_argument("--n-boot", type=_positive_int, default=100)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--multiplier", choices=("normal", "rademacher"), default="normal")
    p.add_argument("--bands", default=None, metavar="PREFIX",
                   help="write PREFIX_m<j>.csv with columns x,estimate,center,lower,upper")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("test", help="bootstrap test of the auto-normal scheme")
    _add_field_args(p)
    p.add_argument("--n-boot", type=_positive_int, default=200)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--order-mode", choices=("componentwise", "lexicographic"),
                   default="componentwise")
    p.add_argument("--no-intercept", action="store_true", help="fix alpha at 0")
    p.add_argument("--cond-var", type=_positive_float, default=None,
                   help="fix the conditional variance instead of estimating it")
    p.add_argument("--combine", choices=("average", "stack"), default="average")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("reproduce", help="Monte Carlo simulation studies")
    p.add_argument("experiment", choices=sorted(STUDIES))
    p.add_argument("--reps", type=_positive_int, default=100)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--n-boot", type=_positive_int, default=None)
    p.add_argument("--stride", type=_positive_int, default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except Exception as exc:  # reported as JSON, never as a traceback
        if args.verbose:
            log.exception("command failed")
        _emit_error(type(exc).__name__, exc, args.command)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
