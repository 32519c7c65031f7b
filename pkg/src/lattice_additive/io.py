"""JSON/CSV result files.

Every JSON document has the layout::

    {"schema_version": 1, "kind": "fit" | "cv" | "ci" | "test" | "reproduce" | "simulate",
     "config": {...}, "versions": {...}, "result": {...}}

Keys are sorted and floats written with ``repr`` precision, so equal inputs
give byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .backfitting import AdditiveFit, ComponentFunction
from .kernels import EvalGrid

SCHEMA_VERSION = 1
KINDS = ("simulate", "fit", "cv", "ci", "test", "reproduce")


def versions() -> dict:
    import scipy
    return {"lattice_additive": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def document(kind: str, config: dict, result: dict) -> dict:
    if kind not in KINDS:
        raise ValueError(f"unknown result kind {kind!r}")
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "config": _plain(config),
            "versions": versions(), "result": _plain(result)}


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def fit_to_dict(fit: AdditiveFit) -> dict:
    return {
        "m0": fit.m0,
        "bandwidth": fit.bandwidth,
        "kernel": fit.kernel_family,
        "mode": fit.mode,
        "iterations": fit.iterations,
        "final_delta": fit.final_delta,
        "converged": fit.converged,
        "components": [
            {"lower": c.grid.lower, "upper": c.grid.upper, "n_points": c.grid.n_points,
             "x": c.grid.points, "values": c.values}
            for c in fit.components
        ],
    }


def fit_from_dict(data: dict) -> AdditiveFit:
    comps = [ComponentFunction(EvalGrid(c["lower"], c["upper"], c["n_points"]), np.array(c["values"]))
             for c in data["components"]]
    return AdditiveFit(data["m0"], comps, data["bandwidth"], data["iterations"], data["final_delta"],
                       data["converged"], data["mode"], data["kernel"])


def load_fit(path) -> AdditiveFit:
    doc = read_json(path)
    if doc["kind"] != "fit":
        raise ValueError(f"{path}: expected a fit document, got {doc['kind']!r}")
    return fit_from_dict(doc["result"]["fit"])


def write_curve_csv(path, columns: dict) -> None:
    names = list(columns)
    rows = zip(*(np.asarray(columns[n], dtype=float) for n in names))
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_curve_csv(path) -> dict:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        data = np.array([[float(t) for t in line.split(",")] for line in fh if line.strip()])
    return {n: data[:, i] for i, n in enumerate(names)}
