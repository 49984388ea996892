"""JSON and CSV round-trips for measures, plans, reports and certificates."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import sys
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy
from referencing import Registry, Resource

from .certify import Certificate
from .errors import InvalidInput
from .measures import DiscreteMeasure
from .plans import SparsePlan
from .solvers import SolveReport

SCHEMA_VERSION = "1.0"
LOAD_SUM_TOL = 1e-9
SCHEMAS = ("measure", "plan", "solve_report", "certificate", "experiment_report")


@lru_cache(maxsize=None)
def _registry() -> Registry:
    pairs = []
    for name in SCHEMAS:
        text = resources.files("mmot.schemas").joinpath(f"{name}.schema.json").read_text()
        pairs.append((f"{name}.schema.json", Resource.from_contents(json.loads(text))))
    return Registry().with_resources(pairs)


def load_schema(name: str) -> dict:
    if name not in SCHEMAS:
        raise InvalidInput(f"unknown schema {name!r}")
    return _registry().contents(f"{name}.schema.json")


def validate(doc: dict, name: str) -> None:
    """Raise ``InvalidInput`` unless ``doc`` matches the named schema."""
    validator = jsonschema.Draft202012Validator(load_schema(name), registry=_registry())
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        path = "/".join(map(str, err.absolute_path)) or "<root>"
        raise InvalidInput(f"{name} document invalid at {path}: {err.message}")


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def environment() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


# -- measures ---------------------------------------------------------------------


def measure_to_dict(mu: DiscreteMeasure) -> dict:
    return {"d": mu.dim, "points": mu.points.tolist(), "weights": mu.weights.tolist()}


def measure_from_dict(doc: dict) -> DiscreteMeasure:
    """Parse a measure; weights must sum to 1 within 1e-9 and are then renormalized."""
    validate(doc, "measure")
    pts = np.asarray(doc["points"], dtype=float)
    w = np.asarray(doc["weights"], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != doc["d"]:
        raise InvalidInput(f"points are not {doc['d']}-dimensional")
    if len(w) != len(pts):
        raise InvalidInput("points and weights differ in length")
    if not (np.isfinite(pts).all() and np.isfinite(w).all()):
        raise InvalidInput("non-finite entries")
    total = math.fsum(w)
    if abs(total - 1.0) > LOAD_SUM_TOL:
        raise InvalidInput(f"weights sum to {total!r}, not 1")
    return DiscreteMeasure(pts, w / total)


# -- plans ------------------------------------------------------------------------


def plan_to_dict(plan: SparsePlan, marginal_refs=None) -> dict:
    """Plan document; ``marginal_refs`` (file names) replaces the inline marginals."""
    if marginal_refs is not None and len(marginal_refs) != plan.N:
        raise InvalidInput("one reference per marginal needed")
    margs = list(marginal_refs) if marginal_refs is not None else [measure_to_dict(mu) for mu in plan.marginals]
    atoms = [{"idx": idx, "mass": m} for idx, m in zip(plan.index.tolist(), plan.mass.tolist())]
    return {"N": plan.N, "marginals": margs, "atoms": atoms}


def plan_from_dict(doc: dict, base_dir: str | Path | None = None) -> SparsePlan:
    """Parse a plan; string marginals are measure files relative to ``base_dir``."""
    validate(doc, "plan")
    if len(doc["marginals"]) != doc["N"]:
        raise InvalidInput("N disagrees with the number of marginals")
    margs = []
    for m in doc["marginals"]:
        if isinstance(m, str):
            path = Path(base_dir or ".") / m
            margs.append(measure_from_dict(read_json(path)))
        else:
            margs.append(measure_from_dict(m))
    if doc["atoms"]:
        index = np.array([a["idx"] for a in doc["atoms"]], dtype=np.int64)
        if index.ndim != 2 or index.shape[1] != doc["N"]:
            raise InvalidInput("every idx needs N entries")
    else:
        index = np.zeros((0, doc["N"]), dtype=np.int64)
    mass = np.array([a["mass"] for a in doc["atoms"]], dtype=float)
    return SparsePlan(margs, index, mass)


def plan_to_csv(plan: SparsePlan, handle) -> None:
    """One row per atom: 1-based atom indices, coordinates, mass."""
    N, d = plan.N, plan.d
    axes = [f"x{j + 1}" if d == 1 else f"x{j + 1}_{a + 1}" for j in range(N) for a in range(d)]
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow([f"i{j + 1}" for j in range(N)] + axes + ["mass"])
    X = plan.coordinates().reshape(len(plan), N * d)
    for idx, x, m in zip(plan.index.tolist(), X.tolist(), plan.mass.tolist()):
        writer.writerow([i + 1 for i in idx] + [repr(v) for v in x] + [repr(m)])


# -- reports ----------------------------------------------------------------------


def _clean(obj):
    """Convert numpy scalars and arrays inside nested containers to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def report_to_dict(report: SolveReport, timing: bool = True) -> dict:
    doc = {
        "value": report.value,
        "method": report.method,
        "iterations": report.iterations,
        "residuals": _clean(report.residuals),
        "converged": report.converged,
        "extra": _clean(report.extra),
        "plan": plan_to_dict(report.plan),
    }
    if timing:
        doc["wall_time"] = report.wall_time
    return doc


def certificate_to_dict(cert: Certificate) -> dict:
    return {
        "k": cert.k.tolist(),
        "max_deviation": cert.max_deviation,
        "jensen_bound": cert.jensen_bound,
        "plan_sum_square_cost": cert.plan_sum_square_cost,
        "gap": cert.gap,
        "tol": cert.tol,
        "verdict": cert.verdict,
    }


def experiment_report(experiment: str, parameters: dict, inputs: dict, results: list, failures: list, timing: dict) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "parameters": _clean(parameters),
        "inputs": inputs,
        "results": _clean(results),
        "ok": not failures,
        "failures": list(failures),
        "environment": environment(),
        "timing": _clean(timing),
    }
    validate(doc, "experiment_report")
    return doc


# -- files ------------------------------------------------------------------------


def read_json(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_json(path: str | Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
