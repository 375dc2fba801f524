"""JSON scenario documents: schema check, defaults and construction of run inputs.

All problems in a document are collected into one diagnostic list before any
numerical work starts; see ``docs/scenario.md`` for the field reference.
"""

from __future__ import annotations

import copy
import json
import numbers
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .grid import Grid
from .phase_space import Constant, Modulated, QuadraticModel, Sampled, validate_model
from .states import (DEFAULT_MAX_DEGREE, HermiteGaussianState, Poly, PhaseSpaceOperator,
                     WeylPolySymbol, gaussian_state)

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario", "set_leaf", "get_leaf"]

MATRIX_BLOCKS = ("Hzz", "Wzz", "Wzw", "Www")
DEFAULT_TOLERANCES = {
    "l2": 1e-4,
    "first_moment": 1e-4,
    "second_moment": 1e-3,
    "residual": 1e-4,
    "norm_drift": 1e-8,
}


class ScenarioError(ValueError):
    """Validation failure; ``diagnostics`` is the full list of problems."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass
class Scenario:
    raw: dict
    model: QuadraticModel
    state: HermiteGaussianState
    times: np.ndarray
    stride: int
    grid: Optional[Grid] = None
    symmetry: Optional[dict] = None
    operator: Optional[PhaseSpaceOperator] = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    outputs: dict = field(default_factory=dict)
    sweep: Optional[dict] = None


def _is_num(x):
    return isinstance(x, numbers.Real) and not isinstance(x, bool) and np.isfinite(x)


def _complex(v, where, diags):
    if _is_num(v):
        return complex(v)
    if isinstance(v, dict) and set(v) <= {"re", "im"} and all(_is_num(v.get(k, 0)) for k in v):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(_is_num(x) for x in v):
        return complex(v[0], v[1])
    diags.append(f"{where}: expected a number, [re, im] or {{re, im}}")
    return 0j


def _matrix(v, shape, where, diags, dtype=float):
    try:
        if dtype is complex and isinstance(v, dict):
            re = np.asarray(v.get("re", 0.0), dtype=float)
            im = np.asarray(v.get("im", 0.0), dtype=float)
            a = re + 1j * im
        else:
            a = np.asarray(v, dtype=dtype)
    except (TypeError, ValueError):
        diags.append(f"{where}: not a numeric array")
        return None
    if a.ndim == 0 and len(shape) == 2:
        a = a * np.eye(shape[0])
    if a.shape != shape:
        diags.append(f"{where}: expected shape {shape}, got {a.shape}")
        return None
    if not np.all(np.isfinite(a)):
        diags.append(f"{where}: non-finite entries")
        return None
    return a


def _provider(v, d, where, diags):
    if isinstance(v, dict) and "kind" in v:
        kind = v["kind"]
        if kind == "constant":
            a = _matrix(v.get("value"), (d, d), f"{where}.value", diags)
            return None if a is None else Constant(a)
        if kind == "modulated":
            base = _matrix(v.get("base", np.zeros((d, d))), (d, d), f"{where}.base", diags)
            vals = [v.get(k, 0.0) for k in ("a", "b", "nu")]
            if not all(_is_num(x) for x in vals):
                diags.append(f"{where}: modulated profile needs numeric a, b, nu")
                return None
            return None if base is None else Modulated(base, *map(float, vals))
        if kind == "sampled":
            knots = np.asarray(v.get("knots", []), dtype=float)
            vals = np.asarray(v.get("values", []), dtype=float)
            if knots.ndim != 1 or knots.size < 2 or vals.shape != (knots.size, d, d):
                diags.append(f"{where}: sampled profile needs >= 2 knots and values of shape (K, {d}, {d})")
                return None
            try:
                return Sampled(knots, vals)
            except ValueError as e:
                diags.append(f"{where}: {e}")
                return None
        diags.append(f"{where}: unknown coefficient kind {kind!r}")
        return None
    a = _matrix(v, (d, d), where, diags)
    return None if a is None else Constant(a)


def _poly_terms(items, nvars, where, diags):
    terms = {}
    if not isinstance(items, list):
        diags.append(f"{where}: expected a list of {{power, coeff}} terms")
        return terms
    for i, t in enumerate(items):
        pw = t.get("power") if isinstance(t, dict) else None
        if (not isinstance(pw, list) or len(pw) != nvars
                or not all(isinstance(k, int) and not isinstance(k, bool) and k >= 0 for k in pw)):
            diags.append(f"{where}[{i}].power: expected {nvars} non-negative integers")
            continue
        terms[tuple(pw)] = terms.get(tuple(pw), 0j) + _complex(t.get("coeff", 1.0), f"{where}[{i}].coeff", diags)
    return terms


def _model(raw, diags):
    if not isinstance(raw, dict):
        diags.append("model: missing or not an object")
        return None
    n = raw.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        diags.append("model.n: expected a positive integer")
        return None
    d = 2 * n
    kw = {"n": n}
    for key in ("hbar", "kappa", "kappa_tilde"):
        if key in raw:
            if not _is_num(raw[key]):
                diags.append(f"model.{key}: expected a number")
            else:
                kw[key] = float(raw[key])
    if kw.get("hbar", 1.0) <= 0:
        diags.append("model.hbar: must be positive")
    for name in MATRIX_BLOCKS:
        if name in raw:
            p = _provider(raw[name], d, f"model.{name}", diags)
            if p is not None:
                kw[name] = p
    if "Hz" in raw:
        a = _matrix(raw["Hz"], (d,), "model.Hz", diags)
        if a is not None:
            kw["Hz"] = a
    unknown = set(raw) - {"n", "hbar", "kappa", "kappa_tilde", "Hz", *MATRIX_BLOCKS}
    for k in sorted(unknown):
        diags.append(f"model.{k}: unknown field")
    return kw


def _state(raw, n, hbar, diags):
    if not isinstance(raw, dict):
        diags.append("initial_state: missing or not an object")
        return None
    kind = raw.get("kind", "gaussian")
    if kind not in ("gaussian", "hermite-gaussian"):
        diags.append(f"initial_state.kind: unknown kind {kind!r}")
        return None
    center = _matrix(raw.get("center", np.zeros(2 * n)), (2 * n,), "initial_state.center", diags)
    Q = _matrix(raw.get("Q", {"im": np.eye(n).tolist()}), (n, n), "initial_state.Q", diags, complex)
    poly = None
    if kind == "hermite-gaussian":
        if "poly" not in raw:
            diags.append("initial_state.poly: required for kind hermite-gaussian")
        else:
            terms = _poly_terms(raw["poly"], n, "initial_state.poly", diags)
            poly = Poly.from_terms(n, terms) if terms else None
    elif "poly" in raw:
        diags.append("initial_state.poly: only allowed for kind hermite-gaussian")
    if center is None or Q is None:
        return None
    if np.abs(Q - Q.T).max() > 1e-12:
        diags.append("initial_state.Q: must be symmetric")
        return None
    if np.linalg.eigvalsh(0.5 * (Q.imag + Q.imag.T)).min() <= 0:
        diags.append("initial_state.Q: imaginary part must be positive definite")
        return None
    try:
        return gaussian_state(n, hbar, Q, center, poly, normalize=raw.get("normalize", True))
    except ValueError as e:
        diags.append(f"initial_state: {e}")
        return None


def _times(raw, diags):
    if not isinstance(raw, dict):
        diags.append("time: missing or not an object")
        return None, 1
    vals = {k: raw.get(k) for k in ("t0", "t1", "dt")}
    for k, v in vals.items():
        if not _is_num(v):
            diags.append(f"time.{k}: expected a number")
    stride = raw.get("snapshot_stride", 1)
    if not isinstance(stride, int) or isinstance(stride, bool) or stride < 1:
        diags.append("time.snapshot_stride: expected a positive integer")
        stride = 1
    if not all(_is_num(v) for v in vals.values()):
        return None, stride
    t0, t1, dt = (float(vals[k]) for k in ("t0", "t1", "dt"))
    if dt <= 0:
        diags.append("time.dt: must be positive")
    if t1 <= t0:
        diags.append("time.t1: must exceed t0")
    if dt <= 0 or t1 <= t0:
        return None, stride
    steps = int(round((t1 - t0) / dt))
    if steps < 1 or abs(steps * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        diags.append("time.dt: (t1 - t0) must be an integer multiple of dt")
        return None, stride
    return t0 + dt * np.arange(steps + 1), stride


def _grid(raw, n, diags):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        diags.append("grid: not an object")
        return None
    try:
        lo = np.broadcast_to(np.asarray(raw["x_min"], dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(raw["x_max"], dtype=float), (n,))
        N = np.broadcast_to(np.asarray(raw["N"]), (n,))
    except (KeyError, TypeError, ValueError) as e:
        diags.append(f"grid: needs x_min, x_max, N ({e})")
        return None
    if not all(float(k).is_integer() for k in N):
        diags.append("grid.N: expected integers")
        return None
    try:
        return Grid(tuple(map(float, lo)), tuple(map(float, hi)), tuple(int(k) for k in N))
    except ValueError as e:
        diags.append(f"grid: {e}")
        return None


def _operator(raw, n, hbar, diags):
    op = raw.get("operator") if isinstance(raw, dict) else None
    if not isinstance(op, dict):
        diags.append("symmetry.operator: missing or not an object")
        return None
    kind = op.get("kind")
    if kind == "displacement":
        d = _matrix(op.get("shift"), (2 * n,), "symmetry.operator.shift", diags)
        return None if d is None else PhaseSpaceOperator.displacement(d, hbar)
    if kind == "identity":
        return PhaseSpaceOperator.identity(n, hbar)
    if kind == "polynomial":
        maxdeg = op.get("max_degree", DEFAULT_MAX_DEGREE)
        if not isinstance(maxdeg, int) or maxdeg < 0:
            diags.append("symmetry.operator.max_degree: expected a non-negative integer")
            return None
        terms = _poly_terms(op.get("terms"), 2 * n, "symmetry.operator.terms", diags)
        if not terms:
            diags.append("symmetry.operator.terms: empty polynomial")
            return None
        try:
            sym = WeylPolySymbol.from_terms(n, terms, max_degree=maxdeg)
        except ValueError as e:
            diags.append(f"symmetry.operator: {e}")
            return None
        return PhaseSpaceOperator.polynomial(sym, hbar)
    diags.append(f"symmetry.operator.kind: inadmissible symbol kind {kind!r}")
    return None


def parse_scenario(doc: dict, base_dir=None) -> Scenario:
    """Validate ``doc`` and build the run inputs; raises ``ScenarioError``."""
    diags = []
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario: top level must be an object"])
    known = {"model", "initial_state", "time", "grid", "symmetry", "validate", "outputs", "sweep",
             "name", "description"}
    for k in sorted(set(doc) - known):
        diags.append(f"{k}: unknown top-level field")
    mkw = _model(doc.get("model"), diags)
    times, stride = _times(doc.get("time"), diags)
    n = mkw["n"] if mkw else None
    hbar = mkw.get("hbar", 1.0) if mkw else 1.0
    state = _state(doc.get("initial_state"), n, hbar, diags) if n else None
    grid = _grid(doc.get("grid"), n, diags) if n else None
    sym = doc.get("symmetry")
    op = None
    if sym is not None and n:
        if not isinstance(sym, dict):
            diags.append("symmetry: not an object")
        else:
            if sym.get("route", "both") not in (1, 2, "both"):
                diags.append("symmetry.route: expected 1, 2 or \"both\"")
            op = _operator(sym, n, hbar, diags)
    tol = dict(DEFAULT_TOLERANCES)
    val = doc.get("validate", {})
    if not isinstance(val, dict):
        diags.append("validate: not an object")
        val = {}
    for k, v in (val.get("tolerances") or {}).items():
        if k not in tol:
            diags.append(f"validate.tolerances.{k}: unknown tolerance")
        elif not _is_num(v) or v <= 0:
            diags.append(f"validate.tolerances.{k}: expected a positive number")
        else:
            tol[k] = float(v)
    outputs = doc.get("outputs", {})
    if not isinstance(outputs, dict):
        diags.append("outputs: not an object")
        outputs = {}
    fmts = outputs.get("formats", ["csv", "grid"])
    if not isinstance(fmts, list) or not set(fmts) <= {"csv", "grid"}:
        diags.append("outputs.formats: expected a subset of [\"csv\", \"grid\"]")
    if bool(val.get("residual", False)) and "grid" not in doc:
        diags.append("grid required for validate outputs")
    model = None
    if mkw and state is not None:
        normalized = (doc.get("initial_state") or {}).get("normalize", True)
        norm2 = 1.0 if normalized else state.norm2()
        try:
            model = QuadraticModel(norm2=norm2, **mkw)
        except (TypeError, ValueError) as e:
            diags.append(f"model: {e}")
        if model is not None and times is not None:
            diags.extend(f"model: {msg}" for msg in validate_model(model, (times[0], times[-1])))
    if diags:
        raise ScenarioError(diags)
    out = dict(outputs)
    if base_dir is not None and "directory" in out:
        out["directory"] = str(Path(base_dir) / out["directory"])
    return Scenario(raw=copy.deepcopy(doc), model=model, state=state, times=times, stride=stride,
                    grid=grid, symmetry=sym, operator=op, tolerances=tol, outputs=out,
                    sweep=doc.get("sweep"))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError([f"scenario file not found: {path}"]) from None
    except json.JSONDecodeError as e:
        raise ScenarioError([f"scenario is not valid JSON: {e}"]) from None
    return parse_scenario(doc)


def get_leaf(doc: dict, dotted: str):
    cur = doc
    for part in dotted.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        elif isinstance(cur, dict) and part in cur:
            cur = cur[part]
        else:
            raise KeyError(dotted)
    return cur


def set_leaf(doc: dict, dotted: str, value) -> dict:
    """Copy of ``doc`` with the numeric leaf at ``dotted`` replaced."""
    try:
        old = get_leaf(doc, dotted)
    except (KeyError, IndexError, ValueError):
        raise ScenarioError([f"sweep axis {dotted!r} does not name a field of the scenario"]) from None
    if not _is_num(old):
        raise ScenarioError([f"sweep axis {dotted!r} is not a numeric leaf"])
    out = copy.deepcopy(doc)
    parts = dotted.split(".")
    cur = out
    for part in parts[:-1]:
        cur = cur[int(part)] if isinstance(cur, list) else cur[part]
    last = parts[-1]
    if isinstance(cur, list):
        cur[int(last)] = value
    else:
        cur[last] = value
    return out
