"""Plain-file outputs: trajectory CSV, key-value reports, grid snapshots.

Grid snapshot layout
--------------------
``<stem>.bin`` holds the field as little-endian IEEE-754 doubles, two per
sample (real part first, then imaginary part), samples in row-major order
over the axes (last axis fastest).  ``<stem>.json`` holds
``{"n_dim", "N", "x_min", "x_max", "t", "hbar", "layout"}`` where ``N``,
``x_min`` and ``x_max`` are per-axis lists.  Axis ``j`` has points
``x_min[j] + k (x_max[j] - x_min[j]) / N[j]`` for ``k = 0 .. N[j] - 1``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .ehrenfest_flow import TrajectoryBundle
from .grid import Grid, GridState

__all__ = [
    "FLOAT_FORMAT",
    "fmt",
    "trajectory_header",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_table",
    "write_report",
    "write_snapshot",
    "read_snapshot",
]

FLOAT_FORMAT = "%.17g"
LAYOUT = "little-endian float64, interleaved (re, im), row-major"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FORMAT % float(x)
    return str(x)


def trajectory_header(n: int) -> list:
    d = 2 * n
    return (["t"] + [f"Z{i}" for i in range(d)]
            + [f"Delta2_{i}{j}" for i in range(d) for j in range(d)] + ["S"])


def write_trajectory_csv(path, bundle: TrajectoryBundle, stride: int = 1) -> Path:
    """One row per time knot (every ``stride``-th, the last always kept)."""
    path = Path(path)
    T = bundle.times.size
    ks = list(range(0, T, stride))
    if ks[-1] != T - 1:
        ks.append(T - 1)
    rows = np.column_stack([bundle.times, bundle.Z, bundle.Delta2.reshape(T, -1), bundle.S])[ks]
    write_table(path, trajectory_header(bundle.n), rows)
    return path


def read_trajectory_csv(path):
    """Return ``(times, Z, Delta2, S)`` arrays from a trajectory CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = int(round((-1 + np.sqrt(1 + 4 * (data.shape[1] - 2))) / 2))
    return data[:, 0], data[:, 1:1 + d], data[:, 1 + d:1 + d + d * d].reshape(-1, d, d), data[:, -1]


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_report(path, items: dict) -> Path:
    """Key-value text, one ``key = value`` per line in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for k, v in items.items():
            if isinstance(v, (list, tuple, np.ndarray)):
                v = " ".join(fmt(x) for x in np.ravel(v))
            else:
                v = fmt(v)
            fh.write(f"{k} = {v}\n")
    return path


def write_snapshot(stem, state: GridState) -> tuple:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(state.values, dtype="<c16")
    binpath = stem.with_suffix(".bin")
    data.tofile(binpath)
    meta = {
        "n_dim": state.grid.n_dim,
        "N": list(state.grid.N),
        "x_min": [float(v) for v in state.grid.x_min],
        "x_max": [float(v) for v in state.grid.x_max],
        "t": None if state.t is None else float(state.t),
        "hbar": float(state.hbar),
        "layout": LAYOUT,
    }
    metapath = stem.with_suffix(".json")
    metapath.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return binpath, metapath


def read_snapshot(stem) -> GridState:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    grid = Grid(tuple(meta["x_min"]), tuple(meta["x_max"]), tuple(meta["N"]))
    vals = np.fromfile(stem.with_suffix(".bin"), dtype="<c16")
    if vals.size != int(np.prod(grid.N)):
        raise ValueError("snapshot size does not match its metadata")
    return GridState(grid, vals.reshape(grid.shape).astype(complex), meta["hbar"], meta["t"])
