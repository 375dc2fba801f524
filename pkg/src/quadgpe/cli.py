"""Command line front end: ``quadgpe {evolve,symmetry,validate,sweep} --scenario FILE``.

Data files (CSV, snapshots, reports) are byte-reproducible for a given
scenario; wall-clock information goes to ``run.log`` only.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .formats import write_report, write_snapshot, write_table, write_trajectory_csv
from .grid import Grid
from .linear_propagator import AnnihilationError
from .moments import grid_moments
from .reconstruction import (InadmissibleOperatorError, norm_and_moment_report, solve_cauchy,
                             symmetry_route1, symmetry_route2)
from .reference_solver import (StepSizeError, UnsupportedModelError, check_grid_model, compare_l2,
                               direct_nonlocal_potential, effective_potential, residual_norm,
                               split_step_evolve)
from .scenario import Scenario, ScenarioError, get_leaf, parse_scenario, set_leaf

__all__ = ["main", "run_evolve", "run_symmetry", "run_validate", "run_sweep",
           "oscillation_frequency"]

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_ERROR = 0, 1, 2, 3


def _logger(out: Path, quiet: bool) -> logging.Logger:
    log = logging.getLogger(f"quadgpe.run.{out.resolve()}")
    log.handlers.clear()
    log.setLevel(logging.INFO)
    log.propagate = False
    out.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(out / "run.log")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(fh)
    if not quiet:
        sh = logging.StreamHandler(sys.stdout)
        sh.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(sh)
    return log


def _close(log):
    for h in list(log.handlers):
        h.close()
        log.removeHandler(h)


def _knots(T: int, stride: int) -> list:
    ks = list(range(0, T, stride))
    if ks[-1] != T - 1:
        ks.append(T - 1)
    return ks


def _want(sc: Scenario, kind: str) -> bool:
    return kind in sc.outputs.get("formats", ["csv", "grid"])


def oscillation_frequency(t, x) -> float:
    """Angular frequency from mean upward crossings of ``x - mean(x)``; nan if < 2 crossings."""
    y = np.asarray(x) - np.mean(x)
    idx = np.nonzero((y[:-1] < 0) & (y[1:] >= 0))[0]
    if idx.size < 2:
        return float("nan")
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    return float(2 * np.pi / np.mean(np.diff(tc)))


def _trace_phase(sc: Scenario, bundle):
    """``-1/2 kt int tr(Www Delta2) dt``: the covariance part of the action."""
    Www = sc.model.coefficients(bundle.times)["Www"]
    tr = np.einsum("tij,tji->t", Www, bundle.Delta2)
    return -0.5 * sc.model.kappa_tilde * cumulative_trapezoid(tr, bundle.times, initial=0.0) + 0.0


def _branch_outputs(sc, assembly, out: Path, tag: str, log) -> dict:
    b = assembly.bundle
    rep = norm_and_moment_report(assembly, sc.stride)
    if _want(sc, "csv"):
        write_trajectory_csv(out / f"trajectory_{tag}.csv", b, sc.stride)
        ks = _knots(b.times.size, sc.stride)
        strace = _trace_phase(sc, b)[ks]
        rows = np.column_stack([rep["times"], rep["norm"], rep["moment_deviation"],
                                rep["covariance_deviation"], rep["centering"], b.S[ks], strace])
        write_table(out / f"report_{tag}.csv",
                    ["t", "norm", "moment_deviation", "covariance_deviation", "centering", "S",
                     "S_trace_phase"], rows)
    if sc.grid is not None and _want(sc, "grid"):
        for k in _knots(b.times.size, sc.stride):
            write_snapshot(out / "snapshots" / f"psi_{tag}_{k:07d}", assembly.sample(sc.grid, k))
    metrics = {
        "norm_drift": float(np.abs(rep["norm"] - rep["norm"][0]).max()),
        "max_moment_deviation": float(rep["moment_deviation"].max()),
        "max_covariance_deviation": float(rep["covariance_deviation"].max()),
        "max_centering": float(rep["centering"].max()),
        "final_Z": b.Z[-1],
        "final_S": float(b.S[-1]),
    }
    log.info("%s: norm drift %.3e, centering %.3e", tag, metrics["norm_drift"],
             metrics["max_centering"])
    return metrics


def _interior_residual(assembly, grid, m, stride) -> float:
    """Max residual over up to three interior snapshot knots."""
    T = assembly.times.size
    ks = [k for k in _knots(T, stride) if 0 < k < T - 1]
    if not ks:
        ks = [T // 2] if T >= 3 else []
    if len(ks) > 3:
        ks = [ks[0], ks[len(ks) // 2], ks[-1]]
    vals = [residual_norm(assembly.samples(grid, [k - 1, k, k + 1]), m)[0] for k in ks]
    return float(max(vals)) if vals else float("nan")


def _oracle_check(sc: Scenario, log) -> dict:
    """Compare the moment-reduced nonlocal potential with direct quadrature at t0."""
    grid = sc.grid
    if int(np.prod(grid.N)) > 4096:
        lo, hi = grid.x_min, grid.x_max
        grid = Grid(lo, hi, (256,) * grid.n_dim if grid.n_dim == 1 else (64,) * grid.n_dim)
    psi = sc.state.sample(grid, t=float(sc.times[0]))
    t0 = float(sc.times[0])
    try:
        direct = direct_nonlocal_potential(psi, sc.model, t0)
    except (UnsupportedModelError, ValueError) as e:
        log.info("oracle mode skipped: %s", e)
        return {"oracle_status": "skipped"}
    xs = grid.coords()
    reduced = effective_potential(psi, sc.model, t0)(xs) \
        - effective_potential(psi, sc.model.replace(kappa=0.0), t0)(xs)
    w = np.abs(psi.values) ** 2 > 1e-12 * np.max(np.abs(psi.values) ** 2)
    diff = float(np.abs(direct - reduced)[w].max())
    log.info("oracle mode: direct vs moment-reduced nonlocal potential %.3e", diff)
    return {"oracle_status": "ok", "oracle_max_difference": diff}


def run_evolve(sc: Scenario, out, quiet=False, oracle_mode=False) -> dict:
    out = Path(out)
    log = _logger(out, quiet)
    try:
        log.info("evolve: %d knots, t in [%g, %g]", sc.times.size, sc.times[0], sc.times[-1])
        base = solve_cauchy(sc.state, sc.model, sc.times)
        metrics = _branch_outputs(sc, base, out, "base", log)
        metrics["frequency"] = oscillation_frequency(base.times, base.bundle.Z[:, sc.model.n])
        metrics["kappa_tilde"] = sc.model.kappa_tilde
        metrics["final_S_trace_phase"] = float(_trace_phase(sc, base.bundle)[-1])
        if oracle_mode and sc.grid is not None:
            metrics.update(_oracle_check(sc, log))
        write_report(out / "report.txt", {"command": "evolve", "status": "ok", **metrics})
        return metrics
    finally:
        _close(log)


def run_symmetry(sc: Scenario, out, quiet=False, oracle_mode=False) -> dict:
    if sc.operator is None:
        raise ScenarioError(["symmetry block required for the symmetry command"])
    out = Path(out)
    log = _logger(out, quiet)
    try:
        route = sc.symmetry.get("route", "both")
        routes = (1, 2) if route == "both" else (route,)
        base = solve_cauchy(sc.state, sc.model, sc.times)
        metrics = {f"base_{k}": v for k, v in _branch_outputs(sc, base, out, "base", log).items()}
        branches = {}
        for r in routes:
            if r == 1:
                br = symmetry_route1(base, sc.operator, sc.model)
            else:
                br = symmetry_route2(sc.state, sc.operator, sc.model, sc.times, base=base)
            branches[r] = br
            tag = f"A_route{r}"
            metrics.update({f"{tag}_{k}": v for k, v in _branch_outputs(sc, br, out, tag, log).items()})
            metrics[f"{tag}_alpha"] = br.info["alpha"]
            if sc.grid is not None:
                res = _interior_residual(br, sc.grid, sc.model, sc.stride)
                metrics[f"{tag}_residual"] = res
                log.info("%s residual %.3e", tag, res)
        if len(branches) == 2:
            metrics["cross_route_l2"] = _cross_route(sc, branches[1], branches[2])
            log.info("cross-route L2 %.3e", metrics["cross_route_l2"])
        if oracle_mode and sc.grid is not None:
            metrics.update(_oracle_check(sc, log))
        write_report(out / "report.txt", {"command": "symmetry", "status": "ok", **metrics})
        return metrics
    finally:
        _close(log)


def _cross_route(sc, b1, b2) -> float:
    worst = 0.0
    for k in _knots(sc.times.size, sc.stride):
        grid = sc.grid or _auto_grid(b1, k)
        worst = max(worst, compare_l2(b1.sample(grid, k), b2.sample(grid, k))["raw_l2"])
    return worst


def _auto_grid(assembly, k) -> Grid:
    """Grid covering +-12 standard deviations of the branch at knot ``k``."""
    b = assembly.bundle
    n = b.n
    X = b.Z[k][n:]
    sd = np.sqrt(np.diag(b.Delta2[k])[n:])
    N = 512 if n == 1 else 128
    return Grid(tuple(X - 12 * sd), tuple(X + 12 * sd), (N,) * n)


def run_validate(sc: Scenario, out, quiet=False, oracle_mode=False) -> dict:
    if sc.grid is None:
        raise ScenarioError(["grid required for validate outputs"])
    check_grid_model(sc.model, sc.times)
    out = Path(out)
    log = _logger(out, quiet)
    try:
        tol = sc.tolerances
        base = solve_cauchy(sc.state, sc.model, sc.times)
        b = base.bundle
        ks = _knots(sc.times.size, sc.stride)
        t0 = time.perf_counter()
        try:
            ref = split_step_evolve(sc.state.sample(sc.grid, t=float(sc.times[0])), sc.model,
                                    sc.times, save_every=sc.stride)
            stability = "ok"
        except StepSizeError as e:
            stability = str(e)
            log.info("stability heuristic violated: %s", e)
            ref = split_step_evolve(sc.state.sample(sc.grid, t=float(sc.times[0])), sc.model,
                                    sc.times, save_every=sc.stride, strict=False)
        log.info("split-step run %.2f s", time.perf_counter() - t0)
        # a centred packet has Z = 0, so the width keeps the first-moment scale finite
        zscale = max(np.abs(b.Z).max(), np.sqrt(np.einsum("tii->ti", b.Delta2).max()))
        dscale = np.abs(b.Delta2).max()
        l2, dz, dd, rows = [], [], [], []
        for k, snap in zip(ks, ref):
            cmp = compare_l2(base.sample(sc.grid, k), snap)
            mo = grid_moments(snap)
            l2.append(cmp["raw_l2"])
            dz.append(np.abs(mo.Z - b.Z[k]).max() / zscale)
            dd.append(np.abs(mo.Delta2 - b.Delta2[k]).max() / dscale)
            rows.append([b.times[k], cmp["raw_l2"], cmp["phase_aligned_l2"], dz[-1], dd[-1],
                         snap.norm()])
        if _want(sc, "csv"):
            write_table(out / "validate.csv", ["t", "raw_l2", "phase_aligned_l2",
                                               "first_moment_rel", "second_moment_rel", "grid_norm"],
                        rows)
        norms = np.array([r[-1] for r in rows])
        metrics = {
            "l2": max(l2),
            "first_moment": max(dz),
            "second_moment": max(dd),
            "residual": _interior_residual(base, sc.grid, sc.model, sc.stride),
            "norm_drift": float(np.abs(norms - norms[0]).max()),
        }
        verdict = {f"{k}_pass": bool(v <= tol[k]) for k, v in metrics.items()}
        ok = all(verdict.values())
        report = {"command": "validate", "status": "PASS" if ok else "FAIL",
                  "stability": stability}
        for k, v in metrics.items():
            report[k] = v
            report[f"{k}_tolerance"] = tol[k]
            report[f"{k}_pass"] = verdict[f"{k}_pass"]
        if not verdict["l2_pass"]:
            report.update(_convergence_hint(sc, metrics["l2"], log))
        if oracle_mode:
            report.update(_oracle_check(sc, log))
        for k, v in report.items():
            log.info("%s = %s", k, v)
        write_report(out / "report.txt", report)
        return report
    finally:
        _close(log)


def _convergence_hint(sc: Scenario, err: float, log) -> dict:
    """Rerun at dt/2 to estimate the observed order and a step meeting the tolerance."""
    t = sc.times
    fine = np.linspace(t[0], t[-1], 2 * (t.size - 1) + 1)
    base = solve_cauchy(sc.state, sc.model, fine)
    ref = split_step_evolve(sc.state.sample(sc.grid, t=float(t[0])), sc.model, fine,
                            save_every=fine.size - 1, strict=False)
    err2 = compare_l2(base.sample(sc.grid, fine.size - 1), ref[-1])["raw_l2"]
    ratio = err / err2 if err2 > 0 else float("inf")
    order = float(np.log2(ratio)) if np.isfinite(ratio) and ratio > 0 else float("nan")
    dt = t[1] - t[0]
    p = order if np.isfinite(order) and order > 0.5 else 2.0
    suggested = dt * (sc.tolerances["l2"] / err) ** (1.0 / p)
    hint = (f"halving dt changed the error by {ratio:.3g}x (observed order {order:.2f}); "
            f"try dt <= {suggested:.3g}")
    log.info("convergence hint: %s", hint)
    return {"halved_dt_l2": err2, "observed_order": order, "suggested_dt": suggested,
            "convergence_hint": hint}


COMMANDS = {"evolve": run_evolve, "symmetry": run_symmetry, "validate": run_validate}
HEADLINE = {
    "evolve": ("frequency", "norm_drift", "final_S", "final_S_trace_phase"),
    "symmetry": ("base_norm_drift", "cross_route_l2", "A_route1_residual", "A_route2_residual"),
    "validate": ("l2", "first_moment", "second_moment", "residual", "norm_drift"),
}


def _sweep_row(args):
    doc, axis, value, command, out, oracle_mode = args
    sc = parse_scenario(set_leaf(doc, axis, value))
    metrics = COMMANDS[command](sc, out, quiet=True, oracle_mode=oracle_mode)
    return [metrics.get(k, float("nan")) for k in HEADLINE[command]]


def run_sweep(doc: dict, axis: str, values, command: str, out, quiet=False, oracle_mode=False,
              jobs: int = 1) -> list:
    """One row per axis value, each run isolated in ``out/row_NNN``; aggregated to ``sweep.csv``."""
    values = list(values)
    if not values:
        raise ScenarioError([f"sweep axis {axis!r} is empty"])
    bad = [v for v in values if isinstance(v, bool) or not isinstance(v, (int, float))]
    if bad:
        raise ScenarioError([f"sweep values must be numeric, got {bad!r}"])
    if command not in COMMANDS:
        raise ScenarioError([f"sweep command must be one of {sorted(COMMANDS)}"])
    diags = []
    for v in values:  # validate every row before computing any
        try:
            parse_scenario(set_leaf(doc, axis, v))
        except ScenarioError as e:
            diags.extend(f"{axis}={v}: {d}" for d in e.diagnostics)
    if command == "validate" and "grid" not in doc:
        diags.append("grid required for validate outputs")
    if diags:
        raise ScenarioError(diags)
    out = Path(out)
    tasks = [(doc, axis, v, command, out / f"row_{i:03d}", oracle_mode) for i, v in enumerate(values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_row, tasks))
    else:
        results = [_sweep_row(t) for t in tasks]
    header = [axis, *HEADLINE[command]]
    rows = [[v, *r] for v, r in zip(values, results)]
    if command == "validate":
        header.append("l2_ratio_to_previous")
        for i, row in enumerate(rows):
            row.append(float("nan") if i == 0 else rows[i - 1][1] / row[1])
    if command == "evolve":
        header.append("frequency_shift")
        for row in rows:
            row.append(row[1] - rows[0][1])
    write_table(out / "sweep.csv", header, rows)
    if not quiet:
        print(f"sweep: {len(rows)} rows written to {out / 'sweep.csv'}")
    return rows


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadgpe",
                                description="Nonlocal Gross-Pitaevskii solutions and symmetry operators "
                                            "for quadratic models.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("evolve", "symmetry", "validate", "sweep"):
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="JSON scenario file")
        s.add_argument("--out", help="output directory (default: outputs.directory or ./out)")
        s.add_argument("--quiet", action="store_true", help="log to run.log only")
        s.add_argument("--oracle-mode", action="store_true",
                       help="spot-check the nonlocal term by O(N^2) direct quadrature")
        if name == "sweep":
            s.add_argument("--axis", help="dotted path of a numeric scenario field, e.g. model.kappa")
            s.add_argument("--values", help="comma-separated axis values")
            s.add_argument("--run", choices=sorted(COMMANDS), help="command run per row")
            s.add_argument("--jobs", type=int, default=1, help="rows run concurrently")
    return p


def _fail(diags, code=EXIT_INVALID, status="invalid"):
    sys.stderr.write(json.dumps({"status": status, "diagnostics": list(diags)}, indent=1) + "\n")
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    path = Path(args.scenario)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        return _fail([f"scenario file not found: {path}"])
    except json.JSONDecodeError as e:
        return _fail([f"scenario is not valid JSON: {e}"])
    try:
        if args.command == "sweep":
            spec = doc.pop("sweep", None) or {}
            axis = args.axis or spec.get("axis")
            if not axis:
                return _fail(["sweep axis not given (--axis or sweep.axis)"])
            if args.values is not None:
                try:
                    values = [float(v) for v in args.values.split(",") if v.strip()]
                except ValueError:
                    return _fail([f"sweep values must be numeric: {args.values!r}"])
            else:
                values = spec.get("values", [])
            command = args.run or spec.get("command", "evolve")
            try:
                get_leaf(doc, axis)
            except (KeyError, IndexError, ValueError):
                return _fail([f"sweep axis {axis!r} does not name a field of the scenario"])
            out = args.out or doc.get("outputs", {}).get("directory", "out")
            run_sweep(doc, axis, values, command, out, args.quiet, args.oracle_mode, args.jobs)
            return EXIT_OK
        sc = parse_scenario(doc)
        if args.command == "validate":
            if sc.grid is None:
                return _fail(["grid required for validate outputs"])
            check_grid_model(sc.model, sc.times)
        if args.command == "symmetry" and sc.operator is None:
            return _fail(["symmetry block required for the symmetry command"])
        out = args.out or sc.outputs.get("directory", "out")
        res = COMMANDS[args.command](sc, out, args.quiet, args.oracle_mode)
        if args.command == "validate" and res["status"] != "PASS":
            return EXIT_FAIL
        return EXIT_OK
    except ScenarioError as e:
        return _fail(e.diagnostics)
    except UnsupportedModelError as e:
        return _fail([str(e)])
    except (AnnihilationError, InadmissibleOperatorError) as e:
        return _fail([str(e)], EXIT_ERROR, "error")


if __name__ == "__main__":
    sys.exit(main())
