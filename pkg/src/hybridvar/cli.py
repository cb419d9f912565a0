"""Command-line front end: solve, verify, poincare, converge.

Every command reads a JSON config (the problem-spec document plus
command-specific keys), writes a machine-readable report, and exits with
a scriptable status:

    0  success / all checks passed
    1  usage, config, or IO error
    2  verification or residual failure
    3  numerical non-convergence

Re-running a command with an identical config and seed reproduces the
results payload byte for byte; wall time lives outside the payload.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
import time

import numpy as np

from . import __version__
from .analysis import (
    EigenIterationError,
    check_coercivity,
    check_interface_estimate,
    check_product_norm_lower,
    coercivity_constants,
    energy_identity_residual,
    poincare_estimate,
)
from .domain import ProblemSpec, make_domain, spec_from_dict, spec_to_dict
from .solver import FactorizationError, solution_to_dict, solve
from .two_node import check_splitting

__all__ = ["entry", "main"]

_COMMANDS = ("solve", "verify", "poincare", "converge")
_EXTRA_KEYS = {
    "solve": (),
    "verify": ("samples", "grid", "c1_scale"),
    "poincare": ("tol", "ladder"),
    "converge": ("ladder",),
}

# margin tolerances of the verification checks (fixed, not configurable)
_TOL_INTERFACE = 1e-10
_TOL_COERCIVITY = 1e-8
_TOL_PRODUCT_NORM = 1e-10


class _ConfigError(ValueError):
    pass


def _load_config(path: str, command: str) -> tuple[ProblemSpec, dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise _ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise _ConfigError("config must be a JSON object")
    extras = {}
    for key in _EXTRA_KEYS[command]:
        if key in data:
            extras[key] = data.pop(key)
    try:
        spec = spec_from_dict(data)
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc
    return spec, extras


def _report(command: str, spec: ProblemSpec, results: dict, started: float) -> dict:
    return {
        "command": command,
        "spec_echo": spec_to_dict(spec),
        "results": results,
        "wall_time_ms": int(round(1000.0 * (time.perf_counter() - started))),
        "version": __version__,
    }


def _jsonable(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _write_json(report: dict, out_path: str) -> None:
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _write_csv(rows: list[dict], out_path: str) -> None:
    if not rows:
        raise _ConfigError("nothing to write")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def _cmd_solve(spec: ProblemSpec, extras: dict, out_path: str, fmt: str, started: float) -> int:
    sol = solve(spec)
    results = solution_to_dict(sol, spec)
    if fmt == "csv":
        rows = [{"key": "j_value", "value": repr(float(sol.j_value))},
                {"key": "weak_residual", "value": repr(float(sol.weak_residual))}]
        rows += [{"key": f"cont_coeff_{i}", "value": repr(float(v))}
                 for i, v in enumerate(sol.u.cont_coeffs)]
        rows += [{"key": f"node_value_{k}", "value": repr(float(v))}
                 for k, v in zip(range(2, spec.domain.num_nodes + 2), sol.u.node_values)]
        _write_csv(rows, out_path)
    else:
        _write_json(_report("solve", spec, results, started), out_path)
    return 0 if sol.weak_residual <= spec.tol_solve else 2


def _grid_points(spec: ProblemSpec, grid: dict | None):
    if grid is None:
        dom = spec.domain
        return [(dom.alpha, dom.num_nodes, dom.mesh_intervals)]
    allowed = {"alpha", "num_nodes", "mesh_intervals"}
    unknown = set(grid) - allowed
    if unknown:
        raise _ConfigError(f"unknown key '{sorted(unknown)[0]}' in grid")
    alphas = grid.get("alpha", [spec.domain.alpha])
    nodes = grid.get("num_nodes", [spec.domain.num_nodes])
    meshes = grid.get("mesh_intervals", [spec.domain.mesh_intervals])
    return [(a, n, m) for a in alphas for n in nodes for m in meshes]


def _cmd_verify(spec: ProblemSpec, extras: dict, out_path: str, fmt: str, started: float) -> int:
    samples = extras.get("samples")
    if samples is None:
        raise _ConfigError("missing key 'samples' in verify config")
    samples = int(samples)
    if samples < 1:
        raise _ConfigError("samples must be >= 1")
    c1_scale = float(extras.get("c1_scale", 1.0))
    identity_samples = min(samples, 100)
    grid_entries = []
    all_passed = True
    for index, (alpha, n, m) in enumerate(_grid_points(spec, extras.get("grid"))):
        forcing = spec.forcing
        if n != spec.domain.num_nodes:
            forcing = dataclasses.replace(forcing, node_loads=tuple([0.0] * n))
        point_spec = dataclasses.replace(
            spec, domain=make_domain(alpha, n, m), forcing=forcing, seed=spec.seed + index
        )
        consts = coercivity_constants(point_spec, c1_scale)
        identity = energy_identity_residual(point_spec, identity_samples)
        ii_lo, ii_hi = check_interface_estimate(point_spec, samples, c1_scale)
        co_lo, co_hi = check_coercivity(point_spec, samples, c1_scale)
        pn = check_product_norm_lower(point_spec, samples)
        checks = {
            "energy_identity": {
                "worst_rel_residual": identity,
                "samples": identity_samples,
                "tol": point_spec.tol_identity,
                "passed": identity <= point_spec.tol_identity,
            },
            "interface_estimate": {
                "lower": ii_lo,
                "upper": ii_hi,
                "c1": consts.c1,
                "c2": consts.c2,
                "tol": _TOL_INTERFACE,
                "passed": min(ii_lo, ii_hi) >= -_TOL_INTERFACE,
            },
            "coercivity": {
                "lower": co_lo,
                "upper": co_hi,
                "C1": consts.C1,
                "C2": consts.C2,
                "tol": _TOL_COERCIVITY,
                "passed": min(co_lo, co_hi) >= -_TOL_COERCIVITY,
            },
            "product_norm_lower": {
                "margin": pn,
                "tol": _TOL_PRODUCT_NORM,
                "passed": pn >= -_TOL_PRODUCT_NORM,
            },
        }
        if n == 2:
            sol = solve(point_spec)
            cont_ok, res_a, res_b = check_splitting(sol, point_spec)
            checks["splitting"] = {
                "cont_ok": cont_ok,
                "node_a_res": res_a,
                "node_b_res": res_b,
                "tol": point_spec.tol_solve,
                "passed": cont_ok and max(res_a, res_b) <= point_spec.tol_solve,
            }
        all_passed = all_passed and all(c["passed"] for c in checks.values())
        grid_entries.append(
            {
                "alpha": alpha,
                "num_nodes": n,
                "mesh_intervals": m,
                "samples": samples,
                "seed": point_spec.seed,
                "checks": checks,
            }
        )
    results = {"all_passed": all_passed, "c1_scale": c1_scale, "grid": grid_entries}
    if fmt == "csv":
        rows = []
        for entry_ in grid_entries:
            for name, payload in entry_["checks"].items():
                lower = payload.get("lower", payload.get("margin", payload.get("worst_rel_residual")))
                upper = payload.get("upper", "")
                rows.append(
                    {
                        "check": name,
                        "alpha": entry_["alpha"],
                        "num_nodes": entry_["num_nodes"],
                        "mesh_intervals": entry_["mesh_intervals"],
                        "samples": entry_["samples"],
                        "seed": entry_["seed"],
                        "lower": repr(lower),
                        "upper": repr(upper),
                        "passed": payload["passed"],
                    }
                )
        _write_csv(rows, out_path)
    else:
        _write_json(_report("verify", spec, results, started), out_path)
    return 0 if all_passed else 2


def _cmd_poincare(spec: ProblemSpec, extras: dict, out_path: str, fmt: str, started: float) -> int:
    tol = float(extras.get("tol", 1e-6))
    ladder = [int(m) for m in extras.get("ladder", [spec.domain.mesh_intervals])]
    if not ladder:
        raise _ConfigError("ladder must not be empty")
    table = []
    for m in ladder:
        point_spec = dataclasses.replace(
            spec, domain=make_domain(spec.domain.alpha, spec.domain.num_nodes, m)
        )
        est = poincare_estimate(point_spec)
        table.append(
            {"mesh_intervals": m, "theta_max": est.theta_max, "iterations": est.iterations}
        )
    est = poincare_estimate(spec)
    passed = est.theta_max <= est.upper_bound + tol
    results = {
        "theta_max": est.theta_max,
        "upper_bound": est.upper_bound,
        "iterations": est.iterations,
        "tol": tol,
        "passed": passed,
        "table": table,
    }
    if fmt == "csv":
        rows = [
            {
                "mesh_intervals": row["mesh_intervals"],
                "theta_max": repr(row["theta_max"]),
                "iterations": row["iterations"],
                "upper_bound": repr(est.upper_bound),
            }
            for row in table
        ]
        _write_csv(rows, out_path)
    else:
        _write_json(_report("poincare", spec, results, started), out_path)
    return 0 if passed else 2


def _cmd_converge(spec: ProblemSpec, extras: dict, out_path: str, fmt: str, started: float) -> int:
    if "ladder" not in extras:
        raise _ConfigError("missing key 'ladder' in converge config")
    ladder = [int(m) for m in extras["ladder"]]
    if not ladder:
        raise _ConfigError("ladder must not be empty")
    for prev, cur in zip(ladder, ladder[1:]):
        if cur != 2 * prev:
            raise _ConfigError("ladder must be nested (dyadic)")
    rows = []
    j_values = []
    for m in ladder:
        point_spec = dataclasses.replace(
            spec, domain=make_domain(spec.domain.alpha, spec.domain.num_nodes, m)
        )
        sol = solve(point_spec)
        j_values.append(sol.j_value)
        rows.append(
            {"mesh_intervals": m, "j_value": sol.j_value, "weak_residual": sol.weak_residual}
        )
    monotone = all(
        later <= earlier + 1e-12 * (1.0 + abs(earlier))
        for earlier, later in zip(j_values, j_values[1:])
    )
    if fmt == "csv":
        _write_csv(
            [
                {
                    "mesh_intervals": r["mesh_intervals"],
                    "j_value": repr(r["j_value"]),
                    "weak_residual": repr(r["weak_residual"]),
                }
                for r in rows
            ],
            out_path,
        )
    else:
        results = {"ladder": rows, "monotone": monotone}
        _write_json(_report("converge", spec, results, started), out_path)
    return 0 if monotone else 2


_RUNNERS = {
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "poincare": _cmd_poincare,
    "converge": _cmd_converge,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hybridvar",
        description="Solve and certify the hybrid nonlocal variational problem.",
    )
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", required=True, help="problem spec JSON path")
    parser.add_argument("--out", required=True, help="output report path")
    parser.add_argument("--seed", type=int, default=None, help="override the seed in the config")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    args = parser.parse_args(argv)

    started = time.perf_counter()
    try:
        spec, extras = _load_config(args.config, args.command)
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
        return _RUNNERS[args.command](spec, extras, args.out, args.format, started)
    except (_ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EigenIterationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FactorizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entry()
