"""Command-line interface.

Subcommands: ``run``, ``it-eval``, ``trajectory``, ``scan``, ``zone-table``
and ``list-builtins``.  Every artifact is written below ``--output-dir``.
Exit status is 0 on success, 2 when a scenario or argument fails
validation, 3 on a numerical failure (caustic, no convergence, box escape).
"""

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from .classical import integrate
from .core import PhaseSpacePoint, PotentialSpec, Units, gaussian_packet, to_momentum
from .exceptions import NumericalError, ValidationError
from .harness import (
    BUILTINS,
    MetricRow,
    Scenario,
    auto_grid,
    builtin,
    convergence_scan,
    run_scenario,
    scenario_metadata,
    transition_zone_table,
)
from .imaging import it_wavefunction

logger = logging.getLogger("qcimaging")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _configure_threads():
    cap = os.environ.get("IT_THREADS")
    if not cap:
        return
    import numba

    try:
        n = int(cap)
    except ValueError:
        raise ValidationError(f"IT_THREADS must be an integer, got {cap!r}") from None
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(base, overrides):
    """Return a copy of ``base`` with ``dotted.key=value`` strings or a nested dict merged in."""
    out = copy.deepcopy(base)
    if isinstance(overrides, dict):
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(out.get(key), dict):
                out[key] = apply_overrides(out[key], value)
            else:
                out[key] = copy.deepcopy(value)
        return out
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"override {item!r} is not of the form key=value")
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = _parse_value(value.strip())
    return out


def _load_scenario(args):
    if args.builtin:
        base = builtin(args.builtin).to_dict()
    elif args.scenario:
        try:
            with open(args.scenario) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read scenario file {args.scenario}: {exc}") from exc
        if "scenario" in base and isinstance(base["scenario"], dict):
            base = base["scenario"]
    else:
        raise ValidationError("give --builtin NAME or --scenario PATH")
    if args.overrides:
        try:
            with open(args.overrides) as fh:
                extra = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read overrides file {args.overrides}: {exc}") from exc
        base = apply_overrides(base, extra.get("scenario", extra))
    base = apply_overrides(base, args.set or [])
    return Scenario.from_dict(base)


def _outdir(args):
    path = args.output_dir
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ValidationError(f"output directory {path} is not writable")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def cmd_run(args):
    s = _load_scenario(args)
    out = _outdir(args)
    rows = run_scenario(s)
    meta = scenario_metadata(s)
    if args.format == "csv":
        path = os.path.join(out, "metrics.csv")
        _write_csv(path, MetricRow.field_names(), ([getattr(r, k) for k in MetricRow.field_names()] for r in rows))
        _write_json(os.path.join(out, "metadata.json"), meta)
    else:
        path = os.path.join(out, "run.json")
        _write_json(path, {"scenario": s.to_dict(), "metadata": meta, "metrics": [r.to_dict() for r in rows]})
    print(f"{s.name}: {len(rows)} rows written to {path}")
    return EXIT_OK


def _units(args):
    return Units(args.hbar, args.mass)


def cmd_it_eval(args):
    V = PotentialSpec.from_string(args.potential)
    u = _units(args)
    s = Scenario(name="it-eval", potential=V, sigma=args.sigma, x0=args.x0, p0=args.p0, units=u, schedule=(args.t,))
    grid = auto_grid(s)
    phi = to_momentum(gaussian_packet(grid, args.sigma, args.x0, args.p0, u))
    sample = it_wavefunction(args.x, args.t, phi, V, args.x_i, 0.0, args.dt)
    out = _outdir(args)
    payload = {"potential": str(V), "units": {"hbar": u.hbar, "mass": u.mass}, **sample.to_dict()}
    if args.format == "csv":
        _write_csv(os.path.join(out, "it_eval.csv"), list(payload), [list(payload.values())])
    else:
        _write_json(os.path.join(out, "it_eval.json"), payload)
    print(json.dumps(_jsonable(payload)))
    return EXIT_OK


def cmd_trajectory(args):
    V = PotentialSpec.from_string(args.potential)
    traj = integrate(PhaseSpacePoint(args.x0, args.p0, args.t0), args.t, V, args.dt, _units(args))
    out = _outdir(args)
    payload = traj.to_dict()
    if args.format == "csv":
        _write_csv(os.path.join(out, "trajectory.csv"), list(payload), [list(payload.values())])
    else:
        _write_json(os.path.join(out, "trajectory.json"), payload)
    print(json.dumps(_jsonable(payload)))
    return EXIT_OK


def cmd_scan(args):
    s = _load_scenario(args)
    ts = np.geomspace(args.t_min, args.t_max, args.points)
    res = convergence_scan(s, ts, args.f_min)
    out = _outdir(args)
    if args.format == "csv":
        _write_csv(
            os.path.join(out, "scan.csv"),
            ["t", "validity_ratio", "l2_density_error"],
            zip(ts, res.ratios, res.errors),
        )
        _write_json(os.path.join(out, "scan_fit.json"), {"slope": res.slope, "intercept": res.intercept})
    else:
        _write_json(
            os.path.join(out, "scan.json"),
            {"scenario": s.to_dict(), "t": list(ts), "validity_ratio": res.ratios, "l2_density_error": res.errors,
             "slope": res.slope, "intercept": res.intercept},
        )
    print(f"{s.name}: slope {res.slope:.4f}")
    return EXIT_OK


def cmd_zone_table(args):
    rows = transition_zone_table(args.mass or [1.0], args.sigma, args.f or [100.0], Units(args.hbar))
    out = _outdir(args)
    header = ["mass", "sigma", "f", "t_i", "x_i", "action_ratio"]
    if args.format == "csv":
        _write_csv(os.path.join(out, "zone_table.csv"), header, ([getattr(r, k) for k in header] for r in rows))
    else:
        _write_json(os.path.join(out, "zone_table.json"), [{k: getattr(r, k) for k in header} for r in rows])
    for r in rows:
        print(f"m={r.mass:g} sigma={r.sigma:g} f={r.f:g}: t_i={r.t_i:.6g} x_i={r.x_i:.6g}")
    return EXIT_OK


def cmd_list_builtins(args):
    for name, s in BUILTINS.items():
        print(f"{name:20s} {s.description}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="qcimaging", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format="csv"):
        p.add_argument("--output-dir", default="qcimaging-out")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)

    def scenario_source(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--builtin")
        g.add_argument("--scenario", help="scenario JSON file (a run.json is accepted too)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted-key override, repeatable")
        p.add_argument("--overrides", metavar="JSON", help="JSON file merged onto the scenario")

    def physics(p):
        p.add_argument("--hbar", type=float, default=1.0)
        p.add_argument("--mass", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=None)

    p = sub.add_parser("run", help="run a scenario and write its metric table")
    scenario_source(p)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("it-eval", help="evaluate the imaging wavefunction at one point")
    p.add_argument("--potential", default="free")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--x-i", dest="x_i", type=float, default=0.0)
    physics(p)
    common(p, "json")
    p.set_defaults(func=cmd_it_eval)

    p = sub.add_parser("trajectory", help="integrate one classical trajectory")
    p.add_argument("--potential", default="free")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t", type=float, required=True)
    physics(p)
    common(p, "json")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("scan", help="convergence scan over a geometric time grid")
    scenario_source(p)
    p.add_argument("--t-min", type=float, required=True)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--points", type=int, default=6)
    p.add_argument("--f-min", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("zone-table", help="transition-zone start (t_i, x_i) per mass and f")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--f", type=float, action="append")
    p.add_argument("--mass", type=float, action="append")
    p.add_argument("--hbar", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_zone_table)

    p = sub.add_parser("list-builtins", help="list builtin scenarios")
    p.set_defaults(func=cmd_list_builtins)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _configure_threads()
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
