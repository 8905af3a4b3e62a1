"""Configuration-driven command line.

Two subcommands:

``run <config.json>``
    Simulate one model instance described by a JSON document and write a
    long-format trajectory CSV (one row per time/point pair) plus a summary
    JSON.  Exit codes: 0 on success (including a blow-up verdict, which is a
    legitimate outcome), 2 for configuration errors (no outputs written),
    3 for runtime domain/model errors (partial outputs flushed), 4 for a
    contraction abort at the substep floor.

``verify <suite> [--seed S]``
    Run one of the invariant suites (delay, stepper, spatial, forest, all)
    and print the machine-readable report; exit 0 iff every check passed.

Floats are serialized with 17 significant digits, so the provided readers
round-trip to full precision.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .errors import ConfigError
from .history import grid_positions, history_from_profiles, make_time_profile
from .models import build_model, juvenile_series
from .stepper import ABORTED, DOMAIN_ERROR, SolverConfig, simulate
from .verify import SUITE_NAMES, run_suite

__all__ = ["main", "load_config", "run_command", "verify_command",
           "read_trajectory_csv", "read_summary"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_CONTRACTION = 4

_PROFILE_KINDS = ("constant", "linear", "exponential", "sinusoid")


def _fmt(v):
    return format(float(v), ".17g")


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _profile_spec(spec, where):
    _require(isinstance(spec, dict), f"{where} must be an object")
    kind = spec.get("kind")
    _require(kind in _PROFILE_KINDS,
             f"{where}.kind must be one of {_PROFILE_KINDS}, got {kind!r}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    for key, val in params.items():
        _require(isinstance(val, (int, float)),
                 f"{where}.{key} must be a number")
    return kind, params


def load_config(path):
    """Parse and validate a run configuration; raises ``ConfigError``."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    _require(isinstance(raw, dict), "config root must be an object")

    model = raw.get("model")
    _require(isinstance(model, dict) and "id" in model,
             "config requires model.id")
    n = raw.get("grid_points", 1)
    _require(isinstance(n, int) and n >= 1, "grid_points must be a positive integer")
    horizon = raw.get("horizon")
    _require(isinstance(horizon, (int, float)) and horizon > 0,
             "horizon must be a positive number")

    initial = raw.get("initial", {"time": {"kind": "constant", "value": 1.0}})
    time_spec = initial.get("time", {"kind": "constant", "value": 1.0})
    space_spec = initial.get("space", {"kind": "constant", "value": 1.0})
    t_kind, t_params = _profile_spec(time_spec, "initial.time")
    s_kind, s_params = _profile_spec(space_spec, "initial.space")

    lag_spec = raw.get("initial_delay", {"kind": "constant", "value": 1.0})
    l_kind, l_params = _profile_spec(lag_spec, "initial_delay")

    solver_raw = raw.get("solver", {})
    _require(isinstance(solver_raw, dict), "solver must be an object")
    try:
        solver = SolverConfig(**solver_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver settings: {exc}")

    output = raw.get("output", {})
    _require(isinstance(output, dict), "output must be an object")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer")

    return {
        "model_id": model["id"],
        "model_params": {k: v for k, v in model.items() if k != "id"},
        "n": n,
        "horizon": float(horizon),
        "time_profile": (t_kind, t_params),
        "space_profile": (s_kind, s_params),
        "lag_profile": (l_kind, l_params),
        "solver": solver,
        "trajectory_csv": output.get("trajectory_csv", "trajectory.csv"),
        "summary_json": output.get("summary_json", "summary.json"),
        "seed": seed,
    }


def _space_field(kind, params, n):
    prof = make_time_profile(kind, **params)
    return np.asarray(prof(grid_positions(n)), dtype=float)


def _write_trajectory_csv(path, traj, extras):
    x = grid_positions(traj.fields.shape[1])
    names = ["t", "x", "A", "tau"] + list(extras)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i, t in enumerate(traj.times):
            t_s = _fmt(t)
            for j in range(len(x)):
                row = [t_s, _fmt(x[j]), _fmt(traj.fields[i, j]),
                       _fmt(traj.lags[i, j])]
                for col in extras.values():
                    row.append(_fmt(col[i, j]))
                writer.writerow(row)


def _write_summary(path, traj, wall_time):
    res = traj.residuals or {}
    residual_max = None
    if res:
        residual_max = max(res.get("state_residual_max", 0.0),
                           res.get("lag_residual_max", 0.0))
    summary = {
        "verdict": traj.verdict,
        "t_bu_estimate": traj.t_blowup,
        "max_sup_norm": float(np.max(traj.sup_norms)),
        "residual_max": residual_max,
        "wall_time_s": round(wall_time, 6),
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def run_command(config_path):
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        model = build_model(cfg["model_id"], cfg["model_params"], cfg["n"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    time_prof = make_time_profile(cfg["time_profile"][0], **cfg["time_profile"][1])
    space = _space_field(*cfg["space_profile"], cfg["n"])
    initial = history_from_profiles(time_prof, space)
    tau0 = _space_field(*cfg["lag_profile"], cfg["n"])
    if np.any(tau0 < 0.0):
        print("config error: initial_delay must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG

    t_start = time.time()
    traj = simulate(model, initial, tau0, cfg["horizon"], cfg["solver"])

    extras = {}
    if cfg["model_id"] == "forest":
        dt = cfg["solver"].dt
        extras["J"] = juvenile_series(traj.history, traj.times, traj.lags,
                                      model.forest, model.op, dt)
        extras["B"] = model.op.apply(model.forest.birth_rate * traj.fields)
    _write_trajectory_csv(cfg["trajectory_csv"], traj, extras)
    summary = _write_summary(cfg["summary_json"], traj, time.time() - t_start)
    print(json.dumps(summary))
    if traj.verdict == DOMAIN_ERROR:
        print(f"runtime error: {traj.error}", file=sys.stderr)
        return EXIT_RUNTIME
    if traj.verdict == ABORTED:
        print(f"contraction abort: {traj.error}", file=sys.stderr)
        return EXIT_CONTRACTION
    return EXIT_OK


def verify_command(suite, seed=0, out=None):
    if suite not in SUITE_NAMES:
        print(f"unknown suite {suite!r}; choose from {', '.join(SUITE_NAMES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    report = run_suite(suite, seed=seed)
    text = json.dumps(report, indent=2)
    print(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK if report["passed"] else 1


# -- readers (round-trip the outputs to full precision) -------------------------

def read_trajectory_csv(path):
    """Read a trajectory CSV back into arrays keyed by column name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, val in zip(header, row):
                cols[name].append(float(val))
    return {name: np.asarray(vals) for name, vals in cols.items()}


def read_summary(path):
    with open(path) as fh:
        return json.load(fh)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sddesim",
        description="Simulate threshold-lag delay systems and verify their "
                    "invariant suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="simulate one configured model run")
    p_run.add_argument("config", help="path to the JSON run configuration")
    p_ver = sub.add_parser("verify", help="run an invariant suite")
    p_ver.add_argument("suite", help=f"one of: {', '.join(SUITE_NAMES)}")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--out", default=None, help="also write the report here")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_command(args.config)
    return verify_command(args.suite, seed=args.seed, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
