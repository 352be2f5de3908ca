"""Command-line interface: ``delayest simulate|estimate|mc|fisher|limit``.

Every command reads one JSON config file. Exit codes: 0 success,
1 configuration or validation error, 2 numeric or runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, DelayEstError
from .limit import solve_limit, trajectory_csv
from .model import ShiftModel, model_from_dict, validate_model
from .montecarlo import McConfig, default_step, run_campaign, run_pipeline, scaling_study, validate_config
from .sensitivity import fisher, fisher_csv
from .simulate import path_csv, read_path, simulate

MODEL_KEYS = ("type", "drift", "a", "b", "x0", "T", "window", "epsilon")

# (key, default, description); the order here is the order in --help
COMMAND_KEYS: tuple[tuple[str, Any, str], ...] = (
    ("theta0", None, "true delay used for simulation and error reporting"),
    ("h", None, "grid step; null = min(alpha/10, T/2000) for shift, T/2000 otherwise"),
    ("seed", 0, "master seed of the counter-based noise"),
    ("rep", 0, "replication index of the simulated path (simulate)"),
    ("reps", 1000, "number of replications (mc)"),
    ("workers", 1, "parallel worker processes (mc); results do not depend on it"),
    ("pipeline", None, "shift | pantograph | scale; null = model type"),
    ("tau_exponent", 0.45, "tau = epsilon ** tau_exponent (pantograph)"),
    ("tau", None, "explicit tau; null = epsilon ** tau_exponent, or 0.01 when epsilon = 0"),
    ("kernel_mode", "fisher-consistent", "two-step score kernel: fisher-consistent | as-printed"),
    ("compare_kernels", False, "also run the other two-step kernel mode"),
    ("eval_times", None, "times for the two-step MLE-process (pantograph)"),
    ("coarse_n", 512, "coarse scan size of the minimum distance estimator"),
    ("grid_n", 2048, "grid size of the brute-force MLE"),
    ("include_grid_mle", False, "add the brute-force MLE to the pipeline"),
    ("target_reps", 2000, "replications for the MDE limit variance target (mc)"),
    ("eps_list", None, "noise levels for a scaling study appended to the mc report"),
    ("out", None, "output file (overridden by --out)"),
    ("csv", None, "records CSV of mc (overridden by --csv)"),
)
_DEFAULTS = {k: d for k, d, _ in COMMAND_KEYS}


def _help_epilog() -> str:
    lines = ["config keys (JSON object):",
             "  model: type (shift|pantograph|scale), drift {name, params} (shift, scale),",
             "         a, b (pantograph), x0, T, window [alpha, beta], epsilon  (all required)"]
    for key, default, desc in COMMAND_KEYS:
        lines.append(f"  {key} = {json.dumps(default)}: {desc}")
    lines.append("exit codes: 0 success, 1 configuration error, 2 numeric failure")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    def fmt(prog):
        return argparse.RawDescriptionHelpFormatter(prog, width=88)

    parser = argparse.ArgumentParser(
        prog="delayest", formatter_class=fmt, epilog=_help_epilog(),
        description="Delay estimation for small-noise stochastic differential equations.")
    parser.add_argument("command", choices=["simulate", "estimate", "mc", "fisher", "limit"])
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", help="output file")
    parser.add_argument("--csv", help="per-replication records CSV (mc)")
    parser.add_argument("--path", help="stored path CSV (estimate)")
    parser.add_argument("--theta", type=float, help="delay value (limit)")
    parser.add_argument("--theta-grid", help="delay grid a:b:n (fisher)")
    return parser


def load_config(file) -> tuple[Any, dict]:
    try:
        with open(file) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("CONFIG_UNREADABLE", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("CONFIG_INVALID", f"not valid JSON: {exc}") from None
    return parse_config(data)


def parse_config(data) -> tuple[Any, dict]:
    """Split a flat config into a validated model and command options."""
    if not isinstance(data, dict):
        raise ConfigError("CONFIG_INVALID", "config must be a JSON object")
    unknown = set(data) - set(MODEL_KEYS) - set(_DEFAULTS)
    if unknown:
        raise ConfigError("CONFIG_UNKNOWN_KEY", f"unknown config key(s): {sorted(unknown)}")
    model = model_from_dict({k: v for k, v in data.items() if k in MODEL_KEYS})
    validate_model(model).raise_if_invalid()
    opts = dict(_DEFAULTS)
    opts.update({k: v for k, v in data.items() if k in _DEFAULTS})
    if opts["h"] is None:
        opts["h"] = default_step(model)
    return model, opts


def _mc_config(model, opts, reps=None) -> McConfig:
    theta0 = opts["theta0"]
    if theta0 is None:
        raise ConfigError("CONFIG_MISSING_KEY", "theta0 is required")
    try:
        cfg = McConfig(
            model=model, theta0=float(theta0), h=float(opts["h"]),
            reps=int(opts["reps"] if reps is None else reps), seed=int(opts["seed"]),
            pipeline=opts["pipeline"], tau_exponent=float(opts["tau_exponent"]),
            tau=None if opts["tau"] is None else float(opts["tau"]),
            kernel_mode=opts["kernel_mode"], compare_kernels=bool(opts["compare_kernels"]),
            eval_times=None if opts["eval_times"] is None else tuple(map(float, opts["eval_times"])),
            coarse_n=int(opts["coarse_n"]), grid_n=int(opts["grid_n"]),
            include_grid_mle=bool(opts["include_grid_mle"]),
            target_reps=int(opts["target_reps"]), workers=int(opts["workers"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("CONFIG_INVALID", str(exc)) from None
    validate_config(cfg)
    return cfg


def _write(text: str, file) -> None:
    if file is None:
        sys.stdout.write(text)
    else:
        with open(file, "w", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def cmd_simulate(model, opts, args) -> None:
    theta0 = opts["theta0"]
    if theta0 is None:
        raise ConfigError("CONFIG_MISSING_KEY", "theta0 is required")
    path = simulate(model, float(theta0), float(opts["h"]), int(opts["seed"]), int(opts["rep"]))
    out = args.out or opts["out"]
    _write(path_csv(path), out)
    if out is not None:
        env = dict(path.envelope(), theta0=float(theta0))
        _write(_dump(env), Path(out).with_suffix(".json"))


def cmd_estimate(model, opts, args) -> None:
    if args.path is None:
        raise ConfigError("CONFIG_MISSING_KEY", "--path is required")
    env_file = Path(args.path).with_suffix(".json")
    envelope = json.loads(env_file.read_text()) if env_file.exists() else None
    try:
        path = read_path(args.path, envelope)
    except OSError as exc:
        raise ConfigError("PATH_UNREADABLE", str(exc)) from None
    cfg = _mc_config(model, dict(opts, theta0=opts["theta0"] if opts["theta0"] is not None
                                 else 0.5 * (model.window.alpha + model.window.beta)), reps=1)
    if abs(path.h - cfg.step) > 1e-12 * cfg.step:
        raise DelayEstError("GRID_MISMATCH", f"path step {path.h} differs from config h {cfg.step}")
    records = run_pipeline(path, cfg)
    result = {"records": [r.to_dict() for r in records]}
    if opts["theta0"] is not None:
        result["theta0"] = float(opts["theta0"])
    _write(_dump(result), args.out or opts["out"])


def cmd_mc(model, opts, args) -> None:
    cfg = _mc_config(model, opts)
    report = run_campaign(cfg)
    payload = report.to_dict()
    if opts["eps_list"] is not None:
        payload["scaling"] = scaling_study(model, cfg.theta0, opts["eps_list"],
                                           min(cfg.reps, 200), cfg.seed, cfg.step)
    _write(_dump(payload), args.out or opts["out"])
    csv_file = args.csv or opts["csv"]
    if csv_file is not None:
        _write(report.records_csv(), csv_file)


def parse_grid(spec: str) -> np.ndarray:
    """Parse ``a:b:n`` into ``n`` equispaced values from ``a`` to ``b``."""
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError("CONFIG_INVALID", f"theta grid must be a:b:n, got {spec!r}") from None
    if n < 1 or (n > 1 and not a < b):
        raise ConfigError("CONFIG_INVALID", f"theta grid needs a < b and n >= 1, got {spec!r}")
    return np.linspace(a, b, n)


def cmd_fisher(model, opts, args) -> None:
    if args.theta_grid is None:
        raise ConfigError("CONFIG_MISSING_KEY", "--theta-grid is required")
    tau = 0.0 if opts["tau"] is None else float(opts["tau"])
    h = float(opts["h"])
    rows = []
    for th in parse_grid(args.theta_grid):
        if isinstance(model, ShiftModel) and h > th / 10:
            raise ConfigError("STEP_TOO_COARSE", f"h={h} exceeds theta/10 at theta={th}")
        rows.append((th, fisher(model, float(th), h, tau=tau).value))
    _write(fisher_csv(rows), args.out or opts["out"])


def cmd_limit(model, opts, args) -> None:
    if args.theta is None:
        raise ConfigError("CONFIG_MISSING_KEY", "--theta is required")
    traj = solve_limit(model, args.theta, float(opts["h"]))
    _write(trajectory_csv(traj), args.out or opts["out"])


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "mc": cmd_mc,
            "fisher": cmd_fisher, "limit": cmd_limit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model, opts = load_config(args.config)
        COMMANDS[args.command](model, opts, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DelayEstError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
