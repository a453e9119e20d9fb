"""Command-line entry points: single-trial traces, experiments, config checks.

Exit codes: 0 on success, 2 for configuration problems (bad config file,
invalid flag values, unknown subcommand), 1 for runtime failures.
"""

import argparse
import os
import sys

import numpy as np

from .geometry import ConfigError, SceneConfig
from .harness import (
    EXPERIMENT_IDS,
    ExperimentSpec,
    base_config,
    run_experiment,
    run_gain_trial,
    run_positioning_trial,
    trial_rng,
)

_SEED_ENV = "RISISAC_SEED"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risisac",
        description="RIS-assisted ISAC beam training and sensing experiments.",
    )
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="run one trial with a verbose trace")
    sim.add_argument("--config", help="scene config file (key = value lines)")
    sim.add_argument("--case", type=int, help="propagation case 1..8")
    sim.add_argument("--power", type=float, default=50.0,
                     help="transmit power in dBm (default 50)")
    sim.add_argument("--seed", type=int, help="master seed "
                     f"(default ${_SEED_ENV} or 0)")

    exp = sub.add_parser("experiment", help="run a named experiment to CSV")
    exp.add_argument("name", help="one of " + ", ".join(sorted(EXPERIMENT_IDS)))
    exp.add_argument("--out", required=True, help="output CSV path")
    exp.add_argument("--config",
                     help="experiment config file (trials/seed/powers keys)")
    exp.add_argument("--seed", type=int, help="master seed "
                     f"(default ${_SEED_ENV} or 0)")
    exp.add_argument("--trials", type=int, help="trials per power point")
    exp.add_argument("--powers",
                     help="comma-separated transmit powers in dBm")

    val = sub.add_parser("validate-config", help="check a scene config file")
    val.add_argument("path", help="config file to validate")
    return parser


def _master_seed(flag_value) -> int:
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get(_SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"${_SEED_ENV} must be an integer, got {env!r}")
    return 0


def _parse_powers(text: str) -> tuple:
    try:
        powers = tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"could not parse power list {text!r}")
    if not powers:
        raise ConfigError("power list is empty")
    return powers


def _read_experiment_config(path) -> dict:
    """Plain-text key = value file with keys trials, seed, powers."""
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#")[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key == "trials":
                out["trials"] = int(val)
            elif key == "seed":
                out["seed"] = int(val)
            elif key == "powers":
                out["powers"] = _parse_powers(val)
            else:
                raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
    return out


def _cmd_simulate(args) -> int:
    if args.config:
        cfg = SceneConfig.from_file(args.config)
        if args.case is not None:
            import dataclasses
            cfg = dataclasses.replace(cfg, case=args.case)
    else:
        case = args.case if args.case is not None else 1
        name = "pos-los" if case == 1 else "pos-nlos"
        cfg = base_config(name, case)
    cfg.validate()
    seed = _master_seed(args.seed)

    print(f"case {cfg.case}, f_c {cfg.f_c / 1e9:g} GHz, "
          f"arrays (N_T={cfg.n_t}, N_RIS={cfg.n_ris}, N_UT={cfg.n_ut}), "
          f"P_t {args.power:g} dBm, seed {seed}")

    rng = trial_rng(seed, 0, 0, 0, cfg.case)
    print("-- positioning trial")
    rec = run_positioning_trial(cfg, args.power, rng)
    for key in ("err_ris_ipebtts", "err_tar_ipebtts",
                "err_ris_spebtts", "err_tar_spebtts"):
        val = rec.get(key, float("nan"))
        print(f"  {key:18s} {val:.6g} m" if np.isfinite(val)
              else f"  {key:18s} failed")

    rng = trial_rng(seed, 0, 0, 1, cfg.case)
    print("-- beam alignment trial")
    rec = run_gain_trial(cfg, args.power, rng)
    for key in ("err_ris", "err_ut"):
        if key in rec and np.isfinite(rec[key]):
            print(f"  {key:18s} {rec[key]:.6g} m")
    print(f"  {'gain_proposed':18s} {rec['gain_proposed']:.6g}")
    print(f"  {'gain_sweep':18s} {rec['gain_sweep']:.6g}")
    print(f"  {'overhead':18s} {rec['overhead_proposed']} proposed / "
          f"{rec['overhead_sweep']} sweep symbols")
    return 0


def _cmd_experiment(args) -> int:
    overrides = _read_experiment_config(args.config) if args.config else {}
    if args.seed is not None or _SEED_ENV in os.environ:
        overrides["seed"] = _master_seed(args.seed)
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.powers is not None:
        overrides["powers"] = _parse_powers(args.powers)
    spec = ExperimentSpec(name=args.name, **overrides)
    spec.validate()
    path = run_experiment(spec, args.out)
    print(f"wrote {path}")
    return 0


def _cmd_validate_config(args) -> int:
    cfg = SceneConfig.from_file(args.path)
    cfg.validate()
    print(f"{args.path}: ok")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    handler = {
        "simulate": _cmd_simulate,
        "experiment": _cmd_experiment,
        "validate-config": _cmd_validate_config,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
