"""Command-line harness: simulate / attack / estimate / evaluate / sweep / run.

Every subcommand takes the scenario from ``--preset`` or ``--config`` and
writes its artifacts into ``--out-dir``. Seeds can be overridden per run
with repeated ``--seed-override name=value`` flags (names: sim, attack,
schedule, estimator_init).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .harness import (
    attack_stage,
    estimate_stage,
    evaluate_stage,
    run_pipeline,
    simulate_stage,
    sweep_pipeline,
    write_summary,
)
from .logio import LogFormatError
from .presets import PRESETS, preset

EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=sorted(PRESETS), help="bundled scenario name")
    parser.add_argument("--config", type=Path, help="path to a scenario JSON file")
    parser.add_argument(
        "--seed-override",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="override a named seed (sim, attack, schedule, estimator_init); repeatable",
    )
    parser.add_argument("--out-dir", type=Path, required=True, help="artifact directory")


def _resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    if bool(args.preset) == bool(args.config):
        raise ConfigError("exactly one of --preset or --config is required")
    config = preset(args.preset) if args.preset else ScenarioConfig.load(args.config)
    for override in args.seed_override:
        name, _, value = override.partition("=")
        if name not in ("sim", "attack", "schedule", "estimator_init"):
            raise ConfigError(f"--seed-override: unknown seed name {name!r}")
        try:
            setattr(config.seeds, name, int(value))
        except ValueError:
            raise ConfigError(f"--seed-override: invalid integer {value!r}") from None
    return config


def _estimator_list(args: argparse.Namespace, config: ScenarioConfig) -> list[str]:
    if getattr(args, "estimators", None):
        return [name.strip() for name in args.estimators.split(",") if name.strip()]
    return list(config.estimators)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    estimators = _estimator_list(args, config)
    summary, _, failures = run_pipeline(config, args.out_dir, estimators)
    for name, data in sorted(summary["estimators"].items()):
        loc = data["localization_m"]
        sync = data["sync_s"]
        print(
            f"{name:8s} localization mean {loc['mean']:.3f} m (std {loc['std']:.3f}); "
            f"sync mean {sync['mean'] * 1e6:.3f} us"
        )
    if failures:
        print(f"estimator failures: {sorted(failures)} (see error-manifest.json)", file=sys.stderr)
        return EXIT_PARTIAL
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    config.save(args.out_dir / "config.json")
    path = simulate_stage(config, args.out_dir / "measurements.log", apply_attack=args.apply_attack)
    print(f"wrote {path}")
    return 0


def _cmd_attack(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = args.out_dir / "measurements.log"
    attack_stage(config, args.measurements, out_path)
    print(f"wrote {out_path}")
    return 0


def _cmd_estimate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = args.out_dir / f"trace-{args.estimator}.log"
    timing = estimate_stage(config, args.estimator, args.measurements, trace_path)
    (args.out_dir / f"timings-{args.estimator}.json").write_text(
        json.dumps(timing, indent=2, sort_keys=True) + "\n"
    )
    print(f"wrote {trace_path}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    summary = evaluate_stage(config, args.measurements, args.trace, args.out_dir)
    path = write_summary(summary, args.out_dir)
    print(f"wrote {path}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    windows = [int(x) for x in args.window_sizes.split(",")] if args.window_sizes else None
    lams = [float(x) for x in args.lambdas.split(",")] if args.lambdas else None
    sweep = sweep_pipeline(config, args.out_dir, windows, lams)
    for point in sweep["points"]:
        print(
            f"L={point['window_size']:4d} lam={point['lam']:g} "
            f"error {point['error_m']:.3f} m, "
            f"{point['window_solve_mean_s'] * 1e3:.1f} ms/window"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secstate",
        description="attack-resilient localization and time synchronization harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate, attack, estimate, and evaluate in one go")
    _add_scenario_args(run_p)
    run_p.add_argument("--estimators", help="comma-separated subset (secekf,secopt,origekf)")
    run_p.set_defaults(func=_cmd_run)

    sim_p = sub.add_parser("simulate", help="generate a measurement log")
    _add_scenario_args(sim_p)
    sim_p.add_argument(
        "--apply-attack", action="store_true",
        help="corrupt the stream inline instead of writing the clean log",
    )
    sim_p.set_defaults(func=_cmd_simulate)

    atk_p = sub.add_parser("attack", help="rewrite a clean log with the scenario's attack")
    _add_scenario_args(atk_p)
    atk_p.add_argument("--measurements", type=Path, required=True, help="input (clean) log")
    atk_p.set_defaults(func=_cmd_attack)

    est_p = sub.add_parser("estimate", help="run one estimator over a measurement log")
    _add_scenario_args(est_p)
    est_p.add_argument("--estimator", required=True, choices=["secekf", "secopt", "origekf"])
    est_p.add_argument("--measurements", type=Path, required=True)
    est_p.set_defaults(func=_cmd_estimate)

    eval_p = sub.add_parser("evaluate", help="error reports from traces + a measurement log")
    _add_scenario_args(eval_p)
    eval_p.add_argument("--measurements", type=Path, required=True)
    eval_p.add_argument(
        "--trace", type=Path, action="append", required=True,
        help="estimate trace (repeatable)",
    )
    eval_p.set_defaults(func=_cmd_evaluate)

    sweep_p = sub.add_parser("sweep", help="window-size / lambda sweep of the windowed estimator")
    _add_scenario_args(sweep_p)
    sweep_p.add_argument("--window-sizes", help="comma-separated window sizes")
    sweep_p.add_argument("--lambdas", help="comma-separated penalty weights")
    sweep_p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, LogFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
