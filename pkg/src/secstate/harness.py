"""Pipeline stages: simulate -> attack -> estimate -> evaluate.

Each stage reads and writes the documented log formats so stages compose via
files; ``run_pipeline`` chains the same stage functions, which makes the
one-shot run and the subcommand chain byte-identical by construction.

Determinism: all randomness flows from the scenario's named seeds. The
summary JSON contains no wall-clock data (timings are written separately) so
identical config+seeds reproduce it byte for byte.
"""

from __future__ import annotations

import csv
import json
import time as _time
import traceback
from pathlib import Path

import numpy as np

from .attacks import AttackConfig, AttackInjector, validate_attack_magnitudes
from .config import ScenarioConfig
from .core import NetworkState, NodeState, Topology, pack
from .ekf import Ekf, EkfConfig
from .logio import (
    LogEntry,
    TraceRow,
    read_measurement_log,
    read_trace,
    trace_positions_offsets,
    truth_arrays,
    write_measurement_log,
    write_trace,
)
from .metrics import build_report
from .simulate import SimRecord, Simulator
from .window_opt import SecOptConfig, run_stream

SUMMARY_SCHEMA = "secstate.summary"


def build_topology(config: ScenarioConfig) -> Topology:
    spec = config.topology
    if spec.kind == "full":
        return Topology.fully_connected(config.n_nodes)
    if spec.kind == "k_nearest":
        positions = np.array([node.motion.position_at(0.0) for node in config.nodes])
        return Topology.k_nearest(positions, spec.k)
    return Topology.from_edges(config.n_nodes, spec.edges)


def build_simulator(config: ScenarioConfig) -> Simulator:
    from .simulate import NoiseConfig

    return Simulator(
        topology=build_topology(config),
        clocks=[node.clock for node in config.nodes],
        motions=[node.motion for node in config.nodes],
        noise=NoiseConfig(
            sigma_counter=config.noise.sigma_d,
            sigma_single=config.noise.sigma_r,
            sigma_double=config.noise.sigma_R,
        ),
        kinds=config.kinds,
        event_interval=config.event_interval,
        include_propagation=config.include_propagation,
        master_index=config.master,
        seed=config.seeds.sim,
        schedule_seed=config.seeds.schedule,
    )


def build_injector(config: ScenarioConfig) -> AttackInjector:
    attack_config = AttackConfig(
        attack_type=config.attack.attack_type,
        total_time=config.duration,
        magnitude_scale=config.attack.magnitude_scale,
        constants=dict(config.attack.constants),
        seed=config.seeds.attack,
        master_index=config.master,
    )
    validate_attack_magnitudes(attack_config, config.arena.diagonal)
    return AttackInjector(attack_config, config.n_nodes)


def initial_guess(config: ScenarioConfig) -> NetworkState:
    """Anchor priors: configured positions perturbed from the init seed;
    mobile nodes start at the arena center with a wide prior."""
    rng = np.random.default_rng(config.seeds.estimator_init)
    mobile = set(config.init.mobile_ids)
    center = config.arena.center
    nodes = []
    for spec in config.nodes:
        if spec.node_id in mobile:
            nodes.append(NodeState(position=center))
        else:
            position = spec.motion.position_at(0.0) + rng.normal(
                0.0, config.init.anchor_position_std, size=3
            )
            nodes.append(NodeState(position=position))
    return NetworkState(nodes=tuple(nodes), master_index=config.master)


def build_ekf_config(config: ScenarioConfig, attack_states_enabled: bool) -> EkfConfig:
    ekf = config.ekf
    mobile = config.init.mobile_ids
    return EkfConfig(
        sigma_counter=config.noise.sigma_d,
        sigma_single=config.noise.sigma_r,
        sigma_double=config.noise.sigma_R,
        q_position=ekf.q_position,
        q_offset=ekf.q_offset,
        q_bias=ekf.q_bias,
        q_attack_offset=ekf.q_attack_offset,
        q_attack_distance=ekf.q_attack_distance,
        p0_position=ekf.p0_position,
        p0_offset=ekf.p0_offset,
        p0_bias=ekf.p0_bias,
        p0_attack_offset=ekf.p0_attack_offset,
        p0_attack_distance=ekf.p0_attack_distance,
        attack_states_enabled=attack_states_enabled,
        include_propagation=config.include_propagation,
        innovation_gate=ekf.innovation_gate,
        q_position_overrides={m: ekf.q_position_mobile for m in mobile},
        p0_position_overrides={m: ekf.p0_position_mobile for m in mobile},
    )


def build_secopt_config(
    config: ScenarioConfig,
    window_size: int | None = None,
    lam: float | None = None,
) -> SecOptConfig:
    s = config.secopt
    return SecOptConfig(
        sigma_counter=config.noise.sigma_d,
        sigma_single=config.noise.sigma_r,
        sigma_double=config.noise.sigma_R,
        lam=s.lam if lam is None else lam,
        window_size=s.window_size if window_size is None else window_size,
        stride=s.stride,
        max_iterations=s.max_iterations,
        step_tol=s.step_tol,
        l1_epsilon=s.l1_epsilon,
        warm_start=s.warm_start,
        estimate_attacks=s.estimate_attacks,
        split_subproblems=s.split_subproblems,
        include_propagation=config.include_propagation,
    )


# ----------------------------------------------------------------------
# stages


def simulate_stage(config: ScenarioConfig, out_path: str | Path, apply_attack: bool = False) -> Path:
    """Write the measurement log; optionally corrupt it inline."""
    out_path = Path(out_path)
    simulator = build_simulator(config)
    injector = build_injector(config) if apply_attack else None

    def records():
        for record in simulator.records(config.duration):
            if injector is None:
                yield record
            else:
                yield SimRecord(
                    index=record.index,
                    measurement=injector.corrupt(record.measurement),
                    truth=record.truth,
                )

    write_measurement_log(
        out_path,
        records(),
        n_nodes=config.n_nodes,
        master_index=config.master,
        meta={"scenario": config.name, "attack": config.attack.attack_type if apply_attack else "none"},
    )
    return out_path


def attack_stage(config: ScenarioConfig, in_path: str | Path, out_path: str | Path) -> Path:
    """Standalone log-rewriting pass applying the scenario's attack."""
    header, entries = read_measurement_log(in_path)
    injector = build_injector(config)

    def records():
        for entry in entries:
            yield SimRecord(
                index=entry.index,
                measurement=injector.corrupt(entry.measurement),
                truth=entry.truth,
            )

    write_measurement_log(
        Path(out_path),
        records(),
        n_nodes=int(header["n_nodes"]),
        master_index=int(header["master"]),
        meta={"scenario": header.get("scenario", config.name), "attack": config.attack.attack_type},
    )
    return Path(out_path)


def _timing_stats(samples: list[float], kind: str) -> dict:
    arr = np.asarray(samples)
    return {
        "kind": kind,
        "count": int(arr.size),
        "total_s": float(arr.sum()) if arr.size else 0.0,
        "mean_s": float(arr.mean()) if arr.size else 0.0,
        "median_s": float(np.median(arr)) if arr.size else 0.0,
        "max_s": float(arr.max()) if arr.size else 0.0,
    }


def _estimate_ekf(
    config: ScenarioConfig, estimator: str, entries: list[LogEntry], trace_path: Path
) -> dict:
    cfg = build_ekf_config(config, attack_states_enabled=(estimator == "secekf"))
    ekf = Ekf(config.n_nodes, cfg, master_index=config.master)
    fs = ekf.initial_state(initial_guess(config))
    stride = config.ekf.trace_stride
    rows: list[TraceRow] = []
    step_times: list[float] = []
    rejected = 0
    for entry in entries:
        t0 = _time.perf_counter()
        fs, record = ekf.step(fs, entry.measurement)
        step_times.append(_time.perf_counter() - t0)
        if not record.accepted:
            rejected += 1
        if entry.index % stride == 0:
            rows.append(
                TraceRow(
                    step=fs.step,
                    time=fs.master_time,
                    mean=fs.mean.copy(),
                    pos_std=fs.position_std(),
                    off_std=fs.offset_std(),
                )
            )
    write_trace(
        trace_path, estimator, config.n_nodes, ekf.node_dim, rows,
        master_index=config.master, meta={"scenario": config.name},
    )
    timing = _timing_stats(step_times, "per_step")
    timing["rejected_updates"] = rejected
    return timing


def _estimate_secopt(
    config: ScenarioConfig,
    entries: list[LogEntry],
    trace_path: Path,
    window_size: int | None = None,
    lam: float | None = None,
) -> dict:
    cfg = build_secopt_config(config, window_size=window_size, lam=lam)
    records = ((entry.index, entry.measurement) for entry in entries)
    estimates = run_stream(records, initial_guess(config), cfg)
    rows = [
        TraceRow(step=e.end_step, time=e.end_time, mean=pack(e.state)) for e in estimates
    ]
    write_trace(
        trace_path, "secopt", config.n_nodes, 7, rows,
        master_index=config.master,
        meta={"scenario": config.name, "window_size": cfg.window_size, "lam": cfg.lam},
    )
    timing = _timing_stats([e.wall_time for e in estimates], "per_window")
    timing["window_size"] = cfg.window_size
    timing["lam"] = cfg.lam
    timing["converged_windows"] = int(sum(1 for e in estimates if e.report.converged))
    return timing


def estimate_stage(
    config: ScenarioConfig,
    estimator: str,
    log_path: str | Path,
    trace_path: str | Path,
    window_size: int | None = None,
    lam: float | None = None,
) -> dict:
    """Run one estimator over a measurement log; returns its timing stats."""
    header, entries = read_measurement_log(log_path)
    if int(header["n_nodes"]) != config.n_nodes:
        raise ValueError(
            f"log has {header['n_nodes']} nodes but the scenario defines {config.n_nodes}"
        )
    trace_path = Path(trace_path)
    if estimator in ("secekf", "origekf"):
        return _estimate_ekf(config, estimator, entries, trace_path)
    if estimator == "secopt":
        return _estimate_secopt(config, entries, trace_path, window_size, lam)
    raise ValueError(f"unknown estimator {estimator!r}")


def _write_errors_csv(path: Path, times, localization, sync) -> None:
    n = localization.shape[1]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t"] + [f"loc_{k}" for k in range(n)] + [f"sync_{k}" for k in range(n)]
        )
        for i, t in enumerate(times):
            writer.writerow(
                [repr(float(t))]
                + [repr(float(v)) for v in localization[i]]
                + [repr(float(v)) for v in sync[i]]
            )


def evaluate_trace(config: ScenarioConfig, entries: list[LogEntry], trace_path: str | Path):
    """Error report for one trace against the log's truth snapshots."""
    header, rows = read_trace(trace_path)
    times, est_pos, est_off = trace_positions_offsets(header, rows)
    truth_times, truth_pos, truth_off = truth_arrays(entries)
    mobile = set(config.init.mobile_ids)
    align_ids = None
    if mobile:
        align_ids = np.array([k for k in range(config.n_nodes) if k not in mobile])
    report = build_report(
        times, est_pos, est_off, truth_times, truth_pos, truth_off,
        align_ids=align_ids, reference=config.master,
    )
    return header["estimator"], report


def evaluate_stage(
    config: ScenarioConfig,
    log_path: str | Path,
    trace_paths: list[str | Path],
    out_dir: str | Path,
) -> dict:
    """Per-estimator error reports, CSV series, and the summary object."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, entries = read_measurement_log(log_path)
    estimators: dict[str, dict] = {}
    for trace_path in trace_paths:
        name, report = evaluate_trace(config, entries, trace_path)
        summary = report.summary()
        mobile = config.init.mobile_ids
        if mobile:
            loc_means = report.per_node_localization_mean()
            summary["localization_m"]["mobile_mean"] = float(
                np.mean([loc_means[m] for m in mobile])
            )
        estimators[name] = summary
        _write_errors_csv(
            out_dir / f"errors-{name}.csv", report.times, report.localization, report.sync
        )
    summary = {
        "schema": SUMMARY_SCHEMA,
        "version": 1,
        "scenario": config.name,
        "n_nodes": config.n_nodes,
        "attack": config.attack.attack_type,
        "estimators": estimators,
    }
    return summary


def write_summary(summary: dict, out_dir: str | Path) -> Path:
    path = Path(out_dir) / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


def run_pipeline(
    config: ScenarioConfig,
    out_dir: str | Path,
    estimators: list[str] | None = None,
) -> tuple[dict, dict, dict]:
    """Full run: simulate+attack, estimate per estimator, evaluate, summarize.

    Estimator failures do not abort the run: the remaining artifacts are
    written and an error manifest records the tracebacks.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.save(out_dir / "config.json")
    log_path = simulate_stage(config, out_dir / "measurements.log", apply_attack=True)
    names = estimators if estimators is not None else list(config.estimators)
    timings: dict[str, dict] = {}
    failures: dict[str, str] = {}
    trace_paths = []
    for name in names:
        trace_path = out_dir / f"trace-{name}.log"
        try:
            timings[name] = estimate_stage(config, name, log_path, trace_path)
            trace_paths.append(trace_path)
        except Exception:
            failures[name] = traceback.format_exc()
    summary = evaluate_stage(config, log_path, trace_paths, out_dir)
    write_summary(summary, out_dir)
    (out_dir / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
    if failures:
        (out_dir / "error-manifest.json").write_text(
            json.dumps(failures, indent=2, sort_keys=True) + "\n"
        )
    return summary, timings, failures


def sweep_pipeline(
    config: ScenarioConfig,
    out_dir: str | Path,
    window_sizes: list[int] | None = None,
    lambdas: list[float] | None = None,
) -> dict:
    """Window-size (and optional lambda) sweep of the windowed estimator.

    All points consume the identical corrupted stream. Error is the mean
    localization error (mobile-node mean when the scenario has mobile
    nodes); runtime is the mean per-window solve wall clock.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.save(out_dir / "config.json")
    windows = window_sizes if window_sizes is not None else list(config.sweep.window_sizes)
    lams = lambdas if lambdas is not None else (list(config.sweep.lambdas) or [config.secopt.lam])
    log_path = simulate_stage(config, out_dir / "measurements.log", apply_attack=True)
    _, entries = read_measurement_log(log_path)
    points = []
    for window in windows:
        for lam in lams:
            tag = f"w{window}" + (f"-lam{lam:g}" if len(lams) > 1 else "")
            trace_path = out_dir / f"trace-secopt-{tag}.log"
            timing = _estimate_secopt(config, entries, trace_path, window_size=window, lam=lam)
            _, report = evaluate_trace(config, entries, trace_path)
            loc_means = report.per_node_localization_mean()
            mobile = config.init.mobile_ids
            error = float(np.mean([loc_means[m] for m in mobile])) if mobile else float(loc_means.mean())
            points.append(
                {
                    "window_size": window,
                    "lam": lam,
                    "error_m": error,
                    "localization_mean_m": float(loc_means.mean()),
                    "window_solve_mean_s": timing["mean_s"],
                    "window_solve_total_s": timing["total_s"],
                    "windows": timing["count"],
                }
            )
    sweep = {
        "schema": "secstate.sweep",
        "version": 1,
        "scenario": config.name,
        "points": points,
    }
    (out_dir / "sweep.json").write_text(json.dumps(sweep, indent=2, sort_keys=True) + "\n")
    with (out_dir / "sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["window_size", "lam", "error_m", "localization_mean_m",
             "window_solve_mean_s", "window_solve_total_s", "windows"]
        )
        for p in points:
            writer.writerow([p[k] for k in
                             ("window_size", "lam", "error_m", "localization_mean_m",
                              "window_solve_mean_s", "window_solve_total_s", "windows")])
    return sweep
