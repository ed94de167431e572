"""Scenario configuration: schema, strict validation, JSON (de)serialization.

A scenario fully describes one experiment: arena, per-node motion and clock
models, topology, measurement kinds/noise, the attack, estimator settings,
and the named seeds all randomness flows from. Unknown keys anywhere are
rejected with the offending path, so typos fail loudly before a run starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacks import AttackType
from .core import MeasurementKind
from .simulate import (
    ClockModel,
    ConstantVelocityMotion,
    MotionModel,
    StaticMotion,
    WaypointMotion,
)

SCHEMA_VERSION = 1

ESTIMATOR_NAMES = ("secekf", "secopt", "origekf")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the field path."""


def _check_keys(d: dict, path: str, required: set[str], optional: set[str] = frozenset()) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object, got {type(d).__name__}")
    unknown = set(d) - required - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{path}: missing required keys {sorted(missing)}")


def _number(d: dict, path: str, key: str, default=None, minimum=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {value}")
    return float(value)


def _vec3(value, path: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{path}: expected a 3-vector")
    return tuple(float(x) for x in value)


@dataclass
class ArenaConfig:
    bounds_min: tuple[float, float, float] = (0.0, 0.0, 0.0)
    bounds_max: tuple[float, float, float] = (10.0, 9.0, 3.0)

    @property
    def diagonal(self) -> float:
        lo = np.asarray(self.bounds_min)
        hi = np.asarray(self.bounds_max)
        return float(np.linalg.norm(hi - lo))

    @property
    def center(self) -> tuple[float, float, float]:
        lo = np.asarray(self.bounds_min)
        hi = np.asarray(self.bounds_max)
        return tuple(float(x) for x in (lo + hi) / 2.0)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.bounds_min) and np.all(p <= self.bounds_max))


@dataclass
class NodeSpec:
    node_id: int
    motion: MotionModel
    clock: ClockModel


@dataclass
class TopologySpec:
    kind: str = "full"  # full | k_nearest | edges
    k: int | None = None
    edges: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class NoiseSpec:
    sigma_d: float = 1e-8
    sigma_r: float = 0.30
    sigma_R: float = 0.10


@dataclass
class AttackSpec:
    attack_type: str = AttackType.NONE
    magnitude_scale: float = 100e-6
    constants: dict[int, float] = field(default_factory=dict)


@dataclass
class EkfSettings:
    q_position: float = 0.05
    q_offset: float = 1e-16
    q_bias: float = 1e-16
    q_attack_offset: float = 1e-10
    q_attack_distance: float = 1.0
    p0_position: float = 0.25
    p0_offset: float = 1e-8
    p0_bias: float = 1e-10
    p0_attack_offset: float = 1e-8
    p0_attack_distance: float = 25.0
    q_position_mobile: float = 2.0
    p0_position_mobile: float = 25.0
    innovation_gate: float | None = None
    trace_stride: int = 5


@dataclass
class SecOptSettings:
    lam: float = 1e-2
    window_size: int = 300
    stride: int | None = None
    max_iterations: int = 100
    step_tol: float = 1e-8
    l1_epsilon: float = 1e-4
    warm_start: bool = True
    estimate_attacks: bool = True
    split_subproblems: bool = False


@dataclass
class InitSettings:
    anchor_position_std: float = 0.5
    mobile_ids: list[int] = field(default_factory=list)


@dataclass
class Seeds:
    sim: int = 1
    attack: int = 2
    schedule: int = 3
    estimator_init: int = 4


@dataclass
class SweepSettings:
    window_sizes: list[int] = field(default_factory=lambda: [50, 100, 200, 300])
    lambdas: list[float] = field(default_factory=list)


@dataclass
class ScenarioConfig:
    name: str
    nodes: list[NodeSpec]
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    duration: float = 60.0
    event_interval: float = 0.01
    kinds: tuple[MeasurementKind, ...] = (
        MeasurementKind.COUNTER_DIFF,
        MeasurementKind.TWR_SINGLE,
        MeasurementKind.TWR_DOUBLE,
    )
    master: int = 0
    topology: TopologySpec = field(default_factory=TopologySpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    attack: AttackSpec = field(default_factory=AttackSpec)
    estimators: list[str] = field(default_factory=lambda: ["secekf", "origekf"])
    ekf: EkfSettings = field(default_factory=EkfSettings)
    secopt: SecOptSettings = field(default_factory=SecOptSettings)
    init: InitSettings = field(default_factory=InitSettings)
    include_propagation: bool = True
    seeds: Seeds = field(default_factory=Seeds)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def validate(self) -> None:
        n = self.n_nodes
        if n < 2:
            raise ConfigError("nodes: need at least two nodes")
        ids = [spec.node_id for spec in self.nodes]
        if ids != list(range(n)):
            raise ConfigError(f"nodes: ids must be exactly 0..{n - 1} in order, got {ids}")
        if not 0 <= self.master < n:
            raise ConfigError(f"master: {self.master} not a defined node id")
        if self.duration <= 0 or self.event_interval <= 0:
            raise ConfigError("duration and event_interval must be positive")
        if not self.kinds:
            raise ConfigError("kinds: at least one measurement kind required")
        for name in self.estimators:
            if name not in ESTIMATOR_NAMES:
                raise ConfigError(
                    f"estimators: unknown estimator {name!r} (choose from {ESTIMATOR_NAMES})"
                )
        if self.attack.attack_type not in AttackType.ALL:
            raise ConfigError(f"attack.type: unknown type {self.attack.attack_type!r}")
        for node in self.attack.constants:
            if not 0 <= node < n:
                raise ConfigError(f"attack.constants: undefined node id {node}")
        for mobile in self.init.mobile_ids:
            if not 0 <= mobile < n:
                raise ConfigError(f"init.mobile_ids: undefined node id {mobile}")
        if self.topology.kind == "k_nearest" and not self.topology.k:
            raise ConfigError("topology.k: required for k_nearest")
        if self.topology.kind == "edges":
            for a, b in self.topology.edges:
                if not (0 <= a < n and 0 <= b < n):
                    raise ConfigError(f"topology.edges: undefined node id in ({a}, {b})")
        for spec in self.nodes:
            path = f"nodes[{spec.node_id}].motion"
            if isinstance(spec.motion, StaticMotion):
                if not self.arena.contains(spec.motion.position):
                    raise ConfigError(f"{path}: position outside arena bounds")
            elif isinstance(spec.motion, WaypointMotion):
                for point in spec.motion.points:
                    if not self.arena.contains(point):
                        raise ConfigError(f"{path}: waypoint outside arena bounds")
            elif isinstance(spec.motion, ConstantVelocityMotion):
                for t in (0.0, self.duration):
                    if not self.arena.contains(spec.motion.position_at(t)):
                        raise ConfigError(f"{path}: path leaves arena within the run")

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "arena": {"min": list(self.arena.bounds_min), "max": list(self.arena.bounds_max)},
            "duration": self.duration,
            "event_interval": self.event_interval,
            "kinds": [k.value for k in self.kinds],
            "master": self.master,
            "include_propagation": self.include_propagation,
            "nodes": [_node_to_dict(spec) for spec in self.nodes],
            "topology": _topology_to_dict(self.topology),
            "noise": {
                "sigma_d": self.noise.sigma_d,
                "sigma_r": self.noise.sigma_r,
                "sigma_R": self.noise.sigma_R,
            },
            "attack": {
                "type": self.attack.attack_type,
                "magnitude_scale": self.attack.magnitude_scale,
                "constants": {str(k): v for k, v in sorted(self.attack.constants.items())},
            },
            "estimators": list(self.estimators),
            "ekf": {
                "q_position": self.ekf.q_position,
                "q_offset": self.ekf.q_offset,
                "q_bias": self.ekf.q_bias,
                "q_attack_offset": self.ekf.q_attack_offset,
                "q_attack_distance": self.ekf.q_attack_distance,
                "p0_position": self.ekf.p0_position,
                "p0_offset": self.ekf.p0_offset,
                "p0_bias": self.ekf.p0_bias,
                "p0_attack_offset": self.ekf.p0_attack_offset,
                "p0_attack_distance": self.ekf.p0_attack_distance,
                "q_position_mobile": self.ekf.q_position_mobile,
                "p0_position_mobile": self.ekf.p0_position_mobile,
                "innovation_gate": self.ekf.innovation_gate,
                "trace_stride": self.ekf.trace_stride,
            },
            "secopt": {
                "lam": self.secopt.lam,
                "window_size": self.secopt.window_size,
                "stride": self.secopt.stride,
                "max_iterations": self.secopt.max_iterations,
                "step_tol": self.secopt.step_tol,
                "l1_epsilon": self.secopt.l1_epsilon,
                "warm_start": self.secopt.warm_start,
                "estimate_attacks": self.secopt.estimate_attacks,
                "split_subproblems": self.secopt.split_subproblems,
            },
            "init": {
                "anchor_position_std": self.init.anchor_position_std,
                "mobile_ids": list(self.init.mobile_ids),
            },
            "seeds": {
                "sim": self.seeds.sim,
                "attack": self.seeds.attack,
                "schedule": self.seeds.schedule,
                "estimator_init": self.seeds.estimator_init,
            },
            "sweep": {
                "window_sizes": list(self.sweep.window_sizes),
                "lambdas": list(self.sweep.lambdas),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        _check_keys(
            data,
            "config",
            required={"schema_version", "name", "nodes"},
            optional={
                "arena", "duration", "event_interval", "kinds", "master", "topology",
                "noise", "attack", "estimators", "ekf", "secopt", "init",
                "include_propagation", "seeds", "sweep",
            },
        )
        if data["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version: expected {SCHEMA_VERSION}, got {data['schema_version']!r}"
            )
        arena = _arena_from_dict(data.get("arena", {}))
        kinds = []
        for value in data.get("kinds", ["d", "r", "R"]):
            try:
                kinds.append(MeasurementKind(value))
            except ValueError:
                raise ConfigError(f"kinds: unknown measurement kind {value!r}") from None
        config = cls(
            name=str(data["name"]),
            nodes=[_node_from_dict(d, i) for i, d in enumerate(data["nodes"])],
            arena=arena,
            duration=_number(data, "config", "duration", default=60.0, minimum=0.0),
            event_interval=_number(data, "config", "event_interval", default=0.01, minimum=0.0),
            kinds=tuple(kinds),
            master=int(data.get("master", 0)),
            topology=_topology_from_dict(data.get("topology", {"type": "full"})),
            noise=_noise_from_dict(data.get("noise", {})),
            attack=_attack_from_dict(data.get("attack", {})),
            estimators=list(data.get("estimators", ["secekf", "origekf"])),
            ekf=_ekf_from_dict(data.get("ekf", {})),
            secopt=_secopt_from_dict(data.get("secopt", {})),
            init=_init_from_dict(data.get("init", {})),
            include_propagation=bool(data.get("include_propagation", True)),
            seeds=_seeds_from_dict(data.get("seeds", {})),
            sweep=_sweep_from_dict(data.get("sweep", {})),
        )
        config.validate()
        return config

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data)


def _node_to_dict(spec: NodeSpec) -> dict:
    motion = spec.motion
    if isinstance(motion, StaticMotion):
        motion_d = {"type": "static", "position": list(motion.position)}
    elif isinstance(motion, ConstantVelocityMotion):
        motion_d = {
            "type": "constant_velocity",
            "start": list(motion.start),
            "velocity": list(motion.velocity),
        }
    elif isinstance(motion, WaypointMotion):
        motion_d = {
            "type": "waypoints",
            "times": list(motion.times),
            "points": [list(p) for p in motion.points],
        }
    else:
        raise ConfigError(f"nodes[{spec.node_id}].motion: unsupported model {motion!r}")
    return {
        "id": spec.node_id,
        "motion": motion_d,
        "clock": {
            "initial_offset": spec.clock.initial_offset,
            "initial_bias": spec.clock.initial_bias,
            "bias_random_walk_std": spec.clock.bias_random_walk_std,
            "offset_process_noise_std": spec.clock.offset_process_noise_std,
        },
    }


def _node_from_dict(d: dict, position_in_list: int) -> NodeSpec:
    path = f"nodes[{position_in_list}]"
    _check_keys(d, path, required={"id", "motion"}, optional={"clock"})
    motion_d = d["motion"]
    mpath = f"{path}.motion"
    _check_keys(
        motion_d, mpath, required={"type"},
        optional={"position", "start", "velocity", "times", "points"},
    )
    mtype = motion_d["type"]
    if mtype == "static":
        motion: MotionModel = StaticMotion(position=_vec3(motion_d.get("position"), mpath))
    elif mtype == "constant_velocity":
        motion = ConstantVelocityMotion(
            start=_vec3(motion_d.get("start"), mpath),
            velocity=_vec3(motion_d.get("velocity"), mpath),
        )
    elif mtype == "waypoints":
        times = motion_d.get("times")
        points = motion_d.get("points")
        if not isinstance(times, list) or not isinstance(points, list):
            raise ConfigError(f"{mpath}: waypoints need 'times' and 'points' lists")
        try:
            motion = WaypointMotion(
                times=tuple(float(t) for t in times),
                points=tuple(_vec3(p, mpath) for p in points),
            )
        except ValueError as exc:
            raise ConfigError(f"{mpath}: {exc}") from exc
    else:
        raise ConfigError(f"{mpath}.type: unknown motion type {mtype!r}")
    clock_d = d.get("clock", {})
    cpath = f"{path}.clock"
    _check_keys(
        clock_d, cpath, required=set(),
        optional={"initial_offset", "initial_bias", "bias_random_walk_std",
                  "offset_process_noise_std"},
    )
    clock = ClockModel(
        initial_offset=_number(clock_d, cpath, "initial_offset", default=0.0),
        initial_bias=_number(clock_d, cpath, "initial_bias", default=0.0),
        bias_random_walk_std=_number(clock_d, cpath, "bias_random_walk_std", default=0.0, minimum=0.0),
        offset_process_noise_std=_number(
            clock_d, cpath, "offset_process_noise_std", default=0.0, minimum=0.0
        ),
    )
    return NodeSpec(node_id=int(d["id"]), motion=motion, clock=clock)


def _arena_from_dict(d: dict) -> ArenaConfig:
    _check_keys(d, "arena", required=set(), optional={"min", "max"})
    return ArenaConfig(
        bounds_min=_vec3(d.get("min", [0.0, 0.0, 0.0]), "arena.min"),
        bounds_max=_vec3(d.get("max", [10.0, 9.0, 3.0]), "arena.max"),
    )


def _topology_to_dict(spec: TopologySpec) -> dict:
    if spec.kind == "full":
        return {"type": "full"}
    if spec.kind == "k_nearest":
        return {"type": "k_nearest", "k": spec.k}
    return {"type": "edges", "edges": [list(edge) for edge in spec.edges]}


def _topology_from_dict(d: dict) -> TopologySpec:
    _check_keys(d, "topology", required={"type"}, optional={"k", "edges"})
    kind = d["type"]
    if kind == "full":
        return TopologySpec(kind="full")
    if kind == "k_nearest":
        return TopologySpec(kind="k_nearest", k=int(_number(d, "topology", "k", minimum=1)))
    if kind == "edges":
        edges = d.get("edges")
        if not isinstance(edges, list):
            raise ConfigError("topology.edges: required list of [a, b] pairs")
        return TopologySpec(
            kind="edges", edges=[(int(a), int(b)) for a, b in edges]
        )
    raise ConfigError(f"topology.type: unknown type {kind!r}")


def _noise_from_dict(d: dict) -> NoiseSpec:
    _check_keys(d, "noise", required=set(), optional={"sigma_d", "sigma_r", "sigma_R"})
    return NoiseSpec(
        sigma_d=_number(d, "noise", "sigma_d", default=1e-8, minimum=0.0),
        sigma_r=_number(d, "noise", "sigma_r", default=0.30, minimum=0.0),
        sigma_R=_number(d, "noise", "sigma_R", default=0.10, minimum=0.0),
    )


def _attack_from_dict(d: dict) -> AttackSpec:
    _check_keys(d, "attack", required=set(), optional={"type", "magnitude_scale", "constants"})
    constants_d = d.get("constants", {})
    if not isinstance(constants_d, dict):
        raise ConfigError("attack.constants: expected an object of node -> seconds")
    constants = {}
    for key, value in constants_d.items():
        try:
            constants[int(key)] = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"attack.constants.{key}: invalid entry {value!r}") from None
    return AttackSpec(
        attack_type=str(d.get("type", AttackType.NONE)),
        magnitude_scale=_number(d, "attack", "magnitude_scale", default=100e-6, minimum=0.0),
        constants=constants,
    )


def _ekf_from_dict(d: dict) -> EkfSettings:
    optional = {
        "q_position", "q_offset", "q_bias", "q_attack_offset", "q_attack_distance",
        "p0_position", "p0_offset", "p0_bias", "p0_attack_offset", "p0_attack_distance",
        "q_position_mobile", "p0_position_mobile", "innovation_gate", "trace_stride",
    }
    _check_keys(d, "ekf", required=set(), optional=optional)
    settings = EkfSettings()
    for key in optional - {"innovation_gate", "trace_stride"}:
        setattr(settings, key, _number(d, "ekf", key, default=getattr(settings, key), minimum=0.0))
    if "innovation_gate" in d and d["innovation_gate"] is not None:
        settings.innovation_gate = _number(d, "ekf", "innovation_gate", minimum=0.0)
    if "trace_stride" in d:
        settings.trace_stride = int(_number(d, "ekf", "trace_stride", minimum=1))
    return settings


def _secopt_from_dict(d: dict) -> SecOptSettings:
    optional = {
        "lam", "window_size", "stride", "max_iterations", "step_tol", "l1_epsilon",
        "warm_start", "estimate_attacks", "split_subproblems",
    }
    _check_keys(d, "secopt", required=set(), optional=optional)
    settings = SecOptSettings()
    settings.lam = _number(d, "secopt", "lam", default=settings.lam, minimum=0.0)
    settings.window_size = int(_number(d, "secopt", "window_size", default=settings.window_size, minimum=1))
    if d.get("stride") is not None:
        settings.stride = int(_number(d, "secopt", "stride", minimum=1))
    settings.max_iterations = int(
        _number(d, "secopt", "max_iterations", default=settings.max_iterations, minimum=1)
    )
    settings.step_tol = _number(d, "secopt", "step_tol", default=settings.step_tol, minimum=0.0)
    settings.l1_epsilon = _number(d, "secopt", "l1_epsilon", default=settings.l1_epsilon, minimum=0.0)
    settings.warm_start = bool(d.get("warm_start", settings.warm_start))
    settings.estimate_attacks = bool(d.get("estimate_attacks", settings.estimate_attacks))
    settings.split_subproblems = bool(d.get("split_subproblems", settings.split_subproblems))
    return settings


def _init_from_dict(d: dict) -> InitSettings:
    _check_keys(d, "init", required=set(), optional={"anchor_position_std", "mobile_ids"})
    return InitSettings(
        anchor_position_std=_number(d, "init", "anchor_position_std", default=0.5, minimum=0.0),
        mobile_ids=[int(x) for x in d.get("mobile_ids", [])],
    )


def _seeds_from_dict(d: dict) -> Seeds:
    _check_keys(d, "seeds", required=set(), optional={"sim", "attack", "schedule", "estimator_init"})
    return Seeds(
        sim=int(d.get("sim", 1)),
        attack=int(d.get("attack", 2)),
        schedule=int(d.get("schedule", 3)),
        estimator_init=int(d.get("estimator_init", 4)),
    )


def _sweep_from_dict(d: dict) -> SweepSettings:
    _check_keys(d, "sweep", required=set(), optional={"window_sizes", "lambdas"})
    return SweepSettings(
        window_sizes=[int(x) for x in d.get("window_sizes", [50, 100, 200, 300])],
        lambdas=[float(x) for x in d.get("lambdas", [])],
    )
