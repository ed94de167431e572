"""Ground-truth evolution, pair scheduling, and noisy measurement synthesis.

The simulator advances clocks with a first-order affine model (offsets
integrate bias, bias random-walks), moves nodes along their motion models,
and emits one pair visit per event tick. Each visit produces one measurement
per enabled kind, all sharing the event timestamp. A schedule cycle covers
every directed link exactly once, so with all noise disabled and static
motion the stream is exactly periodic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Sequence, Union

import numpy as np

from .core import (
    Measurement,
    MeasurementKind,
    NetworkState,
    NodeState,
    Topology,
    measure_fn,
)

DEFAULT_KINDS = (
    MeasurementKind.COUNTER_DIFF,
    MeasurementKind.TWR_SINGLE,
    MeasurementKind.TWR_DOUBLE,
)


@dataclass(frozen=True)
class ClockModel:
    """First-order affine clock: offset integrates bias plus process noise.

    ``bias_random_walk_std`` is per sqrt-second; ``offset_process_noise_std``
    is applied once per evolution step.
    """

    initial_offset: float = 0.0
    initial_bias: float = 0.0
    bias_random_walk_std: float = 0.0
    offset_process_noise_std: float = 0.0

    def __post_init__(self) -> None:
        if self.bias_random_walk_std < 0 or self.offset_process_noise_std < 0:
            raise ValueError("noise stds must be non-negative")


@dataclass(frozen=True)
class StaticMotion:
    position: tuple[float, float, float]

    def position_at(self, t: float) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class ConstantVelocityMotion:
    start: tuple[float, float, float]
    velocity: tuple[float, float, float]

    def position_at(self, t: float) -> np.ndarray:
        return np.asarray(self.start, dtype=float) + t * np.asarray(self.velocity, dtype=float)


@dataclass(frozen=True)
class WaypointMotion:
    """Piecewise-linear path through (time, position) waypoints, clamped at the ends."""

    times: tuple[float, ...]
    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.points) or len(self.times) < 2:
            raise ValueError("need at least two waypoints with matching times")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("waypoint times must be strictly increasing")

    def position_at(self, t: float) -> np.ndarray:
        times = np.asarray(self.times)
        pts = np.asarray(self.points, dtype=float)
        return np.array([np.interp(t, times, pts[:, axis]) for axis in range(3)])


MotionModel = Union[StaticMotion, ConstantVelocityMotion, WaypointMotion]


@dataclass(frozen=True)
class NoiseConfig:
    """Measurement noise stds: counter difference (s), single / double range (m)."""

    sigma_counter: float = 1e-8
    sigma_single: float = 0.30
    sigma_double: float = 0.10

    def __post_init__(self) -> None:
        if min(self.sigma_counter, self.sigma_single, self.sigma_double) < 0:
            raise ValueError("noise stds must be non-negative")

    def sigma_for(self, kind: MeasurementKind) -> float:
        if kind is MeasurementKind.COUNTER_DIFF:
            return self.sigma_counter
        if kind is MeasurementKind.TWR_SINGLE:
            return self.sigma_single
        return self.sigma_double


class Schedule:
    """Deterministic round-robin over directed links.

    One cycle visits every directed link ``(k, j in N_k)`` exactly once,
    interleaved so each node initiates at most once per round. The per-node
    neighbor order is a seeded permutation, so the cycle is reproducible.
    """

    def __init__(self, topology: Topology, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        per_node = [list(rng.permutation(list(nbrs))) for nbrs in topology.neighbors]
        cycle: list[tuple[int, int]] = []
        for rnd in range(max(len(p) for p in per_node)):
            for k, order in enumerate(per_node):
                if rnd < len(order):
                    cycle.append((k, int(order[rnd])))
        self.cycle: tuple[tuple[int, int], ...] = tuple(cycle)

    @property
    def cycle_length(self) -> int:
        return len(self.cycle)

    def pair_at(self, step: int) -> tuple[int, int]:
        return self.cycle[step % len(self.cycle)]


def next_pair(schedule: Schedule, step: int) -> tuple[int, int]:
    """Initiator/responder pair visited at event ``step``."""
    return schedule.pair_at(step)


def evolve_truth(
    truth: NetworkState,
    dt: float,
    clocks: Sequence[ClockModel],
    motions: Sequence[MotionModel],
    rng: np.random.Generator,
    t_next: float,
) -> NetworkState:
    """Advance ground truth by ``dt`` seconds to absolute time ``t_next``.

    Offsets integrate bias, bias random-walks, positions follow the motion
    models; the master node stays pinned at exactly zero offset and bias.
    Noise draws are consumed for every node (master draws are discarded) so
    the stream is reproducible independent of which node is master.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    nodes = []
    for k, node in enumerate(truth.nodes):
        offset_noise = rng.normal(0.0, clocks[k].offset_process_noise_std)
        bias_noise = rng.normal(0.0, clocks[k].bias_random_walk_std * np.sqrt(dt))
        if k == truth.master_index:
            offset, bias = 0.0, 0.0
        else:
            offset = node.offset + node.bias * dt + offset_noise
            bias = node.bias + bias_noise
        nodes.append(
            NodeState(position=motions[k].position_at(t_next), offset=offset, bias=bias)
        )
    return NetworkState(nodes=tuple(nodes), master_index=truth.master_index)


def synth_measurement(
    truth: NetworkState,
    k: int,
    j: int,
    kind: MeasurementKind,
    noise: NoiseConfig,
    rng: np.random.Generator,
    t: float,
    include_propagation: bool = True,
) -> Measurement:
    """Attack-free noisy measurement between ``k`` (initiator) and ``j``."""
    clean_k = replace(truth.nodes[k], attack_offset=0.0, attack_distance=0.0)
    value = measure_fn(kind, clean_k, truth.nodes[j], include_propagation)
    value += rng.normal(0.0, noise.sigma_for(kind))
    return Measurement(time=t, initiator=k, responder=j, kind=kind, value=value)


@dataclass(frozen=True)
class SimRecord:
    """One emitted measurement plus the truth snapshot at its event."""

    index: int
    measurement: Measurement
    truth: NetworkState


def initial_truth(
    clocks: Sequence[ClockModel],
    motions: Sequence[MotionModel],
    master_index: int = 0,
) -> NetworkState:
    nodes = []
    for k, (clock, motion) in enumerate(zip(clocks, motions)):
        if k == master_index:
            offset, bias = 0.0, 0.0
        else:
            offset, bias = clock.initial_offset, clock.initial_bias
        nodes.append(NodeState(position=motion.position_at(0.0), offset=offset, bias=bias))
    return NetworkState(nodes=tuple(nodes), master_index=master_index)


class Simulator:
    """Generates the attack-free measurement stream for one scenario."""

    def __init__(
        self,
        topology: Topology,
        clocks: Sequence[ClockModel],
        motions: Sequence[MotionModel],
        noise: NoiseConfig,
        kinds: Sequence[MeasurementKind] = DEFAULT_KINDS,
        event_interval: float = 0.01,
        include_propagation: bool = True,
        master_index: int = 0,
        seed: int = 0,
        schedule_seed: int = 0,
    ) -> None:
        if event_interval <= 0:
            raise ValueError("event_interval must be positive")
        if len(clocks) != topology.n or len(motions) != topology.n:
            raise ValueError("clocks/motions must match the topology node count")
        self.topology = topology
        self.clocks = tuple(clocks)
        self.motions = tuple(motions)
        self.noise = noise
        self.kinds = tuple(kinds)
        self.event_interval = event_interval
        self.include_propagation = include_propagation
        self.master_index = master_index
        self.seed = seed
        self.schedule = Schedule(topology, seed=schedule_seed)

    def records(self, duration: float) -> Iterator[SimRecord]:
        """Stream of measurements over ``duration`` seconds of simulated time."""
        rng = np.random.default_rng(self.seed)
        truth = initial_truth(self.clocks, self.motions, self.master_index)
        n_events = int(round(duration / self.event_interval))
        index = 0
        for event in range(n_events):
            t = (event + 1) * self.event_interval
            truth = evolve_truth(
                truth, self.event_interval, self.clocks, self.motions, rng, t_next=t
            )
            k, j = self.schedule.pair_at(event)
            for kind in self.kinds:
                measurement = synth_measurement(
                    truth, k, j, kind, self.noise, rng, t, self.include_propagation
                )
                yield SimRecord(index=index, measurement=measurement, truth=truth)
                index += 1
