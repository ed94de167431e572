"""Measurement corruption: five additive attack flavors as a stream transformer.

Distance attacks (types 1-3) draw a fresh value per range measurement from a
phase-switching generator (uniform / normal / Pareto with parameters that
change at one- and two-thirds of the attack session). Time attacks (types
4-5) add per-node constants or fresh uniform draws to counter differences;
the master node's time is never attacked.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Measurement, MeasurementKind

PARETO_SHAPE = 3.0


class AttackConfigError(ValueError):
    """Invalid attacker configuration."""


class ConfigWarning(UserWarning):
    """Non-fatal configuration concern (e.g. implausible attack magnitudes)."""


class AttackType:
    NONE = "none"
    T1_UNIFORM = "t1_uniform"
    T2_NORMAL = "t2_normal"
    T3_PARETO = "t3_pareto"
    T4_CONST_TIME = "t4_const_time"
    T5_UNIFORM_TIME = "t5_uniform_time"

    ALL = (NONE, T1_UNIFORM, T2_NORMAL, T3_PARETO, T4_CONST_TIME, T5_UNIFORM_TIME)
    DISTANCE = (T1_UNIFORM, T2_NORMAL, T3_PARETO)
    TIME = (T4_CONST_TIME, T5_UNIFORM_TIME)


def _phase_params(current_t: float, total_t: float) -> tuple[float, float]:
    """(shift, pareto_scale) for the attack session phase containing ``current_t``.

    Exact phase boundaries fall through to the last phase, matching the
    generator's strict inequalities.
    """
    if not 0.0 <= current_t <= total_t:
        raise AttackConfigError(f"current_t {current_t} outside [0, {total_t}]")
    if current_t < total_t / 3.0:
        return 2.0, 3.0
    if total_t / 3.0 < current_t < 2.0 * total_t / 3.0:
        return 6.0, 6.5
    return 1.0, 2.0


def distance_attack_value(
    attack_type: str, current_t: float, total_t: float, rng: np.random.Generator
) -> float:
    """Fresh distance corruption (meters) for one range measurement.

    Type 1: ``2 * (U(0,1) + shift)``; type 2: ``2 * N(0,1) + shift``;
    type 3: Pareto via inverse CDF ``scale / U^(1/shape)`` with shape 3.
    """
    shift, pareto_scale = _phase_params(current_t, total_t)
    if attack_type == AttackType.T1_UNIFORM:
        return 2.0 * (rng.uniform() + shift)
    if attack_type == AttackType.T2_NORMAL:
        return 2.0 * rng.standard_normal() + shift
    if attack_type == AttackType.T3_PARETO:
        u = 1.0 - rng.uniform()  # (0, 1]: keeps the inverse CDF finite
        return pareto_scale / u ** (1.0 / PARETO_SHAPE)
    raise AttackConfigError(f"unknown distance attack type: {attack_type!r}")


def time_attack_value(
    attack_type: str,
    node: int,
    constants: dict[int, float],
    magnitude_scale: float,
    master_index: int,
    rng: np.random.Generator,
) -> float:
    """Time corruption (seconds) added by ``node`` to one counter difference."""
    if node == master_index:
        raise AttackConfigError("the master node's time is never attacked")
    if attack_type == AttackType.T4_CONST_TIME:
        return constants[node]
    if attack_type == AttackType.T5_UNIFORM_TIME:
        return rng.uniform(0.0, 2.0 * magnitude_scale)
    raise AttackConfigError(f"unknown time attack type: {attack_type!r}")


@dataclass
class AttackConfig:
    """Attack session description.

    For type 4, ``constants`` may list explicit per-node values (seconds);
    otherwise constants are drawn once per node as
    ``N(scale, (scale/10)^2)`` clamped non-negative. ``magnitude_scale`` also
    sets the half-width of type 5's ``U(0, 2*scale)`` draws.
    """

    attack_type: str = AttackType.NONE
    total_time: float = 60.0
    magnitude_scale: float = 100e-6
    constants: dict[int, float] = field(default_factory=dict)
    seed: int = 0
    master_index: int = 0

    def __post_init__(self) -> None:
        if self.attack_type not in AttackType.ALL:
            raise AttackConfigError(f"unknown attack type: {self.attack_type!r}")
        if self.total_time <= 0:
            raise AttackConfigError("total_time must be positive")
        if self.magnitude_scale < 0:
            raise AttackConfigError("magnitude_scale must be non-negative")
        if any(v < 0 for v in self.constants.values()):
            raise AttackConfigError("per-node constants must be non-negative")
        if self.constants.get(self.master_index, 0.0) != 0.0:
            raise AttackConfigError("the master node's time is never attacked")


def validate_attack_magnitudes(config: AttackConfig, arena_diagonal: float) -> list[str]:
    """Smart-attacker sanity check: distance corruption should stay plausible.

    Returns (and emits as :class:`ConfigWarning`) one message per attack
    phase whose nominal maximum exceeds the arena diagonal. Maxima are exact
    for type 1, three-sigma for type 2, and the 95th percentile for type 3.
    """
    messages: list[str] = []
    if config.attack_type not in AttackType.DISTANCE:
        return messages
    for phase, (shift, scale) in enumerate(((2.0, 3.0), (6.0, 6.5), (1.0, 2.0)), start=1):
        if config.attack_type == AttackType.T1_UNIFORM:
            peak = 2.0 * (shift + 1.0)
        elif config.attack_type == AttackType.T2_NORMAL:
            peak = shift + 6.0
        else:
            peak = scale * 20.0 ** (1.0 / PARETO_SHAPE)
        if peak > arena_diagonal:
            messages.append(
                f"{config.attack_type} phase {phase}: nominal max {peak:.2f} m exceeds "
                f"arena diagonal {arena_diagonal:.2f} m (easily flagged by thresholds)"
            )
    for message in messages:
        warnings.warn(message, ConfigWarning, stacklevel=2)
    return messages


class AttackInjector:
    """Corrupts a measurement stream in place of the wire.

    Holds the per-node constant table (type 4) and the RNG; one injector per
    consumer, consumed in stream order for reproducibility.
    """

    def __init__(self, config: AttackConfig, n_nodes: int) -> None:
        self.config = config
        self.n_nodes = n_nodes
        self.rng = np.random.default_rng(config.seed)
        self.constants: dict[int, float] = {}
        if config.attack_type == AttackType.T4_CONST_TIME:
            for node in range(n_nodes):
                if node == config.master_index:
                    self.constants[node] = 0.0
                elif node in config.constants:
                    self.constants[node] = config.constants[node]
                else:
                    draw = self.rng.normal(config.magnitude_scale, config.magnitude_scale / 10.0)
                    self.constants[node] = max(draw, 0.0)

    def corrupt(self, measurement: Measurement) -> Measurement:
        """Return the attacked copy of ``measurement`` (metadata preserved)."""
        kind = measurement.kind
        attack_type = self.config.attack_type
        if attack_type == AttackType.NONE:
            return measurement
        if attack_type in AttackType.DISTANCE and kind.is_range:
            value = distance_attack_value(
                attack_type, measurement.time, self.config.total_time, self.rng
            )
            return replace(measurement, value=measurement.value + value)
        if attack_type in AttackType.TIME and kind is MeasurementKind.COUNTER_DIFF:
            if measurement.initiator == self.config.master_index:
                return measurement
            value = time_attack_value(
                attack_type,
                measurement.initiator,
                self.constants,
                self.config.magnitude_scale,
                self.config.master_index,
                self.rng,
            )
            return replace(measurement, value=measurement.value + value)
        return measurement


def corrupt(measurement: Measurement, injector: AttackInjector) -> Measurement:
    return injector.corrupt(measurement)
