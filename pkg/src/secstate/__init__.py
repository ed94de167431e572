"""Attack-resilient localization and clock synchronization toolkit.

Simulates networks with pairwise UWB-style measurements (counter differences
and two-way ranges), corrupts them with configurable attack generators, and
recovers node positions, clock parameters, and the injected attack values
with two estimators: an attack-augmented extended Kalman filter and a
windowed L1-regularized maximum-likelihood solver.
"""

from .attacks import AttackConfig, AttackInjector, AttackType
from .config import ScenarioConfig
from .core import (
    Measurement,
    MeasurementKind,
    NetworkState,
    NodeState,
    Topology,
    measure_fn,
    measure_jacobian,
    pack,
    unpack,
)
from .ekf import Ekf, EkfConfig, FilterState
from .metrics import procrustes_align
from .presets import PRESETS, preset
from .simulate import ClockModel, NoiseConfig, Schedule, Simulator
from .window_opt import MeasurementWindow, SecOptConfig, objective, run_stream, solve

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackInjector",
    "AttackType",
    "ClockModel",
    "Ekf",
    "EkfConfig",
    "FilterState",
    "Measurement",
    "MeasurementKind",
    "MeasurementWindow",
    "NetworkState",
    "NodeState",
    "NoiseConfig",
    "PRESETS",
    "ScenarioConfig",
    "Schedule",
    "SecOptConfig",
    "Simulator",
    "Topology",
    "measure_fn",
    "measure_jacobian",
    "objective",
    "pack",
    "preset",
    "procrustes_align",
    "run_stream",
    "solve",
    "unpack",
]
