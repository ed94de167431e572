"""Windowed maximum-likelihood estimation with an L1 penalty on attack states.

Solves, per sliding window of L measurements, a nonlinear least-squares
problem over one state per node (static-within-window) with residuals scaled
by the measurement stds and an L1 term on all non-master attack values. The
solver is a damped Gauss-Newton iteration; the L1 term is smoothed as
``sqrt(a^2 + eps^2) - eps`` so a single smooth solver handles the whole
objective (the shift keeps the penalty exactly zero at a = 0).

The master node's offset and bias are excluded from the decision variables.
Streams are processed window by window, warm-starting each solve from the
previous estimate.
"""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DEFAULT_BIAS_BOUND,
    DegenerateGeometryError,
    FIELD_INDEX,
    Measurement,
    MeasurementKind,
    NODE_DIM,
    NetworkState,
    measure_fn,
    measure_jacobian,
    pack,
    unpack,
)

logger = logging.getLogger(__name__)

# Per-field scales used for the relative step-size convergence test.
_TYPICAL = np.array([1.0, 1.0, 1.0, 1e-6, 1e-6, 1e-6, 1.0])


@dataclass
class SecOptConfig:
    """Window size, penalty weight, smoothing, and solver limits.

    ``lam`` multiplies the L1 norm of the attack values in their native
    units (seconds for attack-offset, meters for attack-distance).
    ``stride`` defaults to the window size (non-overlapping windows).

    At ``lam == 0`` free attack states are not identifiable (a uniform shift
    of all ranges can be traded against equal attack-distance values); set
    ``estimate_attacks=False`` to solve the classical attack-free problem.
    """

    sigma_counter: float = 1e-8
    sigma_single: float = 0.30
    sigma_double: float = 0.10
    lam: float = 1e-2
    window_size: int = 300
    stride: int | None = None
    max_iterations: int = 100
    step_tol: float = 1e-8
    l1_epsilon: float = 1e-4
    warm_start: bool = True
    estimate_attacks: bool = True
    split_subproblems: bool = False
    include_propagation: bool = True
    init_damping: float = 1e-3
    max_damping: float = 1e12

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.l1_epsilon <= 0:
            raise ValueError("l1_epsilon must be positive")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")

    def sigma_for(self, kind: MeasurementKind) -> float:
        if kind is MeasurementKind.COUNTER_DIFF:
            return self.sigma_counter
        if kind is MeasurementKind.TWR_SINGLE:
            return self.sigma_single
        return self.sigma_double


@dataclass(frozen=True)
class MeasurementWindow:
    """Time-ordered batch of measurements covered by one solve."""

    measurements: tuple[Measurement, ...]

    def __post_init__(self) -> None:
        if len(self.measurements) < 1:
            raise ValueError("window must contain at least one measurement")
        times = [m.time for m in self.measurements]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("window measurements must be time-ordered")

    def __len__(self) -> int:
        return len(self.measurements)

    @property
    def start_time(self) -> float:
        return self.measurements[0].time

    @property
    def end_time(self) -> float:
        return self.measurements[-1].time


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    converged: bool
    damping: float
    message: str = ""


@dataclass(frozen=True)
class WindowEstimate:
    window_index: int
    end_step: int
    end_time: float
    state: NetworkState
    report: SolveReport
    wall_time: float


def _attack_flat_indices(n_nodes: int, master_index: int) -> np.ndarray:
    """Packed-vector indices of the penalized attack entries (non-master nodes)."""
    idx = []
    for k in range(n_nodes):
        if k == master_index:
            continue
        idx.append(k * NODE_DIM + FIELD_INDEX["attack_offset"])
        idx.append(k * NODE_DIM + FIELD_INDEX["attack_distance"])
    return np.array(idx, dtype=int)


def objective(state: NetworkState, window: MeasurementWindow, cfg: SecOptConfig) -> float:
    """Exact window cost: scaled squared residuals plus the L1 attack penalty."""
    cost = 0.0
    for m in window.measurements:
        predicted = measure_fn(
            m.kind, state.nodes[m.initiator], state.nodes[m.responder], cfg.include_propagation
        )
        cost += ((m.value - predicted) / cfg.sigma_for(m.kind)) ** 2
    for k, node in enumerate(state.nodes):
        if k == state.master_index:
            continue
        cost += cfg.lam * (abs(node.attack_offset) + abs(node.attack_distance))
    return cost


class _WindowProblem:
    """Free-variable bookkeeping plus residual/Jacobian assembly for one window."""

    def __init__(
        self,
        n_nodes: int,
        master_index: int,
        cfg: SecOptConfig,
        free_fields: set[str] | None = None,
        kinds: set[MeasurementKind] | None = None,
    ) -> None:
        self.n_nodes = n_nodes
        self.master_index = master_index
        self.cfg = cfg
        self.kinds = kinds
        fields = set(free_fields) if free_fields is not None else set(FIELD_INDEX)
        if not cfg.estimate_attacks:
            fields -= {"attack_offset", "attack_distance"}
        free = []
        for k in range(n_nodes):
            for name, f in FIELD_INDEX.items():
                if name not in fields:
                    continue
                if k == master_index and name in ("offset", "bias"):
                    continue
                free.append(k * NODE_DIM + f)
        self.free = np.array(sorted(free), dtype=int)
        self.typical = np.tile(_TYPICAL, n_nodes)[self.free]
        penalized = _attack_flat_indices(n_nodes, master_index)
        self.pen_mask = np.isin(self.free, penalized)
        self.bias_idx = np.array(
            [k * NODE_DIM + FIELD_INDEX["bias"] for k in range(n_nodes)], dtype=int
        )

    def project(self, full: np.ndarray) -> np.ndarray:
        """Box-project onto the physical state set (|bias| <= bound).

        Bias is barely identifiable within one window (its effect on a range
        is ~bound * distance, millimeters), so trial steps are clipped to the
        bound instead of being rejected as invalid states.
        """
        full = full.copy()
        full[self.bias_idx] = np.clip(
            full[self.bias_idx], -DEFAULT_BIAS_BOUND, DEFAULT_BIAS_BOUND
        )
        return full

    def active_measurements(self, window: MeasurementWindow) -> list[Measurement]:
        if self.kinds is None:
            return list(window.measurements)
        return [m for m in window.measurements if m.kind in self.kinds]

    def residuals_jacobian(
        self, full: np.ndarray, measurements: list[Measurement]
    ) -> tuple[np.ndarray, np.ndarray]:
        state = unpack(full, master_index=self.master_index)
        n_rows = len(measurements)
        r = np.zeros(n_rows)
        jac = np.zeros((n_rows, self.free.size))
        col_of = {flat: c for c, flat in enumerate(self.free)}
        for row, m in enumerate(measurements):
            sigma = self.cfg.sigma_for(m.kind)
            predicted = measure_fn(
                m.kind, state.nodes[m.initiator], state.nodes[m.responder],
                self.cfg.include_propagation,
            )
            d_dk, d_dj = measure_jacobian(
                m.kind, state.nodes[m.initiator], state.nodes[m.responder],
                self.cfg.include_propagation,
            )
            r[row] = (m.value - predicted) / sigma
            for node, grad in ((m.initiator, d_dk), (m.responder, d_dj)):
                base = node * NODE_DIM
                for f in range(NODE_DIM):
                    col = col_of.get(base + f)
                    if col is not None and grad[f] != 0.0:
                        jac[row, col] = -grad[f] / sigma
        return r, jac

    def smoothed_cost(self, full: np.ndarray, measurements: list[Measurement]) -> float:
        """Surrogate cost; infeasible or degenerate trial points cost infinity."""
        try:
            state = unpack(full, master_index=self.master_index)
            cost = 0.0
            for m in measurements:
                predicted = measure_fn(
                    m.kind, state.nodes[m.initiator], state.nodes[m.responder],
                    self.cfg.include_propagation,
                )
                cost += ((m.value - predicted) / self.cfg.sigma_for(m.kind)) ** 2
        except (DegenerateGeometryError, ValueError):
            return np.inf
        a = full[self.free][self.pen_mask]
        eps = self.cfg.l1_epsilon
        cost += self.cfg.lam * float(np.sum(np.sqrt(a * a + eps * eps) - eps))
        return cost


def _minimize(
    problem: _WindowProblem, window: MeasurementWindow, x_full: np.ndarray, cfg: SecOptConfig
) -> tuple[np.ndarray, SolveReport]:
    """Damped Gauss-Newton on the smoothed objective over the problem's free set."""
    measurements = problem.active_measurements(window)
    full = x_full.copy()
    if not measurements or problem.free.size == 0:
        cost = problem.smoothed_cost(full, measurements)
        return full, SolveReport(0, cost, cost, True, 0.0, "nothing to solve")
    eps = cfg.l1_epsilon
    mu = cfg.init_damping
    cost = problem.smoothed_cost(full, measurements)
    initial_cost = cost
    converged = False
    message = "max iterations reached"
    iterations = 0
    typ = problem.typical
    for iterations in range(1, cfg.max_iterations + 1):
        try:
            r, jac = problem.residuals_jacobian(full, measurements)
        except (DegenerateGeometryError, ValueError) as exc:
            message = f"degenerate linearization point: {exc}"
            break
        grad = 2.0 * (jac.T @ r)
        hess = 2.0 * (jac.T @ jac)
        a = full[problem.free][problem.pen_mask]
        root = np.sqrt(a * a + eps * eps)
        grad[problem.pen_mask] += cfg.lam * a / root
        hess[problem.pen_mask, problem.pen_mask] += cfg.lam * eps * eps / root**3
        # Solve in per-variable typical units; the raw system mixes meters
        # and seconds and is numerically unsolvable otherwise.
        hess_s = hess * np.outer(typ, typ)
        grad_s = grad * typ
        # Floor the damping scale so gauge/null directions are regularized
        # too (their Hessian diagonal is ~0 and pure Marquardt scaling would
        # leave the damped system singular).
        diag_s = np.diag(hess_s)
        scale = np.maximum(diag_s, max(1e-6 * float(diag_s.max()), 1e-12))
        accepted = False
        step_s = np.zeros_like(grad_s)
        while mu <= cfg.max_damping:
            try:
                step_s = np.linalg.solve(hess_s + mu * np.diag(scale), -grad_s)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            trial = full.copy()
            trial[problem.free] += step_s * typ
            trial = problem.project(trial)
            trial_cost = problem.smoothed_cost(trial, measurements)
            if np.isfinite(trial_cost) and trial_cost <= cost:
                full, cost = trial, trial_cost
                mu = max(mu / 3.0, 1e-12)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            message = "damping exhausted (rank-deficient or stalled)"
            break
        if np.max(np.abs(step_s)) < cfg.step_tol:
            converged = True
            message = "step tolerance reached"
            break
    return full, SolveReport(iterations, initial_cost, cost, converged, mu, message)


def solve(
    window: MeasurementWindow, x_init: NetworkState, cfg: SecOptConfig
) -> tuple[NetworkState, SolveReport]:
    """Estimate one network state from a measurement window.

    Never raises on non-convergence: the report carries the flag, and the
    returned state is guaranteed not to cost more than ``x_init`` under the
    exact objective.
    """
    full0 = pack(x_init)
    master = x_init.master_index
    if cfg.split_subproblems:
        # Alternate the classic two-stage structure: clock variables from
        # counter differences, then geometry/distance-attack from ranges.
        clock = _WindowProblem(
            x_init.n, master, cfg,
            free_fields={"offset", "attack_offset"},
            kinds={MeasurementKind.COUNTER_DIFF},
        )
        geom = _WindowProblem(
            x_init.n, master, cfg,
            free_fields={"px", "py", "pz", "bias", "attack_distance"},
            kinds={MeasurementKind.TWR_SINGLE, MeasurementKind.TWR_DOUBLE},
        )
        full = full0.copy()
        reports = []
        for _ in range(2):
            full, rep_a = _minimize(clock, window, full, cfg)
            full, rep_b = _minimize(geom, window, full, cfg)
            reports.extend([rep_a, rep_b])
        report = SolveReport(
            iterations=sum(r.iterations for r in reports),
            initial_cost=reports[0].initial_cost,
            final_cost=reports[-1].final_cost,
            converged=all(r.converged for r in reports[-2:]),
            damping=reports[-1].damping,
            message="alternating subproblems",
        )
    else:
        problem = _WindowProblem(x_init.n, master, cfg)
        full, report = _minimize(problem, window, full0, cfg)
    solution = unpack(full, master_index=master)

    def exact_cost(state: NetworkState) -> float:
        try:
            return objective(state, window, cfg)
        except (DegenerateGeometryError, ValueError):
            return np.inf

    # The solver tracks the smoothed surrogate; enforce the contract on the
    # exact objective (differences are bounded by lam * n * eps).
    if exact_cost(solution) > exact_cost(x_init):
        return x_init, replace(report, converged=False, message="no exact-cost decrease")
    return solution, report


def run_stream(
    records,
    x_init: NetworkState,
    cfg: SecOptConfig,
) -> list[WindowEstimate]:
    """Slide a window over ``(index, measurement)`` pairs and solve each one.

    Windows advance by ``cfg.stride`` (default: the window size). Each solve
    warm-starts from the previous estimate unless ``warm_start`` is off.
    Per-window wall-clock time is recorded for runtime studies.
    """
    stride = cfg.stride or cfg.window_size
    estimates: list[WindowEstimate] = []
    buffer: list[tuple[int, Measurement]] = []
    current = x_init
    window_index = 0
    for index, measurement in records:
        buffer.append((index, measurement))
        if len(buffer) < cfg.window_size:
            continue
        window = MeasurementWindow(tuple(m for _, m in buffer))
        start = x_init if not cfg.warm_start else current
        t0 = _time.perf_counter()
        state, report = solve(window, start, cfg)
        wall = _time.perf_counter() - t0
        if not report.converged:
            logger.info(
                "window %d: %s (iterations=%d, cost %.3g -> %.3g)",
                window_index, report.message, report.iterations,
                report.initial_cost, report.final_cost,
            )
        current = state
        estimates.append(
            WindowEstimate(
                window_index=window_index,
                end_step=buffer[-1][0],
                end_time=window.end_time,
                state=state,
                report=report,
                wall_time=wall,
            )
        )
        window_index += 1
        buffer = buffer[stride:]
    return estimates
