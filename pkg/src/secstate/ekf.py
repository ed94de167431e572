"""Attack-augmented extended Kalman filter over the full network state.

With attack states enabled the filter carries 7 entries per node
(position, clock offset, clock bias, and the two per-node attack values);
with them disabled it is the classic baseline filter (5 entries per node)
that demonstrates failure under attack.

Numerical posture for long runs: scalar measurement updates in Joseph form,
explicit symmetrization every step, and master clock pinning implemented by
zeroing the master's offset/bias rows of the gain and covariance (equivalent
to a zero-variance prior without degenerate inversions).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DEFAULT_BIAS_BOUND,
    DegenerateGeometryError,
    FIELD_INDEX,
    Measurement,
    MeasurementKind,
    NetworkState,
    NodeState,
    measure_fn,
    measure_jacobian,
)

logger = logging.getLogger(__name__)

FULL_NODE_DIM = 7
BASE_NODE_DIM = 5  # no attack states


@dataclass
class EkfConfig:
    """Filter tuning: process/measurement noise, priors, and mode switches.

    Process noise entries are continuous-time rates (variance per second);
    the prediction step adds ``q * dt``. Attack-state rates default high so
    the random-walk model can follow fast-changing corruption.
    """

    sigma_counter: float = 1e-8
    sigma_single: float = 0.30
    sigma_double: float = 0.10
    # Position process noise sized for the deployment envelope (one filter
    # serves static anchors and slow mobile nodes alike), not for idealized
    # static infrastructure.
    q_position: float = 0.05
    q_offset: float = 1e-16
    q_bias: float = 1e-16
    q_attack_offset: float = 1e-10  # (10 us)^2 per second
    q_attack_distance: float = 1.0  # (1 m)^2 per second
    p0_position: float = 0.25
    p0_offset: float = 1e-8
    p0_bias: float = 1e-10
    p0_attack_offset: float = 1e-8
    p0_attack_distance: float = 25.0
    attack_states_enabled: bool = True
    include_propagation: bool = True
    innovation_gate: float | None = None  # reject |nu| > gate * sqrt(S) when set
    q_position_overrides: dict[int, float] = field(default_factory=dict)
    p0_position_overrides: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        rates = (
            self.q_position,
            self.q_offset,
            self.q_bias,
            self.q_attack_offset,
            self.q_attack_distance,
        )
        if any(q < 0 for q in rates):
            raise ValueError("process noise rates must be non-negative")
        if self.attack_states_enabled and (
            self.q_attack_offset <= 0 or self.q_attack_distance <= 0
        ):
            raise ValueError("attack process noise must be positive when attack states are on")
        if min(self.sigma_counter, self.sigma_single, self.sigma_double) <= 0:
            raise ValueError("measurement noise stds must be positive")

    @property
    def node_dim(self) -> int:
        return FULL_NODE_DIM if self.attack_states_enabled else BASE_NODE_DIM

    def sigma_for(self, kind: MeasurementKind) -> float:
        if kind is MeasurementKind.COUNTER_DIFF:
            return self.sigma_counter
        if kind is MeasurementKind.TWR_SINGLE:
            return self.sigma_single
        return self.sigma_double


@dataclass
class FilterState:
    """Stacked mean/covariance plus the filter's master-time estimate."""

    mean: np.ndarray
    cov: np.ndarray
    master_time: float
    step: int
    n_nodes: int
    node_dim: int
    master_index: int

    def node_slice(self, node: int) -> slice:
        return slice(node * self.node_dim, (node + 1) * self.node_dim)

    def positions(self) -> np.ndarray:
        return self.mean.reshape(self.n_nodes, self.node_dim)[:, :3].copy()

    def offsets(self) -> np.ndarray:
        return self.mean.reshape(self.n_nodes, self.node_dim)[:, 3].copy()

    def position_std(self) -> np.ndarray:
        var = np.diag(self.cov).reshape(self.n_nodes, self.node_dim)[:, :3]
        return np.sqrt(np.maximum(var, 0.0))

    def offset_std(self) -> np.ndarray:
        var = np.diag(self.cov).reshape(self.n_nodes, self.node_dim)[:, 3]
        return np.sqrt(np.maximum(var, 0.0))

    def network_state(self) -> NetworkState:
        nodes = []
        for k in range(self.n_nodes):
            block = self.mean[self.node_slice(k)]
            ao = float(block[5]) if self.node_dim == FULL_NODE_DIM else 0.0
            ad = float(block[6]) if self.node_dim == FULL_NODE_DIM else 0.0
            nodes.append(
                NodeState(
                    position=block[:3],
                    offset=float(block[3]),
                    bias=float(block[4]),
                    attack_offset=ao,
                    attack_distance=ad,
                )
            )
        return NetworkState(nodes=tuple(nodes), master_index=self.master_index)

    def symmetry_error(self) -> float:
        scale = max(float(np.abs(self.cov).max()), 1e-300)
        return float(np.abs(self.cov - self.cov.T).max()) / scale

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.cov)[0])

    def is_symmetric_psd(self, sym_rtol: float = 1e-12, eig_rtol: float = 1e-9) -> bool:
        return (
            self.symmetry_error() <= sym_rtol
            and self.min_eigenvalue() >= -eig_rtol * float(np.trace(self.cov))
        )


@dataclass(frozen=True)
class InnovationRecord:
    """Diagnostics for one measurement update."""

    step: int
    time: float
    kind: MeasurementKind
    innovation: float
    variance: float
    accepted: bool
    reason: str | None = None


class Ekf:
    """Sequential filter over a pairwise measurement stream.

    One instance is single-threaded; independent instances (e.g. the secure
    and baseline variants fed the same log) may run concurrently.
    """

    def __init__(self, n_nodes: int, config: EkfConfig, master_index: int = 0) -> None:
        if n_nodes < 2:
            raise ValueError("need at least two nodes")
        self.n_nodes = n_nodes
        self.config = config
        self.master_index = master_index
        nd = config.node_dim
        self.node_dim = nd
        self.dim = n_nodes * nd
        self._offset_idx = np.arange(n_nodes) * nd + FIELD_INDEX["offset"]
        self._bias_idx = np.arange(n_nodes) * nd + FIELD_INDEX["bias"]
        # The master defines the time reference, so its offset and bias are
        # pinned at zero. Its attack-offset is pinned too: the reference node
        # is exempt from time attacks in the threat model, and leaving that
        # state free lets it absorb the master-initiated counter differences
        # that would otherwise anchor every other clock. The master's
        # attack-distance stays free (distance attacks may target any node).
        pinned = [
            master_index * nd + FIELD_INDEX["offset"],
            master_index * nd + FIELD_INDEX["bias"],
        ]
        if config.attack_states_enabled:
            pinned.append(master_index * nd + FIELD_INDEX["attack_offset"])
        self._master_clock_idx = np.array(pinned)
        q_node = [config.q_position] * 3 + [config.q_offset, config.q_bias]
        p_node = [config.p0_position] * 3 + [config.p0_offset, config.p0_bias]
        if config.attack_states_enabled:
            q_node += [config.q_attack_offset, config.q_attack_distance]
            p_node += [config.p0_attack_offset, config.p0_attack_distance]
        self._q_diag = np.tile(q_node, n_nodes).astype(float)
        self._p0_diag = np.tile(p_node, n_nodes).astype(float)
        for node, q_pos in config.q_position_overrides.items():
            self._q_diag[node * nd : node * nd + 3] = q_pos
        for node, p_pos in config.p0_position_overrides.items():
            self._p0_diag[node * nd : node * nd + 3] = p_pos

    def state_index(self, node: int, field_name: str) -> int:
        f = FIELD_INDEX[field_name]
        if f >= self.node_dim:
            raise KeyError(f"{field_name} not present in baseline mode")
        return node * self.node_dim + f

    def initial_state(self, guess: NetworkState) -> FilterState:
        if guess.n != self.n_nodes:
            raise ValueError("initial guess node count mismatch")
        mean = np.zeros(self.dim)
        for k, node in enumerate(guess.nodes):
            base = k * self.node_dim
            mean[base : base + 3] = node.position
            mean[base + 3] = node.offset
            mean[base + 4] = node.bias
            if self.config.attack_states_enabled:
                mean[base + 5] = node.attack_offset
                mean[base + 6] = node.attack_distance
        cov = np.diag(self._p0_diag.copy())
        fs = FilterState(
            mean=mean,
            cov=cov,
            master_time=0.0,
            step=0,
            n_nodes=self.n_nodes,
            node_dim=self.node_dim,
            master_index=self.master_index,
        )
        self._pin_master(fs.mean, fs.cov)
        return fs

    def _pin_master(self, mean: np.ndarray, cov: np.ndarray) -> None:
        idx = self._master_clock_idx
        mean[idx] = 0.0
        cov[idx, :] = 0.0
        cov[:, idx] = 0.0

    def _node_view(self, mean: np.ndarray, node: int) -> NodeState:
        base = node * self.node_dim
        ao = float(mean[base + 5]) if self.node_dim == FULL_NODE_DIM else 0.0
        ad = float(mean[base + 6]) if self.node_dim == FULL_NODE_DIM else 0.0
        # Linearize at the physical bias bound if the estimate ever strays past it.
        bias = float(np.clip(mean[base + 4], -DEFAULT_BIAS_BOUND, DEFAULT_BIAS_BOUND))
        return NodeState(
            position=mean[base : base + 3],
            offset=float(mean[base + 3]),
            bias=bias,
            attack_offset=ao,
            attack_distance=ad,
        )

    def predict(self, fs: FilterState, dt: float) -> FilterState:
        """Time update: offsets gain ``bias * dt``; covariance gains ``Q * dt``."""
        if dt < 0:
            raise ValueError("dt must be non-negative")
        mean = fs.mean.copy()
        cov = fs.cov.copy()
        if dt > 0:
            mean[self._offset_idx] += dt * mean[self._bias_idx]
            # P <- F P F^T with F = I + dt * (offset <- bias) coupling
            cov[self._offset_idx, :] += dt * cov[self._bias_idx, :]
            cov[:, self._offset_idx] += dt * cov[:, self._bias_idx]
            cov[np.arange(self.dim), np.arange(self.dim)] += self._q_diag * dt
        self._pin_master(mean, cov)
        cov = 0.5 * (cov + cov.T)
        return replace(fs, mean=mean, cov=cov)

    def update(self, fs: FilterState, m: Measurement) -> tuple[FilterState, InnovationRecord]:
        """Scalar measurement update in Joseph form; skips degenerate geometry."""
        nd = self.node_dim
        k, j = m.initiator, m.responder
        state_k = self._node_view(fs.mean, k)
        state_j = self._node_view(fs.mean, j)
        try:
            predicted = measure_fn(m.kind, state_k, state_j, self.config.include_propagation)
            jac_k, jac_j = measure_jacobian(
                m.kind, state_k, state_j, self.config.include_propagation
            )
        except DegenerateGeometryError as exc:
            logger.warning("update skipped at step %d: %s", fs.step, exc)
            record = InnovationRecord(fs.step, m.time, m.kind, np.nan, np.nan, False, "degenerate")
            return fs, record

        idxs = np.concatenate([np.arange(k * nd, k * nd + nd), np.arange(j * nd, j * nd + nd)])
        vals = np.concatenate([jac_k[:nd], jac_j[:nd]])
        nu = m.value - predicted
        pht = fs.cov[:, idxs] @ vals
        s = float(vals @ pht[idxs]) + self.config.sigma_for(m.kind) ** 2

        gate = self.config.innovation_gate
        if gate is not None and abs(nu) > gate * np.sqrt(s):
            record = InnovationRecord(fs.step, m.time, m.kind, nu, s, False, "gated")
            return fs, record

        gain = pht / s
        gain[self._master_clock_idx] = 0.0
        mean = fs.mean + gain * nu
        # Joseph-form update, valid for the master-pinned (modified) gain:
        # P' = (I - K H) P (I - K H)^T + K R K^T
        cov = fs.cov - np.outer(gain, pht) - np.outer(pht, gain) + s * np.outer(gain, gain)
        self._pin_master(mean, cov)
        cov = 0.5 * (cov + cov.T)
        record = InnovationRecord(fs.step, m.time, m.kind, nu, s, True)
        return replace(fs, mean=mean, cov=cov), record

    def step(self, fs: FilterState, m: Measurement) -> tuple[FilterState, InnovationRecord]:
        """Advance to the measurement's master time, then apply the update.

        Time must not go backward: a measurement timestamped before the
        filter's master-time estimate is rejected with a diagnostic.
        """
        dt = m.time - fs.master_time
        if dt < 0:
            logger.warning(
                "measurement at t=%.6f rejected: filter master time already %.6f",
                m.time,
                fs.master_time,
            )
            record = InnovationRecord(
                fs.step, m.time, m.kind, np.nan, np.nan, False, "time_backward"
            )
            return fs, record
        fs = self.predict(fs, dt)
        fs, record = self.update(fs, m)
        return replace(fs, master_time=m.time, step=fs.step + 1), record
