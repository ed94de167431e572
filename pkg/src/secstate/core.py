"""Core domain types and the shared pairwise measurement model.

Per-node state is laid out as ``[px, py, pz, offset, bias, attack_offset,
attack_distance]``; the full network vector concatenates nodes in id order.
The simulator and every estimator predict measurements through the same
``measure_fn`` so that all components agree on one convention:

* counter difference (seconds):  ``(o_j - o_k) + ao_k  [+ ||p_j - p_k|| / c]``
* single-sided range (meters):   ``(1 + b_k) * ||p_j - p_k|| + ad_k``
* double-sided range (meters):   same prediction, lower noise

Attack terms (``ao``, ``ad``) are attributed to the measurement initiator
``k``. The propagation term on counter differences is controlled by
``include_propagation`` and must be set identically in the simulator and in
the estimators of one run.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# |bias| above this bound (100 ppm) is rejected as an invalid state.
DEFAULT_BIAS_BOUND = 1e-4

# Range geometry below this separation has no usable gradient.
MIN_SEPARATION = 1e-9  # meters

NODE_FIELDS = ("px", "py", "pz", "offset", "bias", "attack_offset", "attack_distance")
NODE_DIM = len(NODE_FIELDS)
FIELD_INDEX = {name: i for i, name in enumerate(NODE_FIELDS)}


class DegenerateGeometryError(ValueError):
    """Coincident positions make a range prediction (or its gradient) ill-defined."""


class MeasurementKind(enum.Enum):
    """Pairwise measurement flavor; the enum value is the wire/log code."""

    COUNTER_DIFF = "d"
    TWR_SINGLE = "r"
    TWR_DOUBLE = "R"

    @property
    def is_range(self) -> bool:
        return self is not MeasurementKind.COUNTER_DIFF

    @property
    def unit(self) -> str:
        return "m" if self.is_range else "s"


@dataclass(frozen=True)
class NodeState:
    """State of one node: 3D position, clock parameters, and attack values.

    ``offset`` (seconds) and ``bias`` (dimensionless, ~ppm) are relative to
    the master clock. ``attack_offset`` (seconds) and ``attack_distance``
    (meters) are the additive corruptions this node injects into the
    measurements it initiates; they are zero for honest nodes and in every
    ground-truth state.
    """

    position: np.ndarray
    offset: float = 0.0
    bias: float = 0.0
    attack_offset: float = 0.0
    attack_distance: float = 0.0

    def __post_init__(self) -> None:
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,):
            raise ValueError(f"position must be a 3-vector, got shape {pos.shape}")
        pos = pos.copy()
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)
        scalars = (self.offset, self.bias, self.attack_offset, self.attack_distance)
        if not (np.all(np.isfinite(pos)) and all(np.isfinite(s) for s in scalars)):
            raise ValueError("node state fields must be finite")
        if abs(self.bias) > DEFAULT_BIAS_BOUND:
            raise ValueError(
                f"|bias| = {abs(self.bias):.3e} exceeds bound {DEFAULT_BIAS_BOUND:.0e}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NodeState):
            return NotImplemented
        return (
            bool(np.array_equal(self.position, other.position))
            and self.offset == other.offset
            and self.bias == other.bias
            and self.attack_offset == other.attack_offset
            and self.attack_distance == other.attack_distance
        )

    def as_vector(self) -> np.ndarray:
        """This node's 7 entries in canonical field order."""
        return np.array(
            [*self.position, self.offset, self.bias, self.attack_offset, self.attack_distance]
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "NodeState":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (NODE_DIM,):
            raise ValueError(f"expected {NODE_DIM} entries, got shape {vec.shape}")
        return cls(
            position=vec[:3],
            offset=float(vec[3]),
            bias=float(vec[4]),
            attack_offset=float(vec[5]),
            attack_distance=float(vec[6]),
        )


@dataclass(frozen=True)
class NetworkState:
    """Ordered collection of node states with a pinned master clock.

    The master node defines the time reference: its offset and bias are
    identically zero, enforced at construction.
    """

    nodes: tuple[NodeState, ...]
    master_index: int = 0

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not nodes:
            raise ValueError("network must contain at least one node")
        if not 0 <= self.master_index < len(nodes):
            raise ValueError(f"master_index {self.master_index} out of range")
        master = nodes[self.master_index]
        if master.offset != 0.0 or master.bias != 0.0:
            raise ValueError("master node must have exactly zero offset and bias")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def positions(self) -> np.ndarray:
        return np.array([node.position for node in self.nodes])

    def offsets(self) -> np.ndarray:
        return np.array([node.offset for node in self.nodes])

    def biases(self) -> np.ndarray:
        return np.array([node.bias for node in self.nodes])


def index_of(node: int, field_name: str) -> int:
    """Flat index of ``field_name`` of node ``node`` in the packed vector."""
    return node * NODE_DIM + FIELD_INDEX[field_name]


def pack(state: NetworkState) -> np.ndarray:
    """Flatten a network state to a length ``7 * N`` vector (node-major)."""
    return np.concatenate([node.as_vector() for node in state.nodes])


def unpack(vector: np.ndarray, master_index: int = 0) -> NetworkState:
    """Inverse of :func:`pack`; exact round-trip on valid states."""
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or vector.size % NODE_DIM != 0:
        raise ValueError(f"packed vector length must be a multiple of {NODE_DIM}")
    n = vector.size // NODE_DIM
    nodes = tuple(
        NodeState.from_vector(vector[k * NODE_DIM : (k + 1) * NODE_DIM]) for k in range(n)
    )
    return NetworkState(nodes=nodes, master_index=master_index)


@dataclass(frozen=True)
class Measurement:
    """One timestamped pairwise reading.

    ``time`` is the master-clock emission time in simulation (receipt order
    is carried separately by the log). ``value`` is in seconds for counter
    differences and meters for both range kinds.
    """

    time: float
    initiator: int
    responder: int
    kind: MeasurementKind
    value: float

    def __post_init__(self) -> None:
        if self.initiator == self.responder:
            raise ValueError("initiator and responder must differ")
        if self.initiator < 0 or self.responder < 0:
            raise ValueError("node ids must be non-negative")
        if not isinstance(self.kind, MeasurementKind):
            raise TypeError(f"kind must be a MeasurementKind, got {type(self.kind)!r}")
        if not (np.isfinite(self.time) and np.isfinite(self.value)):
            raise ValueError("time and value must be finite")


@dataclass(frozen=True)
class Topology:
    """Symmetric neighbor sets defining which pairs may measure.

    Rejects asymmetric or disconnected graphs at construction with a
    diagnostic naming the offending nodes.
    """

    neighbors: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        neighbors = tuple(tuple(sorted(set(nbrs))) for nbrs in self.neighbors)
        object.__setattr__(self, "neighbors", neighbors)
        n = len(neighbors)
        if n < 2:
            raise ValueError("topology needs at least two nodes")
        for k, nbrs in enumerate(neighbors):
            for j in nbrs:
                if not 0 <= j < n:
                    raise ValueError(f"node {k} lists out-of-range neighbor {j}")
                if j == k:
                    raise ValueError(f"node {k} lists itself as a neighbor")
                if k not in neighbors[j]:
                    raise ValueError(f"asymmetric link: {j} not listing {k}")
            if not nbrs:
                raise ValueError(f"node {k} has no neighbors (graph disconnected)")
        # connectivity (BFS from node 0)
        seen = {0}
        frontier = deque([0])
        while frontier:
            k = frontier.popleft()
            for j in neighbors[k]:
                if j not in seen:
                    seen.add(j)
                    frontier.append(j)
        if len(seen) != n:
            missing = sorted(set(range(n)) - seen)
            raise ValueError(f"topology disconnected: nodes {missing} unreachable from 0")

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def degree(self, k: int) -> int:
        return len(self.neighbors[k])

    def directed_links(self) -> list[tuple[int, int]]:
        return [(k, j) for k in range(self.n) for j in self.neighbors[k]]

    @classmethod
    def fully_connected(cls, n: int) -> "Topology":
        return cls(tuple(tuple(j for j in range(n) if j != k) for k in range(n)))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Topology":
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for a, b in edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        return cls(tuple(tuple(sorted(s)) for s in nbrs))

    @classmethod
    def k_nearest(cls, positions: np.ndarray, k: int) -> "Topology":
        """Each node linked to its ``k`` nearest peers, symmetrized by union."""
        positions = np.asarray(positions, dtype=float)
        n = positions.shape[0]
        if not 1 <= k < n:
            raise ValueError(f"k must be in [1, {n - 1}], got {k}")
        dists = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
        np.fill_diagonal(dists, np.inf)
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for a in range(n):
            for b in np.argsort(dists[a])[:k]:
                nbrs[a].add(int(b))
                nbrs[int(b)].add(a)
        return cls(tuple(tuple(sorted(s)) for s in nbrs))


def _separation(state_k: NodeState, state_j: NodeState) -> tuple[np.ndarray, float]:
    delta = state_j.position - state_k.position
    return delta, float(np.linalg.norm(delta))


def measure_fn(
    kind: MeasurementKind,
    state_k: NodeState,
    state_j: NodeState,
    include_propagation: bool = True,
) -> float:
    """Noise-free measurement prediction including the initiator's attack terms.

    Raises :class:`DegenerateGeometryError` for a range kind when the two
    positions coincide (the prediction exists but carries no direction).
    """
    delta, dist = _separation(state_k, state_j)
    if kind.is_range:
        if dist < MIN_SEPARATION:
            raise DegenerateGeometryError(
                f"coincident positions (separation {dist:.3e} m) for {kind.name}"
            )
        return (1.0 + state_k.bias) * dist + state_k.attack_distance
    value = (state_j.offset - state_k.offset) + state_k.attack_offset
    if include_propagation:
        value += dist / SPEED_OF_LIGHT
    return value


def measure_jacobian(
    kind: MeasurementKind,
    state_k: NodeState,
    state_j: NodeState,
    include_propagation: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Partials of :func:`measure_fn` w.r.t. the 14 entries of both states.

    Returns ``(d_dk, d_dj)``, each length 7 in canonical field order.
    """
    delta, dist = _separation(state_k, state_j)
    d_dk = np.zeros(NODE_DIM)
    d_dj = np.zeros(NODE_DIM)
    if kind.is_range:
        if dist < MIN_SEPARATION:
            raise DegenerateGeometryError(
                f"coincident positions (separation {dist:.3e} m) for {kind.name}"
            )
        unit = delta / dist
        d_dj[:3] = (1.0 + state_k.bias) * unit
        d_dk[:3] = -d_dj[:3]
        d_dk[FIELD_INDEX["bias"]] = dist
        d_dk[FIELD_INDEX["attack_distance"]] = 1.0
        return d_dk, d_dj
    d_dj[FIELD_INDEX["offset"]] = 1.0
    d_dk[FIELD_INDEX["offset"]] = -1.0
    d_dk[FIELD_INDEX["attack_offset"]] = 1.0
    if include_propagation:
        if dist < MIN_SEPARATION:
            raise DegenerateGeometryError(
                "coincident positions: propagation gradient undefined"
            )
        unit = delta / dist
        d_dj[:3] = unit / SPEED_OF_LIGHT
        d_dk[:3] = -d_dj[:3]
    return d_dk, d_dj
