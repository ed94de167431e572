import numpy as np
import pytest

from secstate.core import (
    DegenerateGeometryError,
    FIELD_INDEX,
    Measurement,
    MeasurementKind,
    NODE_DIM,
    NODE_FIELDS,
    NetworkState,
    NodeState,
    SPEED_OF_LIGHT,
    Topology,
    index_of,
    measure_fn,
    measure_jacobian,
    pack,
    unpack,
)

D = MeasurementKind.COUNTER_DIFF
R1 = MeasurementKind.TWR_SINGLE
R2 = MeasurementKind.TWR_DOUBLE


def random_node(rng, min_pos=-5.0, max_pos=5.0):
    return NodeState(
        position=rng.uniform(min_pos, max_pos, size=3),
        offset=rng.uniform(-1e-4, 1e-4),
        bias=rng.uniform(-5e-5, 5e-5),
        attack_offset=rng.uniform(-1e-4, 1e-4),
        attack_distance=rng.uniform(-2.0, 2.0),
    )


def random_pair(rng, min_separation=0.5):
    while True:
        a, b = random_node(rng), random_node(rng)
        if np.linalg.norm(a.position - b.position) >= min_separation:
            return a, b


class TestPacking:
    def test_zero_single_node(self):
        state = NetworkState(nodes=(NodeState(position=np.zeros(3)),))
        assert np.array_equal(pack(state), np.zeros(7))

    def test_layout_two_nodes(self):
        state = NetworkState(
            nodes=(NodeState(position=np.zeros(3)), NodeState(position=[1.0, 2.0, 3.0]))
        )
        vec = pack(state)
        assert vec.shape == (14,)
        assert np.array_equal(vec[7:10], [1.0, 2.0, 3.0])

    def test_round_trip_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            nodes = [random_node(rng) for _ in range(n)]
            master = int(rng.integers(0, n))
            nodes[master] = NodeState(position=nodes[master].position)
            state = NetworkState(nodes=tuple(nodes), master_index=master)
            assert unpack(pack(state), master_index=master) == state

    def test_index_of_is_inverse_map(self):
        rng = np.random.default_rng(8)
        nodes = (NodeState(position=np.zeros(3)), random_node(rng), random_node(rng))
        vec = pack(NetworkState(nodes=nodes))
        for k, node in enumerate(nodes):
            entries = node.as_vector()
            for f, name in enumerate(NODE_FIELDS):
                assert vec[index_of(k, name)] == entries[f]

    def test_unpack_rejects_bad_length(self):
        with pytest.raises(ValueError):
            unpack(np.zeros(10))


class TestMeasureFn:
    def test_counter_diff_direct(self):
        k = NodeState(position=[0.0, 0.0, 0.0], offset=2e-6, attack_offset=1e-6)
        j = NodeState(position=[1.0, 0.0, 0.0], offset=5e-6)
        value = measure_fn(D, k, j, include_propagation=False)
        assert value == pytest.approx(4e-6, abs=1e-18)

    def test_counter_diff_propagation_term(self):
        k = NodeState(position=[0.0, 0.0, 0.0])
        j = NodeState(position=[3.0, 4.0, 0.0])
        value = measure_fn(D, k, j, include_propagation=True)
        assert value == pytest.approx(5.0 / SPEED_OF_LIGHT, rel=1e-12)

    def test_double_sided_345(self):
        k = NodeState(position=[0.0, 0.0, 0.0])
        j = NodeState(position=[3.0, 4.0, 0.0])
        assert measure_fn(R2, k, j) == pytest.approx(5.0, abs=1e-12)

    def test_single_sided_bias_and_attack(self):
        k = NodeState(position=[0.0, 0.0, 0.0], bias=1e-6, attack_distance=0.5)
        j = NodeState(position=[3.0, 4.0, 0.0])
        assert measure_fn(R1, k, j) == pytest.approx(5.500005, abs=1e-12)

    def test_coincident_range_raises(self):
        k = NodeState(position=[1.0, 1.0, 1.0])
        j = NodeState(position=[1.0, 1.0, 1.0], offset=1e-6)
        with pytest.raises(DegenerateGeometryError):
            measure_fn(R2, k, j)
        # counter difference value itself stays defined
        assert measure_fn(D, k, j) == pytest.approx(1e-6)

    def test_translation_invariance_of_ranges(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a, b = random_pair(rng)
            shift = rng.uniform(-10, 10, size=3)
            a2 = NodeState(a.position + shift, a.offset, a.bias, a.attack_offset, a.attack_distance)
            b2 = NodeState(b.position + shift, b.offset, b.bias, b.attack_offset, b.attack_distance)
            for kind in (R1, R2):
                assert measure_fn(kind, a, b) == pytest.approx(
                    measure_fn(kind, a2, b2), rel=1e-12
                )

    def test_rotation_invariance_of_ranges(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            a, b = random_pair(rng)
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            a2 = NodeState(q @ a.position, a.offset, a.bias, a.attack_offset, a.attack_distance)
            b2 = NodeState(q @ b.position, b.offset, b.bias, b.attack_offset, b.attack_distance)
            for kind in (R1, R2):
                assert measure_fn(kind, a, b) == pytest.approx(
                    measure_fn(kind, a2, b2), rel=1e-9
                )

    def test_counter_diff_ignores_positions_without_propagation(self):
        rng = np.random.default_rng(11)
        a, b = random_pair(rng)
        moved = NodeState(
            rng.uniform(-5, 5, size=3), b.offset, b.bias, b.attack_offset, b.attack_distance
        )
        assert measure_fn(D, a, b, include_propagation=False) == measure_fn(
            D, a, moved, include_propagation=False
        )


def finite_difference(kind, state_k, state_j, include_propagation):
    """Independent central-difference oracle for the measurement Jacobian."""
    steps = np.array([1e-6, 1e-6, 1e-6, 1e-9, 1e-9, 1e-9, 1e-6])
    grads = []
    for which in range(2):
        grad = np.zeros(NODE_DIM)
        for f in range(NODE_DIM):
            vecs = [state_k.as_vector(), state_j.as_vector()]
            vecs[which][f] += steps[f]
            hi = measure_fn(
                kind,
                NodeState.from_vector(vecs[0]),
                NodeState.from_vector(vecs[1]),
                include_propagation,
            )
            vecs = [state_k.as_vector(), state_j.as_vector()]
            vecs[which][f] -= steps[f]
            lo = measure_fn(
                kind,
                NodeState.from_vector(vecs[0]),
                NodeState.from_vector(vecs[1]),
                include_propagation,
            )
            grad[f] = (hi - lo) / (2 * steps[f])
        grads.append(grad)
    return grads[0], grads[1]


class TestMeasureJacobian:
    def test_counter_diff_linear_terms(self):
        k = NodeState(position=[0.0, 0.0, 0.0], offset=1e-6)
        j = NodeState(position=[3.0, 4.0, 0.0], offset=2e-6)
        d_dk, d_dj = measure_jacobian(D, k, j, include_propagation=False)
        assert d_dj[FIELD_INDEX["offset"]] == 1.0
        assert d_dk[FIELD_INDEX["offset"]] == -1.0
        assert d_dk[FIELD_INDEX["attack_offset"]] == 1.0
        assert np.array_equal(d_dk[:3], np.zeros(3))
        assert np.array_equal(d_dj[:3], np.zeros(3))

    def test_range_unit_vector_gradient(self):
        k = NodeState(position=[0.0, 0.0, 0.0])
        j = NodeState(position=[3.0, 4.0, 0.0])
        d_dk, d_dj = measure_jacobian(R2, k, j)
        assert d_dj[:3] == pytest.approx([0.6, 0.8, 0.0])
        assert d_dk[:3] == pytest.approx([-0.6, -0.8, 0.0])
        assert d_dk[FIELD_INDEX["bias"]] == pytest.approx(5.0)
        assert d_dk[FIELD_INDEX["attack_distance"]] == 1.0

    @pytest.mark.parametrize("kind", [D, R1, R2])
    @pytest.mark.parametrize("include_propagation", [True, False])
    def test_matches_finite_differences(self, kind, include_propagation):
        rng = np.random.default_rng(12)
        for _ in range(100):
            a, b = random_pair(rng)
            d_dk, d_dj = measure_jacobian(kind, a, b, include_propagation)
            fd_k, fd_j = finite_difference(kind, a, b, include_propagation)
            analytic = np.concatenate([d_dk, d_dj])
            numeric = np.concatenate([fd_k, fd_j])
            assert np.linalg.norm(numeric - analytic) <= 1e-6 * np.linalg.norm(analytic)

    def test_position_gradient_antisymmetry(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            a, b = random_pair(rng)
            for kind in (R1, R2):
                d_dk, d_dj = measure_jacobian(kind, a, b)
                assert d_dk[:3] == pytest.approx(-d_dj[:3])

    def test_coincident_raises(self):
        k = NodeState(position=[1.0, 2.0, 3.0])
        j = NodeState(position=[1.0, 2.0, 3.0], offset=1e-6)
        with pytest.raises(DegenerateGeometryError):
            measure_jacobian(R1, k, j)
        with pytest.raises(DegenerateGeometryError):
            measure_jacobian(D, k, j, include_propagation=True)


class TestStateInvariants:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            NodeState(position=[np.nan, 0.0, 0.0])
        with pytest.raises(ValueError):
            NodeState(position=np.zeros(3), offset=np.inf)

    def test_rejects_large_bias(self):
        NodeState(position=np.zeros(3), bias=9.9e-5)
        with pytest.raises(ValueError):
            NodeState(position=np.zeros(3), bias=2e-4)

    def test_master_pinning_enforced(self):
        with pytest.raises(ValueError):
            NetworkState(nodes=(NodeState(position=np.zeros(3), offset=1e-6),))
        NetworkState(
            nodes=(NodeState(position=np.zeros(3)), NodeState(position=np.ones(3), offset=1e-6))
        )

    def test_position_is_frozen(self):
        node = NodeState(position=np.zeros(3))
        with pytest.raises(ValueError):
            node.position[0] = 1.0


class TestMeasurement:
    def test_rejects_self_measurement(self):
        with pytest.raises(ValueError):
            Measurement(time=0.0, initiator=1, responder=1, kind=D, value=0.0)

    def test_kind_must_be_enum(self):
        with pytest.raises(TypeError):
            Measurement(time=0.0, initiator=0, responder=1, kind="d", value=0.0)


class TestTopology:
    def test_fully_connected(self):
        topo = Topology.fully_connected(4)
        assert topo.n == 4
        assert all(topo.degree(k) == 3 for k in range(4))
        assert len(topo.directed_links()) == 12

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="asymmetric"):
            Topology(((1,), (0,), (0,)))

    def test_rejects_disconnected(self):
        with pytest.raises(ValueError, match="disconnected"):
            Topology.from_edges(4, [(0, 1), (2, 3)])

    def test_k_nearest_symmetric_connected(self):
        rng = np.random.default_rng(14)
        positions = rng.uniform(0, 10, size=(9, 3))
        topo = Topology.k_nearest(positions, 5)
        assert topo.n == 9
        for k in range(9):
            assert topo.degree(k) >= 5
            for j in topo.neighbors[k]:
                assert k in topo.neighbors[j]
