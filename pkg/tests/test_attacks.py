import numpy as np
import pytest

from secstate.attacks import (
    AttackConfig,
    AttackConfigError,
    AttackInjector,
    AttackType,
    ConfigWarning,
    corrupt,
    distance_attack_value,
    time_attack_value,
    validate_attack_magnitudes,
)
from secstate.core import Measurement, MeasurementKind
from secstate.simulate import NoiseConfig, Simulator, StaticMotion, ClockModel
from secstate.core import Topology

D = MeasurementKind.COUNTER_DIFF
R1 = MeasurementKind.TWR_SINGLE
R2 = MeasurementKind.TWR_DOUBLE


class FixedRng:
    """Stand-in RNG returning forced draws for direct-substitution checks."""

    def __init__(self, uniform=0.0, normal=0.0):
        self._uniform = uniform
        self._normal = normal

    def uniform(self, low=0.0, high=1.0):
        return low + (high - low) * self._uniform

    def standard_normal(self):
        return self._normal

    def normal(self, loc=0.0, scale=1.0):
        return loc + scale * self._normal


class TestDistanceAttackValue:
    def test_type1_phase1_forced_zero_draw(self):
        assert distance_attack_value(AttackType.T1_UNIFORM, 0.0, 60.0, FixedRng(0.0)) == 4.0

    def test_type1_phase2_forced_unit_draw(self):
        assert distance_attack_value(AttackType.T1_UNIFORM, 30.0, 60.0, FixedRng(1.0)) == 14.0

    def test_type1_phase3(self):
        value = distance_attack_value(AttackType.T1_UNIFORM, 55.0, 60.0, FixedRng(0.5))
        assert value == 2.0 * (0.5 + 1.0)

    def test_type2_forced_draw(self):
        value = distance_attack_value(AttackType.T2_NORMAL, 0.0, 60.0, FixedRng(normal=1.5))
        assert value == 2.0 * 1.5 + 2.0

    def test_type3_pareto_mean(self):
        # Oracle: Pareto mean = scale * shape / (shape - 1) = 3 * 3 / 2 = 4.5 in phase 1
        rng = np.random.default_rng(123)
        n = 1_000_000
        total = 0.0
        for _ in range(n):
            total += distance_attack_value(AttackType.T3_PARETO, 1.0, 60.0, rng)
        assert total / n == pytest.approx(4.5, rel=0.01)

    def test_type3_support_lower_bound(self):
        rng = np.random.default_rng(5)
        values = [distance_attack_value(AttackType.T3_PARETO, 1.0, 60.0, rng) for _ in range(500)]
        assert min(values) >= 3.0  # phase 1 scale

    def test_rejects_unknown_type(self):
        with pytest.raises(AttackConfigError):
            distance_attack_value(AttackType.T4_CONST_TIME, 0.0, 60.0, FixedRng())

    def test_rejects_time_outside_session(self):
        with pytest.raises(AttackConfigError):
            distance_attack_value(AttackType.T1_UNIFORM, 61.0, 60.0, FixedRng())


class TestTimeAttackValue:
    def test_type4_constant_every_call(self):
        config = AttackConfig(attack_type=AttackType.T4_CONST_TIME, seed=3)
        injector = AttackInjector(config, n_nodes=8)
        first = injector.constants[3]
        assert first == pytest.approx(100e-6, rel=0.5)
        for _ in range(10):
            value = time_attack_value(
                AttackType.T4_CONST_TIME, 3, injector.constants, 100e-6, 0, injector.rng
            )
            assert value == first

    def test_type4_zero_magnitude(self):
        config = AttackConfig(
            attack_type=AttackType.T4_CONST_TIME, magnitude_scale=0.0, seed=0
        )
        injector = AttackInjector(config, n_nodes=4)
        assert all(v == 0.0 for v in injector.constants.values())

    def test_type5_support(self):
        rng = np.random.default_rng(7)
        values = [
            time_attack_value(AttackType.T5_UNIFORM_TIME, 2, {}, 100e-6, 0, rng)
            for _ in range(2000)
        ]
        assert min(values) >= 0.0
        assert max(values) <= 200e-6

    def test_master_never_attacked(self):
        with pytest.raises(AttackConfigError):
            time_attack_value(AttackType.T4_CONST_TIME, 0, {0: 0.0}, 100e-6, 0, FixedRng())
        with pytest.raises(AttackConfigError):
            AttackConfig(attack_type=AttackType.T4_CONST_TIME, constants={0: 1e-6})


def meas(kind, value, k=1, j=2, t=1.0):
    return Measurement(time=t, initiator=k, responder=j, kind=kind, value=value)


class TestCorrupt:
    def test_none_is_identity(self):
        injector = AttackInjector(AttackConfig(), n_nodes=4)
        m = meas(R2, 5.0)
        assert corrupt(m, injector) == m

    def test_type1_additive_on_range(self):
        injector = AttackInjector(
            AttackConfig(attack_type=AttackType.T1_UNIFORM, total_time=60.0), n_nodes=4
        )
        injector.rng = FixedRng(0.0)  # phase 1 draw -> 4.0
        out = corrupt(meas(R2, 5.0, t=1.0), injector)
        assert out.value == pytest.approx(9.0)
        assert (out.initiator, out.responder, out.kind, out.time) == (1, 2, R2, 1.0)

    def test_type4_additive_on_counter_diff(self):
        config = AttackConfig(
            attack_type=AttackType.T4_CONST_TIME, constants={1: 100e-6, 2: 90e-6, 3: 80e-6}
        )
        injector = AttackInjector(config, n_nodes=4)
        out = corrupt(meas(D, 3e-6, k=1), injector)
        assert out.value == pytest.approx(103e-6)

    def test_distance_types_never_touch_counter_diff(self):
        injector = AttackInjector(
            AttackConfig(attack_type=AttackType.T2_NORMAL, total_time=60.0), n_nodes=4
        )
        m = meas(D, 3e-6)
        assert corrupt(m, injector) == m

    def test_time_types_never_touch_ranges(self):
        injector = AttackInjector(
            AttackConfig(attack_type=AttackType.T5_UNIFORM_TIME), n_nodes=4
        )
        for kind in (R1, R2):
            m = meas(kind, 5.0)
            assert corrupt(m, injector) == m

    def test_time_attack_skips_master_initiator(self):
        injector = AttackInjector(
            AttackConfig(attack_type=AttackType.T4_CONST_TIME), n_nodes=4
        )
        m = meas(D, 3e-6, k=0, j=1)
        assert corrupt(m, injector) == m

    def test_deterministic_under_seed(self):
        config = AttackConfig(attack_type=AttackType.T1_UNIFORM, total_time=60.0, seed=11)
        stream = [meas(R2, 5.0, t=0.1 * i + 0.1) for i in range(50)]
        out_a = [corrupt(m, AttackInjector(config, 4)).value for m in stream]
        out_b = [corrupt(m, AttackInjector(config, 4)).value for m in stream]
        assert out_a == out_b

    def test_every_range_measurement_in_stream_modified(self):
        topo = Topology.fully_connected(3)
        sim = Simulator(
            topo,
            clocks=[ClockModel()] * 3,
            motions=[StaticMotion((0, 0, 0)), StaticMotion((4, 0, 0)), StaticMotion((0, 3, 0))],
            noise=NoiseConfig(sigma_counter=0.0, sigma_single=0.0, sigma_double=0.0),
            seed=1,
        )
        injector = AttackInjector(
            AttackConfig(attack_type=AttackType.T1_UNIFORM, total_time=2.0), n_nodes=3
        )
        for record in sim.records(2.0):
            out = corrupt(record.measurement, injector)
            if record.measurement.kind.is_range:
                assert out.value != record.measurement.value
            else:
                assert out == record.measurement


class TestMagnitudeValidation:
    def test_warns_when_peak_exceeds_diagonal(self):
        config = AttackConfig(attack_type=AttackType.T1_UNIFORM, total_time=60.0)
        with pytest.warns(ConfigWarning):
            messages = validate_attack_magnitudes(config, arena_diagonal=13.0)
        assert any("phase 2" in m for m in messages)

    def test_silent_when_within_diagonal(self):
        config = AttackConfig(attack_type=AttackType.T1_UNIFORM, total_time=60.0)
        assert validate_attack_magnitudes(config, arena_diagonal=20.0) == []

    def test_time_attacks_not_checked(self):
        config = AttackConfig(attack_type=AttackType.T5_UNIFORM_TIME)
        assert validate_attack_magnitudes(config, arena_diagonal=1.0) == []
