import numpy as np
import pytest

from secstate.metrics import (
    ErrorReport,
    build_report,
    localization_error,
    match_instants,
    procrustes_align,
    sync_error,
)


def rotation_about_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_zyx(a, b, c):
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cc, sc = np.cos(c), np.sin(c)
    rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rx = np.array([[1, 0, 0], [0, cc, -sc], [0, sc, cc]])
    return rz @ ry @ rx


def grid_search_alignment_rms(estimated, truth, coarse=16, refine_steps=5):
    """Independent oracle: best-RMS rigid alignment by rotation grid search.

    Scans Euler angles on a coarse grid, then refines around the best cell.
    Translation is closed-form (centroid match) for each candidate rotation.
    """
    centroid_est = estimated.mean(axis=0)
    centroid_true = truth.mean(axis=0)
    e = estimated - centroid_est
    t = truth - centroid_true

    def rms_for(rot):
        return np.sqrt(np.mean(np.sum((e @ rot.T - t) ** 2, axis=1)))

    best = (np.inf, (0.0, 0.0, 0.0))
    grid = np.linspace(-np.pi, np.pi, coarse, endpoint=False)
    half_grid = np.linspace(-np.pi / 2, np.pi / 2, coarse)
    for a in grid:
        for b in half_grid:
            for c in grid:
                rms = rms_for(rotation_zyx(a, b, c))
                if rms < best[0]:
                    best = (rms, (a, b, c))
    span = np.pi / coarse
    for _ in range(refine_steps):
        _, (a0, b0, c0) = best
        for a in np.linspace(a0 - span, a0 + span, 9):
            for b in np.linspace(b0 - span, b0 + span, 9):
                for c in np.linspace(c0 - span, c0 + span, 9):
                    rms = rms_for(rotation_zyx(a, b, c))
                    if rms < best[0]:
                        best = (rms, (a, b, c))
        span /= 3.0
    return best[0]


class TestProcrustes:
    def test_identity_on_equal_sets(self):
        rng = np.random.default_rng(1)
        points = rng.uniform(0, 10, size=(8, 3))
        result = procrustes_align(points, points)
        assert result.valid
        assert result.rotation == pytest.approx(np.eye(3), abs=1e-12)
        assert result.translation == pytest.approx(np.zeros(3), abs=1e-12)
        assert result.rms < 1e-12

    def test_recovers_exact_rigid_preimage(self):
        rng = np.random.default_rng(2)
        truth = rng.uniform(0, 10, size=(8, 3))
        rot = rotation_about_y(np.pi / 2)
        shift = np.array([1.0, 0.0, 2.0])
        estimated = truth @ rot.T + shift
        result = procrustes_align(estimated, truth)
        assert result.valid
        assert result.rms < 1e-9
        assert result.apply(estimated) == pytest.approx(truth, abs=1e-9)

    def test_matches_grid_search_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(3):
            truth = rng.uniform(0, 10, size=(8, 3))
            rot = rotation_zyx(*rng.uniform(-np.pi, np.pi, size=3))
            estimated = truth @ rot.T + rng.uniform(-3, 3, size=3)
            estimated += rng.normal(0, 0.05, size=estimated.shape)
            result = procrustes_align(estimated, truth)
            oracle = grid_search_alignment_rms(estimated, truth)
            assert abs(result.rms - oracle) < 1e-3

    def test_never_scales_never_reflects(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            a = rng.uniform(-5, 5, size=(8, 3))
            b = rng.uniform(-5, 5, size=(8, 3))
            result = procrustes_align(a, b)
            assert result.rotation @ result.rotation.T == pytest.approx(np.eye(3), abs=1e-9)
            assert np.linalg.det(result.rotation) == pytest.approx(1.0, abs=1e-9)

    def test_rms_invariant_under_rigid_pretransform(self):
        rng = np.random.default_rng(5)
        truth = rng.uniform(0, 10, size=(8, 3))
        estimated = truth + rng.normal(0, 0.1, size=truth.shape)
        base = procrustes_align(estimated, truth).rms
        for _ in range(5):
            rot = rotation_zyx(*rng.uniform(-np.pi, np.pi, size=3))
            shift = rng.uniform(-10, 10, size=3)
            moved = estimated @ rot.T + shift
            assert procrustes_align(moved, truth).rms == pytest.approx(base, abs=1e-9)

    def test_degenerate_sets_flagged(self):
        two = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        result = procrustes_align(two, two + 1.0)
        assert not result.valid
        assert result.rotation == pytest.approx(np.eye(3))
        collinear = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        assert not procrustes_align(collinear, collinear).valid


class TestLocalizationError:
    def test_zero_for_perfect_estimates(self):
        rng = np.random.default_rng(6)
        truth = rng.uniform(0, 10, size=(5, 8, 3))
        errors, alignments = localization_error(truth.copy(), truth)
        assert np.max(errors) < 1e-9
        assert all(a.valid for a in alignments)

    def test_single_offset_node(self):
        rng = np.random.default_rng(7)
        truth = np.tile(rng.uniform(0, 10, size=(1, 8, 3)), (1, 1, 1))
        est = truth.copy()
        # align on the other 7 nodes, then a pure 0.3 m offset on node 0 survives
        est[0, 0] += np.array([0.3, 0.0, 0.0])
        errors, _ = localization_error(est, truth, align_ids=np.arange(1, 8))
        assert errors[0, 0] == pytest.approx(0.3, abs=1e-9)
        assert np.max(errors[0, 1:]) < 1e-9

    def test_mobile_registration_through_anchors(self):
        rng = np.random.default_rng(8)
        anchors = rng.uniform(0, 10, size=(7, 3))
        mobile = np.array([5.0, 5.0, 1.0])
        truth = np.vstack([anchors, mobile[None]])[None]
        rot = rotation_about_y(0.4)
        shift = np.array([2.0, -1.0, 0.5])
        est = (truth[0] @ rot.T + shift)[None]
        errors, _ = localization_error(est, truth, align_ids=np.arange(7))
        assert np.max(errors) < 1e-9


class TestSyncError:
    def test_zero_for_perfect(self):
        offsets = np.array([[0.0, 1e-6, -2e-6]])
        assert np.max(sync_error(offsets.copy(), offsets)) == 0.0

    def test_direct_offset_error(self):
        truth = np.array([[0.0, 1e-6, 5e-6]])
        est = truth.copy()
        est[0, 2] += 2e-7
        errors = sync_error(est, truth)
        assert errors[0, 2] == pytest.approx(0.2e-6, abs=1e-15)

    def test_reference_column_identically_zero(self):
        rng = np.random.default_rng(9)
        truth = rng.normal(0, 1e-5, size=(20, 6))
        est = truth + rng.normal(0, 1e-6, size=truth.shape)
        errors = sync_error(est, truth, reference=2)
        assert np.max(errors[:, 2]) == 0.0


class TestMatchingAndReport:
    def test_nearest_snapshot_matching(self):
        truth_times = np.array([0.0, 1.0, 2.0, 3.0])
        idx, keep = match_instants(np.array([0.1, 1.6, 2.4]), truth_times)
        assert list(idx) == [0, 2, 2]
        assert keep.all()

    def test_gap_skipping_counted(self):
        truth_times = np.array([0.0, 10.0])
        idx, keep = match_instants(np.array([0.1, 5.0, 9.9]), truth_times, max_gap=0.5)
        assert list(keep) == [True, False, True]

    def test_report_summary_matches_recomputation(self):
        rng = np.random.default_rng(10)
        n_t, n_nodes = 30, 4
        truth_times = np.arange(n_t) * 0.1
        truth_pos = rng.uniform(0, 10, size=(1, n_nodes, 3)).repeat(n_t, axis=0)
        truth_off = np.zeros((n_t, n_nodes))
        truth_off[:, 1:] = rng.normal(0, 1e-5, size=(1, n_nodes - 1)).repeat(n_t, axis=0)
        est_pos = truth_pos + rng.normal(0, 0.05, size=truth_pos.shape)
        est_off = truth_off + rng.normal(0, 1e-7, size=truth_off.shape)
        report = build_report(
            truth_times, est_pos, est_off, truth_times, truth_pos, truth_off
        )
        summary = report.summary()
        # independent recomputation from the raw series
        assert summary["localization_m"]["mean"] == pytest.approx(
            float(report.localization.mean(axis=0).mean()), rel=1e-12
        )
        assert summary["sync_s"]["per_node_mean"][0] == 0.0
        assert summary["skipped_instants"] == 0
        assert isinstance(report, ErrorReport)
