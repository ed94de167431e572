"""Error metrics: rigid alignment, localization and synchronization series.

Relative localization carries a rigid-transform gauge freedom, so estimated
positions are registered onto the truth per evaluation instant with a
rotation+translation (never scale) before taking per-node residual norms.
Synchronization error needs no alignment: it compares offset differences
against a reference node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AlignmentResult:
    """Rigid registration of an estimated point set onto the truth."""

    rotation: np.ndarray
    translation: np.ndarray
    valid: bool
    rms: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


def procrustes_align(estimated: np.ndarray, truth: np.ndarray) -> AlignmentResult:
    """Best rotation+translation mapping ``estimated`` onto ``truth`` (Kabsch).

    Reflections are disallowed (determinant forced to +1). Fewer than three
    points, or a collinear set, cannot pin a rotation: the result is flagged
    invalid and carries the identity rotation with a centroid shift.
    """
    estimated = np.asarray(estimated, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimated.shape != truth.shape or estimated.ndim != 2 or estimated.shape[1] != 3:
        raise ValueError("point sets must both have shape (n, 3)")
    centroid_est = estimated.mean(axis=0)
    centroid_true = truth.mean(axis=0)
    degenerate = estimated.shape[0] < 3
    if not degenerate:
        spread = np.linalg.svd(estimated - centroid_est, compute_uv=False)
        degenerate = spread[1] <= 1e-9 * max(spread[0], 1e-12)
    if degenerate:
        rotation = np.eye(3)
        translation = centroid_true - centroid_est
        rms = float(np.sqrt(np.mean(np.sum((estimated + translation - truth) ** 2, axis=1))))
        return AlignmentResult(rotation, translation, valid=False, rms=rms)
    h = (estimated - centroid_est).T @ (truth - centroid_true)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    translation = centroid_true - rotation @ centroid_est
    aligned = estimated @ rotation.T + translation
    rms = float(np.sqrt(np.mean(np.sum((aligned - truth) ** 2, axis=1))))
    return AlignmentResult(rotation, translation, valid=True, rms=rms)


def match_instants(
    trace_times: np.ndarray, truth_times: np.ndarray, max_gap: float = np.inf
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest truth snapshot per trace instant.

    Returns (indices into truth, keep mask); instants whose nearest snapshot
    is farther than ``max_gap`` seconds are dropped from the mask.
    """
    trace_times = np.asarray(trace_times, dtype=float)
    truth_times = np.asarray(truth_times, dtype=float)
    if truth_times.size == 0:
        return np.zeros(0, dtype=int), np.zeros(trace_times.size, dtype=bool)
    pos = np.searchsorted(truth_times, trace_times)
    left = np.clip(pos - 1, 0, truth_times.size - 1)
    right = np.clip(pos, 0, truth_times.size - 1)
    pick_right = np.abs(truth_times[right] - trace_times) < np.abs(
        truth_times[left] - trace_times
    )
    idx = np.where(pick_right, right, left)
    keep = np.abs(truth_times[idx] - trace_times) <= max_gap
    return idx, keep


def localization_error(
    est_positions: np.ndarray,
    truth_positions: np.ndarray,
    align_ids: np.ndarray | None = None,
) -> tuple[np.ndarray, list[AlignmentResult]]:
    """Per-instant, per-node aligned position error (meters).

    ``est_positions`` and ``truth_positions`` are (T, N, 3) with matching
    instants. The alignment is fitted per instant over ``align_ids`` (all
    nodes when None) and applied to the whole set, so a tracked mobile node
    can be registered through the static anchors.
    """
    est_positions = np.asarray(est_positions, dtype=float)
    truth_positions = np.asarray(truth_positions, dtype=float)
    if est_positions.shape != truth_positions.shape:
        raise ValueError("estimate/truth position arrays must have identical shape")
    n_instants = est_positions.shape[0]
    errors = np.zeros(est_positions.shape[:2])
    alignments: list[AlignmentResult] = []
    ids = np.arange(est_positions.shape[1]) if align_ids is None else np.asarray(align_ids)
    for t in range(n_instants):
        alignment = procrustes_align(est_positions[t, ids], truth_positions[t, ids])
        aligned = alignment.apply(est_positions[t])
        errors[t] = np.linalg.norm(aligned - truth_positions[t], axis=1)
        alignments.append(alignment)
    return errors, alignments


def sync_error(
    est_offsets: np.ndarray, truth_offsets: np.ndarray, reference: int = 0
) -> np.ndarray:
    """Per-instant, per-node offset error (seconds) relative to ``reference``.

    ``|(o_hat_k - o_hat_ref) - (o_k - o_ref)|``; the reference node's column
    is identically zero.
    """
    est_offsets = np.asarray(est_offsets, dtype=float)
    truth_offsets = np.asarray(truth_offsets, dtype=float)
    if est_offsets.shape != truth_offsets.shape:
        raise ValueError("estimate/truth offset arrays must have identical shape")
    est_rel = est_offsets - est_offsets[:, [reference]]
    true_rel = truth_offsets - truth_offsets[:, [reference]]
    return np.abs(est_rel - true_rel)


@dataclass
class ErrorReport:
    """Per-node series plus the aggregate rows reported in summaries."""

    times: np.ndarray
    localization: np.ndarray  # (T, N) meters
    sync: np.ndarray  # (T, N) seconds
    skipped_instants: int
    reference: int

    def per_node_localization_mean(self) -> np.ndarray:
        return self.localization.mean(axis=0)

    def per_node_sync_mean(self) -> np.ndarray:
        return self.sync.mean(axis=0)

    def summary(self) -> dict:
        """Aggregates shaped like the usual per-node tables.

        Localization aggregates run over all nodes; synchronization excludes
        the reference node (its error is identically zero).
        """
        loc_means = self.per_node_localization_mean()
        sync_means = self.per_node_sync_mean()
        non_ref = [k for k in range(sync_means.size) if k != self.reference]
        return {
            "instants": int(self.localization.shape[0]),
            "skipped_instants": int(self.skipped_instants),
            "localization_m": {
                "per_node_mean": [float(v) for v in loc_means],
                "mean": float(loc_means.mean()),
                "std": float(loc_means.std()),
            },
            "sync_s": {
                "reference": int(self.reference),
                "per_node_mean": [float(v) for v in sync_means],
                "mean": float(sync_means[non_ref].mean()),
                "std": float(sync_means[non_ref].std()),
            },
        }


def build_report(
    trace_times: np.ndarray,
    est_positions: np.ndarray,
    est_offsets: np.ndarray,
    truth_times: np.ndarray,
    truth_positions: np.ndarray,
    truth_offsets: np.ndarray,
    align_ids: np.ndarray | None = None,
    reference: int = 0,
    max_gap: float = np.inf,
) -> ErrorReport:
    """Match instants to truth snapshots and compute both error series."""
    idx, keep = match_instants(trace_times, truth_times, max_gap)
    skipped = int(np.count_nonzero(~keep))
    idx = idx[keep]
    times = np.asarray(trace_times, dtype=float)[keep]
    loc, _ = localization_error(
        np.asarray(est_positions)[keep], np.asarray(truth_positions)[idx], align_ids
    )
    sync = sync_error(np.asarray(est_offsets)[keep], np.asarray(truth_offsets)[idx], reference)
    return ErrorReport(
        times=times,
        localization=loc,
        sync=sync,
        skipped_instants=skipped,
        reference=reference,
    )
