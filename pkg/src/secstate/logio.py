"""Line-delimited log formats shared by the pipeline stages.

Both files start with a versioned header object; every following line is one
record. Numbers round-trip exactly (JSON float repr), so identical inputs
produce byte-identical files.

Measurement log record: ``{"i", "t", "k", "j", "kind", "value", "truth"?}``
where ``truth`` (positions/offsets/biases) is attached to the first record
of each event and omitted while unchanged.

Trace record: ``{"step", "t", "mean", "pos_std"?, "off_std"?}`` with the
mean packed node-major using the header's ``node_dim``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import Measurement, MeasurementKind, NetworkState, NodeState
from .simulate import SimRecord

MEASUREMENT_SCHEMA = "secstate.measurements"
TRACE_SCHEMA = "secstate.trace"
FORMAT_VERSION = 1


class LogFormatError(ValueError):
    """Schema or version mismatch between pipeline stages."""


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _truth_payload(truth: NetworkState) -> dict:
    return {
        "p": [[float(x) for x in node.position] for node in truth.nodes],
        "o": [float(node.offset) for node in truth.nodes],
        "b": [float(node.bias) for node in truth.nodes],
    }


def _truth_from_payload(payload: dict, master_index: int) -> NetworkState:
    nodes = tuple(
        NodeState(position=p, offset=o, bias=b)
        for p, o, b in zip(payload["p"], payload["o"], payload["b"])
    )
    return NetworkState(nodes=nodes, master_index=master_index)


def _check_header(header: dict, schema: str, path: Path) -> None:
    if header.get("schema") != schema:
        raise LogFormatError(
            f"{path}: expected schema {schema!r}, found {header.get('schema')!r}"
        )
    if header.get("version") != FORMAT_VERSION:
        raise LogFormatError(
            f"{path}: unsupported format version {header.get('version')!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )


@dataclass(frozen=True)
class LogEntry:
    """One measurement log line, with the truth snapshot when it was attached."""

    index: int
    measurement: Measurement
    truth: NetworkState | None


def write_measurement_log(
    path: str | Path,
    records: Iterable[SimRecord],
    n_nodes: int,
    master_index: int = 0,
    meta: dict | None = None,
) -> None:
    path = Path(path)
    header = {
        "schema": MEASUREMENT_SCHEMA,
        "version": FORMAT_VERSION,
        "n_nodes": n_nodes,
        "master": master_index,
    }
    header.update(meta or {})
    with path.open("w") as fh:
        fh.write(_dump(header) + "\n")
        last_truth = None
        for record in records:
            m = record.measurement
            row = {
                "i": record.index,
                "t": m.time,
                "k": m.initiator,
                "j": m.responder,
                "kind": m.kind.value,
                "value": m.value,
            }
            if record.truth is not None and record.truth is not last_truth:
                row["truth"] = _truth_payload(record.truth)
                last_truth = record.truth
            fh.write(_dump(row) + "\n")


def read_measurement_log(path: str | Path) -> tuple[dict, list[LogEntry]]:
    path = Path(path)
    with path.open() as fh:
        header_line = fh.readline()
        if not header_line:
            raise LogFormatError(f"{path}: empty file")
        header = json.loads(header_line)
        _check_header(header, MEASUREMENT_SCHEMA, path)
        master = int(header["master"])
        entries: list[LogEntry] = []
        for line in fh:
            row = json.loads(line)
            measurement = Measurement(
                time=float(row["t"]),
                initiator=int(row["k"]),
                responder=int(row["j"]),
                kind=MeasurementKind(row["kind"]),
                value=float(row["value"]),
            )
            truth = _truth_from_payload(row["truth"], master) if "truth" in row else None
            entries.append(LogEntry(index=int(row["i"]), measurement=measurement, truth=truth))
    return header, entries


def truth_arrays(entries: list[LogEntry]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Snapshot times/positions/offsets from a measurement log."""
    times, positions, offsets = [], [], []
    for entry in entries:
        if entry.truth is not None:
            times.append(entry.measurement.time)
            positions.append(entry.truth.positions())
            offsets.append(entry.truth.offsets())
    return np.asarray(times), np.asarray(positions), np.asarray(offsets)


@dataclass(frozen=True)
class TraceRow:
    step: int
    time: float
    mean: np.ndarray
    pos_std: np.ndarray | None = None
    off_std: np.ndarray | None = None


def write_trace(
    path: str | Path,
    estimator: str,
    n_nodes: int,
    node_dim: int,
    rows: Iterable[TraceRow],
    master_index: int = 0,
    meta: dict | None = None,
) -> None:
    path = Path(path)
    header = {
        "schema": TRACE_SCHEMA,
        "version": FORMAT_VERSION,
        "estimator": estimator,
        "n_nodes": n_nodes,
        "node_dim": node_dim,
        "master": master_index,
    }
    header.update(meta or {})
    with path.open("w") as fh:
        fh.write(_dump(header) + "\n")
        for row in rows:
            payload = {
                "step": row.step,
                "t": row.time,
                "mean": [float(x) for x in row.mean],
            }
            if row.pos_std is not None:
                payload["pos_std"] = [float(x) for x in np.ravel(row.pos_std)]
            if row.off_std is not None:
                payload["off_std"] = [float(x) for x in np.ravel(row.off_std)]
            fh.write(_dump(payload) + "\n")


def read_trace(path: str | Path) -> tuple[dict, list[TraceRow]]:
    path = Path(path)
    with path.open() as fh:
        header_line = fh.readline()
        if not header_line:
            raise LogFormatError(f"{path}: empty file")
        header = json.loads(header_line)
        _check_header(header, TRACE_SCHEMA, path)
        rows = []
        for line in fh:
            row = json.loads(line)
            rows.append(
                TraceRow(
                    step=int(row["step"]),
                    time=float(row["t"]),
                    mean=np.asarray(row["mean"], dtype=float),
                    pos_std=np.asarray(row["pos_std"], dtype=float) if "pos_std" in row else None,
                    off_std=np.asarray(row["off_std"], dtype=float) if "off_std" in row else None,
                )
            )
    return header, rows


def trace_positions_offsets(header: dict, rows: list[TraceRow]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Times, (T, N, 3) positions, and (T, N) offsets from a trace."""
    n = int(header["n_nodes"])
    nd = int(header["node_dim"])
    times = np.array([row.time for row in rows])
    means = np.array([row.mean for row in rows]).reshape(len(rows), n, nd)
    return times, means[:, :, :3], means[:, :, 3]
