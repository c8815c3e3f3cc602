"""Dataset ingestion: CSV logs -> delta-time training sessions.

A session log is a CSV with header ``time,x1,...,x{N-1}``; one control
event per row, timestamps in seconds.  Training consumes sessions of
model vectors ``(dt, x1, ..., x{N-1})`` where dt is the time since the
previous event, so the first row of every log is dropped.  Window
extraction never crosses a session boundary.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

# Ingestion clamps. Long idle gaps would otherwise dominate the loss,
# and dt must stay strictly positive.
DT_MIN = 0.001
DT_CAP = 5.0


@dataclass
class RawLog:
    """Ordered rows of (timestamp, control values) from one session."""

    timestamps: np.ndarray  # (R,) seconds
    values: np.ndarray      # (R, N-1)
    source: str = ""


@dataclass
class Dataset:
    """A list of sessions, each an array of model vectors (dt first)."""

    sessions: list[np.ndarray] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        if not self.sessions:
            raise DataError("dataset has no sessions")
        return self.sessions[0].shape[1]

    def total_samples(self) -> int:
        return sum(len(s) for s in self.sessions)


def read_log_csv(path: str | Path, expected_values: int | None = None) -> RawLog:
    """Parse one session log.

    Raises :class:`DataError` on a missing/bad header, an inconsistent
    column count, or non-numeric cells.
    """
    path = Path(path)
    times: list[float] = []
    rows: list[list[float]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "time":
            raise DataError(f"{path}: expected header starting with 'time'")
        width = len(header) - 1
        if expected_values is not None and width != expected_values:
            raise DataError(
                f"{path}: header has {width} value columns, expected {expected_values}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise DataError(f"{path}:{lineno}: expected {width + 1} columns, got {len(row)}")
            try:
                times.append(float(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
    return RawLog(
        timestamps=np.asarray(times, dtype=np.float64),
        values=np.asarray(rows, dtype=np.float64).reshape(len(rows), width),
        source=str(path),
    )


def compute_deltas(raw: RawLog) -> np.ndarray:
    """Convert absolute timestamps to clamped time deltas.

    Row i (i >= 1) becomes ``(clamp(t_i - t_{i-1}), values_i)`` with dt
    clamped to [DT_MIN, DT_CAP] and values clamped to [0, 1]; the first
    row has no predecessor and is dropped.
    """
    n_rows = len(raw.timestamps)
    if n_rows < 2:
        raise DataError(f"{raw.source or 'log'}: need at least 2 rows, got {n_rows}")
    diffs = np.diff(raw.timestamps)
    bad = np.nonzero(diffs < 0)[0]
    if bad.size:
        row = int(bad[0]) + 1
        raise DataError(f"{raw.source or 'log'}: timestamps decrease at row {row}")
    dts = np.clip(diffs, DT_MIN, DT_CAP)
    values = raw.values[1:]
    if np.any(values < 0) or np.any(values > 1):
        log.warning(
            "%s: %d control values outside [0, 1] were clamped",
            raw.source or "log",
            int(np.sum((values < 0) | (values > 1))),
        )
        values = np.clip(values, 0.0, 1.0)
    return np.column_stack([dts, values]).astype(np.float32)


def load_dataset(data_dir: str | Path, dimension: int) -> Dataset:
    """Ingest every ``*.csv`` under ``data_dir`` as one session each.

    Prediction echo logs (``*-predictions.csv``) are skipped so model
    output never trains the model.  Sessions too short to use are
    skipped with a warning.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory not found: {data_dir}")
    sessions = []
    for path in sorted(data_dir.glob("*.csv")):
        if path.stem.endswith("-predictions"):
            continue
        raw = read_log_csv(path, expected_values=dimension - 1)
        try:
            sessions.append(compute_deltas(raw))
        except DataError as exc:
            log.warning("skipping %s: %s", path, exc)
    if not sessions:
        raise DataError(f"no usable session logs under {data_dir}")
    return Dataset(sessions=sessions)


def make_windows(dataset: Dataset, seq_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Stride-1 overlapping training windows.

    Each session of length L yields max(0, L - seq_len) examples: the
    window covers seq_len+1 consecutive samples, inputs are steps
    0..seq_len-1 and targets are steps 1..seq_len.  Windows never span
    sessions.

    Returns (inputs, targets), each of shape (M, seq_len, N).
    """
    if seq_len < 1:
        raise ValueError("seq_len must be >= 1")
    xs, ys = [], []
    for session in dataset.sessions:
        length = len(session)
        for start in range(length - seq_len):
            xs.append(session[start : start + seq_len])
            ys.append(session[start + 1 : start + seq_len + 1])
    n = dataset.dimension if dataset.sessions else 0
    if not xs:
        return (
            np.zeros((0, seq_len, n), dtype=np.float32),
            np.zeros((0, seq_len, n), dtype=np.float32),
        )
    return np.stack(xs), np.stack(ys)


def synthetic_sine_dataset(
    n_samples: int,
    dt: float = 0.05,
    period: float = 2.0,
    seed: int = 0,
    noise: float = 0.0,
) -> Dataset:
    """A fixed 2D pattern for smoke training: constant dt, sine value.

    The value traces 0.5 + 0.4*sin(2*pi*t/period) sampled every ``dt``
    seconds, optionally with Gaussian jitter, clipped to [0, 1].
    """
    t = np.arange(n_samples) * dt
    x = 0.5 + 0.4 * np.sin(2 * np.pi * t / period)
    if noise > 0:
        x = x + np.random.default_rng(seed).normal(scale=noise, size=n_samples)
    session = np.column_stack([np.full(n_samples, dt), np.clip(x, 0, 1)]).astype(np.float32)
    return Dataset(sessions=[session])
