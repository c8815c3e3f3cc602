"""Prediction-latency benchmark.

Times one inference step plus sampling (the live per-prediction cost)
across a grid of data dimensions and LSTM widths, with fresh random
weights per configuration.  The first measurement of every
configuration is discarded as setup overhead.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mixture import SamplingConfig, sample
from .network import ModelConfig, RecurrentState, forward_step, init_weights

DEFAULT_DIMENSIONS = tuple(range(2, 10))
DEFAULT_UNIT_SIZES = (64, 128, 256, 512)


@dataclass
class BenchmarkRow:
    units: int
    dimension: int
    mean_ms: float
    sd_ms: float


def time_config(
    cfg: ModelConfig, repeats: int, seed: int = 0, sampling: SamplingConfig | None = None
) -> tuple[float, float]:
    """Mean and SD of the per-prediction wall time in milliseconds.

    ``repeats`` counts total measurements; the first is discarded, so at
    least 3 are required to leave two timed runs.
    """
    if repeats < 3:
        raise ValueError("repeats must be >= 3 (need at least 2 measurements after discard)")
    rng = np.random.default_rng(seed)
    weights = init_weights(cfg, rng)
    state = RecurrentState(cfg)
    sampling = sampling or SamplingConfig()
    x = np.full(cfg.dimension, 0.5, dtype=np.float32)
    x[0] = 0.05
    timings = np.empty(repeats)
    for i in range(repeats):
        start = time.perf_counter()
        params = forward_step(x, state, weights, cfg)
        drawn = sample(params, sampling, rng)
        timings[i] = time.perf_counter() - start
        x = drawn.as_array()  # self-condition, as the live generator does
    timed = timings[1:] * 1e3
    return float(timed.mean()), float(timed.std(ddof=1))


def sweep_dimensions(
    dimensions=DEFAULT_DIMENSIONS,
    units: int = 64,
    rounds: int = 600,
    layers: int = 2,
    mixtures: int = 5,
    seed: int = 0,
) -> dict[int, float]:
    """Per-dimension mean prediction time, measured round-robin.

    Interleaving one call per dimension per round exposes every
    configuration to the same background-load drift, which makes the
    across-dimension comparison fair on busy machines.  Returns
    {dimension: mean_ms} with each configuration's first round dropped.
    """
    sampling = SamplingConfig()
    setups = []
    for dim in dimensions:
        cfg = ModelConfig(dimension=dim, units=units, layers=layers, mixtures=mixtures)
        rng = np.random.default_rng(seed)
        weights = init_weights(cfg, rng)
        x = np.full(dim, 0.5, dtype=np.float32)
        x[0] = 0.05
        setups.append([cfg, weights, RecurrentState(cfg), x, rng, np.empty(rounds)])
    for r in range(rounds):
        for setup in setups:
            cfg, weights, state, x, rng, timings = setup
            start = time.perf_counter()
            params = forward_step(x, state, weights, cfg)
            drawn = sample(params, sampling, rng)
            timings[r] = time.perf_counter() - start
            setup[3] = drawn.as_array()
    return {
        setup[0].dimension: float(setup[5][1:].mean() * 1e3) for setup in setups
    }


def run_grid(
    dimensions=DEFAULT_DIMENSIONS,
    unit_sizes=DEFAULT_UNIT_SIZES,
    repeats: int = 100,
    layers: int = 2,
    mixtures: int = 5,
    progress=None,
) -> list[BenchmarkRow]:
    rows = []
    for units in unit_sizes:
        for dim in dimensions:
            cfg = ModelConfig(dimension=dim, units=units, layers=layers, mixtures=mixtures)
            mean_ms, sd_ms = time_config(cfg, repeats)
            rows.append(BenchmarkRow(units=units, dimension=dim, mean_ms=mean_ms, sd_ms=sd_ms))
            if progress is not None:
                progress(rows[-1])
    return rows


def write_benchmark_csv(path: str | Path, rows: list[BenchmarkRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["units", "dimension", "mean_ms", "sd_ms"])
        for row in rows:
            writer.writerow([row.units, row.dimension, f"{row.mean_ms:.4f}", f"{row.sd_ms:.4f}"])
