"""Mini-batch training of the recurrent mixture model.

Adam on the mean mixture NLL with global gradient-norm clipping,
shuffled batches, a held-out validation split evaluated every epoch,
and optional early stopping.  Training is a single foreground job; no
weights are shared with a live inference session.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint
from .dataset import Dataset, make_windows
from .errors import DataError, TrainingDiverged
from .network import ModelConfig, Weights, backward, forward_sequence, init_weights

log = logging.getLogger(__name__)


@dataclass
class TrainRun:
    """Optimization settings for one training job."""

    epochs: int
    batch_size: int = 64
    learning_rate: float = 1e-4
    validation_fraction: float = 0.10
    early_stop_patience: int | None = None
    clip_norm: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochStats]
    stopped_early: bool = False
    train_indices: np.ndarray | None = None
    val_indices: np.ndarray | None = None


class Adam:
    """Adam with in-place updates and global gradient-norm clipping."""

    def __init__(self, weights: Weights, lr: float, clip_norm: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.clip_norm = clip_norm
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in weights.arrays().items()}
        self.v = {k: np.zeros_like(v) for k, v in weights.arrays().items()}

    def step(self, weights: Weights, grads: Weights) -> None:
        garrs = grads.arrays()
        norm = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in garrs.values())))
        scale = 1.0 if norm <= self.clip_norm or norm == 0.0 else self.clip_norm / norm
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, param in weights.arrays().items():
            g = garrs[name] * scale
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            param -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        weights.bump_version()


def split_examples(n_examples: int, fraction: float, rng: np.random.Generator):
    """Random example-level split with a fixed seed; val gets
    int(n*fraction) examples (at least 1 when there are >= 2)."""
    order = rng.permutation(n_examples)
    n_val = int(n_examples * fraction)
    if n_val == 0 and n_examples >= 2:
        n_val = 1
    return order[n_val:], order[:n_val]


def evaluate_loss(inputs, targets, weights, cfg, chunk: int = 256) -> float:
    """Mean NLL over a set of examples, evaluated in chunks."""
    if len(inputs) == 0:
        return float("nan")
    total = 0.0
    for start in range(0, len(inputs), chunk):
        xb = inputs[start : start + chunk]
        yb = targets[start : start + chunk]
        loss, _ = forward_sequence(xb, yb, weights, cfg)
        total += loss * len(xb)
    return total / len(inputs)


def train(dataset: Dataset, cfg: ModelConfig, run: TrainRun) -> TrainResult:
    """Fit the model and return the best-validation checkpoint.

    Raises :class:`DataError` if the dataset yields no training windows
    and :class:`TrainingDiverged` if the loss becomes non-finite.
    """
    inputs, targets = make_windows(dataset, cfg.seq_len)
    if len(inputs) == 0:
        raise DataError(
            f"dataset yields no training windows at seq_len={cfg.seq_len}; "
            "sessions must be longer than seq_len"
        )
    rng = np.random.default_rng(run.seed)
    train_idx, val_idx = split_examples(len(inputs), run.validation_fraction, rng)
    if len(train_idx) == 0:
        raise DataError("no training examples left after the validation split")
    x_train, y_train = inputs[train_idx], targets[train_idx]
    x_val, y_val = inputs[val_idx], targets[val_idx]
    log.info(
        "training on %d examples, validating on %d (%d total windows)",
        len(train_idx), len(val_idx), len(inputs),
    )

    weights = init_weights(cfg, rng)
    optimizer = Adam(weights, lr=run.learning_rate, clip_norm=run.clip_norm)

    history: list[EpochStats] = []
    best_val = float("inf")
    best_weights = weights.astype(weights.head_kernel.dtype)
    best_epoch = 0
    epochs_without_improvement = 0
    stopped_early = False
    started = time.perf_counter()

    for epoch in range(1, run.epochs + 1):
        order = rng.permutation(len(x_train))
        epoch_loss = 0.0
        for start in range(0, len(order), run.batch_size):
            batch = order[start : start + run.batch_size]
            loss, cache = forward_sequence(x_train[batch], y_train[batch], weights, cfg)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became non-finite at epoch {epoch}, "
                    f"batch {start // run.batch_size} (loss={loss})"
                )
            grads = backward(cache, weights, cfg)
            optimizer.step(weights, grads)
            epoch_loss += loss * len(batch)
        train_loss = epoch_loss / len(order)
        val_loss = evaluate_loss(x_val, y_val, weights, cfg)
        history.append(EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        log.info("epoch %d: train %.4f  val %.4f", epoch, train_loss, val_loss)

        if np.isfinite(val_loss) and val_loss < best_val:
            best_val = val_loss
            best_weights = weights.astype(weights.head_kernel.dtype)
            best_epoch = epoch
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if run.early_stop_patience and epochs_without_improvement >= run.early_stop_patience:
                stopped_early = True
                log.info(
                    "early stop at epoch %d: no validation improvement for %d epochs",
                    epoch, run.early_stop_patience,
                )
                break

    if not np.isfinite(best_val):  # no validation set: keep the final weights
        best_weights = weights
        best_epoch = history[-1].epoch if history else 0
    checkpoint = Checkpoint(
        config=cfg,
        weights=best_weights,
        metadata={
            "epochs_run": len(history),
            "best_epoch": best_epoch,
            "best_val_loss": None if not np.isfinite(best_val) else best_val,
            "rng_seed": run.seed,
            "train_examples": int(len(train_idx)),
            "val_examples": int(len(val_idx)),
            "wall_seconds": round(time.perf_counter() - started, 3),
        },
    )
    return TrainResult(
        checkpoint=checkpoint,
        history=history,
        stopped_early=stopped_early,
        train_indices=train_idx,
        val_indices=val_idx,
    )


def write_history_csv(path: str | Path, history: list[EpochStats]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for row in history:
            writer.writerow([row.epoch, f"{row.train_loss:.6f}", f"{row.val_loss:.6f}"])


def size_comparison_report(
    dataset: Dataset,
    dimension: int,
    unit_sizes: tuple[int, ...] = (64, 256),
    epochs: int = 10,
    run: TrainRun | None = None,
    seq_len: int = 50,
) -> str:
    """Train the same data at several widths and report the loss gap.

    Qualitative only: larger networks tend to reach a lower training
    loss while the validation loss exposes overfitting on small
    datasets.  Returns a plain-text table; nothing is asserted.
    """
    run = run or TrainRun(epochs=epochs)
    lines = [
        f"size comparison on {dataset.total_samples()} samples, "
        f"{epochs} epochs, batch {run.batch_size}",
        f"{'units':>6} {'final train loss':>17} {'best val loss':>14} {'gap':>9}",
    ]
    for units in unit_sizes:
        cfg = ModelConfig(dimension=dimension, units=units, seq_len=seq_len)
        result = train(dataset, cfg, TrainRun(
            epochs=epochs,
            batch_size=run.batch_size,
            learning_rate=run.learning_rate,
            validation_fraction=run.validation_fraction,
            seed=run.seed,
        ))
        final_train = result.history[-1].train_loss
        best_val = min(h.val_loss for h in result.history)
        lines.append(
            f"{units:>6} {final_train:>17.4f} {best_val:>14.4f} {best_val - final_train:>9.4f}"
        )
    lines.append("a larger val-minus-train gap suggests the width overfits this dataset")
    return "\n".join(lines)
