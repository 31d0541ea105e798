"""Mini-batch training with MSE on smoothed memberships and Adam."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .network import Network, NetworkConfig, backward, build_network, forward_training
from .numerics import NonFiniteGradientError, adam_step, init_adam, mse_loss
from .targets import PatchSet, split_train_validation

__all__ = [
    "TrainingConfig",
    "EpochRecord",
    "TrainingLog",
    "TrainingDivergedError",
    "batch_gradients",
    "evaluate_loss",
    "train",
    "train_two_raters",
]

log = logging.getLogger(__name__)


class TrainingDivergedError(ArithmeticError):
    """Loss or gradient went non-finite; carries epoch/batch in the message."""


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 1e-4
    validation_fraction: float = 0.2
    seed: int = 0
    patch: Tuple[int, int] = (35, 35)
    eval_batch_size: int = 64

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float = field(default=0.0, compare=False)


@dataclass
class TrainingLog:
    """Per-epoch losses. Equality ignores wall time."""

    epochs: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def train_loss(self) -> List[float]:
        return [e.train_loss for e in self.epochs]

    @property
    def val_loss(self) -> List[float]:
        return [e.val_loss for e in self.epochs]

    def to_csv(self, include_time: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["epoch", "train_loss", "val_loss"] + (["seconds"] if include_time else [])
        writer.writerow(header)
        for e in self.epochs:
            row = [e.epoch, repr(e.train_loss), repr(e.val_loss)]
            if include_time:
                row.append(f"{e.seconds:.3f}")
            writer.writerow(row)
        return buf.getvalue()


def batch_gradients(
    net: Network, inputs: Sequence[np.ndarray], target: np.ndarray
) -> Tuple[float, List[np.ndarray]]:
    """MSE loss on one batch and its parameter gradients (averaged over the batch)."""
    pred, cache = forward_training(net, inputs)
    loss, grad = mse_loss(pred, target.astype(pred.dtype, copy=False))
    return loss, backward(net, cache, grad)


def evaluate_loss(net: Network, data: PatchSet, batch_size: int = 64) -> float:
    """Mean squared error over every voxel of every patch in ``data``."""
    total = 0.0
    count = 0
    for start in range(0, len(data), batch_size):
        sl = slice(start, start + batch_size)
        pred, _ = forward_training(net, [c[sl] for c in data.contrasts])
        diff = pred.astype(np.float64) - data.target[sl]
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


def train(
    net: Network,
    data: PatchSet,
    config: TrainingConfig = TrainingConfig(),
    progress: Optional[Callable[[EpochRecord], None]] = None,
) -> Tuple[Network, TrainingLog]:
    """Train on ``data`` for ``config.epochs`` passes and return the final-epoch model.

    ``data`` is split into training and validation parts with
    ``config.validation_fraction``. The training part is reshuffled every
    epoch; the last short batch is kept. The input network is not modified.
    """
    history = TrainingLog()
    if config.epochs == 0:
        return net, history
    if len(data) == 0:
        raise ValueError("no training patches")
    if len(data.contrasts) != net.config.num_contrasts:
        raise ValueError(
            f"patch set has {len(data.contrasts)} contrasts, network expects "
            f"{net.config.num_contrasts}"
        )

    train_set, val_set = split_train_validation(data, config.validation_fraction, config.seed)
    if len(val_set) == 0:
        raise ValueError("validation split is empty")

    rng = np.random.default_rng([config.seed, 1])
    params = [p.copy() for p in net.parameters()]
    state = init_adam(params, lr=config.learning_rate)
    n = len(train_set)

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        loss_sum = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            inputs = [c[idx] for c in train_set.contrasts]
            loss, grads = batch_gradients(net, inputs, train_set.target[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, batch {b}")
            try:
                params, state = adam_step(params, grads, state)
            except NonFiniteGradientError as exc:
                raise TrainingDivergedError(f"epoch {epoch}, batch {b}: {exc}") from exc
            net = net.with_parameters(params)
            loss_sum += loss * len(idx)

        val_loss = evaluate_loss(net, val_set, config.eval_batch_size)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        rec = EpochRecord(epoch, loss_sum / n, val_loss, time.perf_counter() - t0)
        history.epochs.append(rec)
        log.info(
            "epoch %d: train %.6g val %.6g (%.1fs)", epoch, rec.train_loss, val_loss, rec.seconds
        )
        if progress is not None:
            progress(rec)
    return net, history


def train_two_raters(
    seeds: Tuple[int, int],
    data_r1: PatchSet,
    data_r2: PatchSet,
    config: TrainingConfig = TrainingConfig(),
    net_config: NetworkConfig = NetworkConfig(),
) -> Tuple[Network, Network]:
    """Train one model per rater's masks, each from its own initialisation seed."""
    if len(data_r1) == 0 or len(data_r2) == 0:
        raise ValueError("both rater patch sets must be nonempty")
    net1, _ = train(build_network(net_config, seeds[0]), data_r1, config)
    net2, _ = train(build_network(net_config, seeds[1]), data_r2, config)
    return net1, net2
