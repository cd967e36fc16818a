"""Mini-batch training loop."""
from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .._random import substream
from ..errors import TrainingDiverged
from .functional import softmax_cross_entropy
from .model import Network
from .optim import OptimState, TrainConfig, lr_at_epoch, sgd_step

log = logging.getLogger(__name__)


@dataclass
class EpochStats:
    epoch: int
    lr: float
    loss: float
    accuracy: float
    steps: int

    def to_dict(self):
        return {"epoch": self.epoch, "lr": self.lr, "loss": self.loss, "accuracy": self.accuracy, "steps": self.steps}


@dataclass
class TrainResult:
    trace: List[EpochStats] = field(default_factory=list)
    step_losses: List[float] = field(default_factory=list)

    @property
    def steps(self):
        return len(self.step_losses)


def epoch_batches(n, batch_size, rng):
    """Shuffled index batches; a trailing singleton is folded into the previous batch."""
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate(batches[-2:])
        batches.pop()
    return batches


def train(
    net: Network,
    x,
    y,
    cfg: TrainConfig,
    deterministic: bool = True,
    max_steps: Optional[int] = None,
    on_epoch: Optional[Callable[[EpochStats], None]] = None,
) -> TrainResult:
    """Train ``net`` in place on ``(x, y)`` for ``cfg.epochs`` epochs.

    ``deterministic`` pins BLAS to one thread so repeated runs are bit-identical.
    ``max_steps`` stops early after that many optimizer steps.
    """
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise ValueError("empty training set")
    if len(x) != len(y):
        raise ValueError("inputs and labels differ in length")
    params = net.parameters()
    state = OptimState.like([p.values for p in params])
    result = TrainResult()
    limiter = threadpool_limits(limits=1) if deterministic else contextlib.nullcontext()
    with limiter:
        for epoch in range(1, cfg.epochs + 1):
            lr = lr_at_epoch(epoch, cfg)
            rng = substream(cfg.seed, "shuffle", epoch)
            total_loss, correct, seen, steps = 0.0, 0, 0, 0
            for idx in epoch_batches(len(x), cfg.batch_size, rng):
                xb = np.asarray(x[idx], dtype=net.dtype)
                logits = net.forward(xb, training=True)
                loss, grad = softmax_cross_entropy(logits, y[idx])
                if not math.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, step {steps + 1} (lr={lr:g}); "
                        "try a lower learning rate or weight decay"
                    )
                net.backward(grad)
                sgd_step([p.values for p in params], [p.grad for p in params], state, lr, cfg)
                result.step_losses.append(loss)
                total_loss += loss * len(idx)
                correct += int(np.sum(np.argmax(logits, axis=1) == y[idx]))
                seen += len(idx)
                steps += 1
                if max_steps is not None and result.steps >= max_steps:
                    break
            stats = EpochStats(epoch, lr, total_loss / seen, correct / seen, steps)
            result.trace.append(stats)
            log.info("epoch %d lr %.4g loss %.4f acc %.3f", epoch, lr, stats.loss, stats.accuracy)
            if on_epoch:
                on_epoch(stats)
            if max_steps is not None and result.steps >= max_steps:
                break
    return result
