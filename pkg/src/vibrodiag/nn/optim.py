"""SGD with momentum and weight decay, plus the warm-up/milestone learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 0.1
    batch_size: int = 4
    warmup_epochs: int = 10
    weight_decay: float = 0.04
    epochs: int = 200
    milestones: Tuple[int, ...] = (60, 120, 160)
    milestone_factor: float = 0.2
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "milestones", tuple(int(m) for m in self.milestones))
        if self.base_lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("base_lr, batch_size and epochs must be positive")
        if self.warmup_epochs < 0 or self.weight_decay < 0 or self.momentum < 0:
            raise ValueError("warmup_epochs, weight_decay and momentum must be nonnegative")
        if not 0 < self.milestone_factor <= 1:
            raise ValueError("milestone_factor must lie in (0, 1]")
        ms = self.milestones
        if any(m < 1 for m in ms) or list(ms) != sorted(set(ms)) or (ms and ms[-1] >= self.epochs):
            raise ValueError("milestones must be ascending, positive and below epochs")


def lr_at_epoch(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for a 1-based epoch: linear warm-up, then step decay at each milestone."""
    if not 1 <= epoch <= cfg.epochs:
        raise ValueError(f"epoch {epoch} outside 1..{cfg.epochs}")
    if cfg.warmup_epochs and epoch <= cfg.warmup_epochs:
        return cfg.base_lr * epoch / cfg.warmup_epochs
    passed = sum(1 for m in cfg.milestones if m <= epoch)
    return cfg.base_lr * cfg.milestone_factor**passed


@dataclass
class OptimState:
    buffers: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def like(cls, params: Sequence[np.ndarray]):
        return cls([np.zeros_like(p) for p in params])


def sgd_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: OptimState, lr: float, cfg: TrainConfig):
    """In-place momentum SGD with L2 weight decay folded into the gradient."""
    if not state.buffers:
        state.buffers = [np.zeros_like(p) for p in params]
    if not len(params) == len(grads) == len(state.buffers):
        raise ValueError("params, grads and momentum buffers differ in count")
    for p, g, buf in zip(params, grads, state.buffers):
        if p.shape != g.shape or p.shape != buf.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, buffer {buf.shape}")
        step = g + cfg.weight_decay * p
        buf *= cfg.momentum
        buf += step
        p -= (lr * buf).astype(p.dtype)
    return params, state
