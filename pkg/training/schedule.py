"""Piecewise-constant learning-rate schedule."""

from bisect import bisect_right

import torch

from training.config import OptimConfig


def lr_at(epoch: int, cfg: OptimConfig) -> float:
    """lr0 multiplied by `decay` once for every milestone <= epoch."""
    return cfg.lr * cfg.decay ** bisect_right(list(cfg.milestones), epoch)


def apply_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr
