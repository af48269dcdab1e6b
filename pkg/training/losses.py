"""
Loss assembly for the two training phases.

    L_total = L_sup + lambda_unsup * L_unsup
    L_sup   = L_d + lambda_r * L_r + lambda_dual * L_dual(sup)
    L_unsup = L_dual(unsup)

L1 terms are means over every element of the batch.
"""

import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import torch
import torch.nn.functional as F

from contrastive.augment import get_domain_transform
from contrastive.encoder import PerceptualEncoder
from contrastive.losses import ContrastiveWeights, supervised_dual_loss, unsupervised_dual_loss
from contrastive.memory_bank import MemoryBank, RainOrigin
from data_pipeline.types import LabeledBatch, UnlabeledBatch
from networks.model import SemiDRDNet
from training.config import TrainConfig
from utils.errors import TrainingDivergenceError

LABELED = "labeled"
UNLABELED = "unlabeled"


@dataclass
class LossReport:
    step: int
    epoch: int
    phase: str
    total: float
    sup: float
    unsup: float
    d: float
    r: float
    dual_sup: float
    dual_unsup: float
    lr: float

    FIELDS = ("step", "epoch", "phase", "total", "sup", "unsup", "d", "r", "dual_sup", "dual_unsup", "lr")

    def row(self) -> dict:
        return asdict(self)

    def is_finite(self) -> bool:
        return all(math.isfinite(getattr(self, name)) for name in ("total", "sup", "unsup", "d", "r",
                                                                  "dual_sup", "dual_unsup"))


def contrastive_weights(cfg: TrainConfig) -> ContrastiveWeights:
    c = cfg.contrastive
    return ContrastiveWeights(omegas=c.omegas, negatives=c.negatives, eps=c.eps, pair_floor=c.pair_floor)


def _check_finite(report: LossReport) -> None:
    if not report.is_finite():
        raise TrainingDivergenceError(
            f"non-finite {report.phase} loss at step {report.step}: total={report.total}", report=report
        )


def supervised_loss(batch: LabeledBatch, model: SemiDRDNet, encoder: Optional[PerceptualEncoder],
                    bank: MemoryBank, cfg: TrainConfig, seed: int = 0, step: int = 0, epoch: int = 0,
                    lr: float = 0.0) -> Tuple[torch.Tensor, LossReport]:
    """
    Labeled-phase loss. The detached rain estimate is pushed into the bank
    (origin synthetic) after the loss is computed.

    Raises:
        TrainingDivergenceError: the loss is not finite.
    """
    t = cfg.train
    outputs = model(batch.rainy)
    loss_r = F.l1_loss(outputs.rain, batch.streaks)
    loss_d = F.l1_loss(outputs.derained, batch.clean)
    loss = loss_d + t.lambda_r * loss_r
    dual = torch.zeros((), dtype=loss.dtype)
    if t.lambda_dual > 0:
        dual = supervised_dual_loss(
            outputs.derained, batch.clean, batch.rainy, bank, encoder, contrastive_weights(cfg),
            seed=seed, negative_augmentation=cfg.contrastive.negative_augmentation,
        )
        loss = loss + t.lambda_dual * dual

    sup = float(loss.detach())
    report = LossReport(step=step, epoch=epoch, phase=LABELED, total=sup, sup=sup, unsup=0.0,
                        d=float(loss_d.detach()), r=float(loss_r.detach()), dual_sup=float(dual.detach()),
                        dual_unsup=0.0, lr=lr)
    _check_finite(report)
    bank.push(outputs.rain, RainOrigin.SYNTHETIC)
    return loss, report


def unsupervised_loss(batch: UnlabeledBatch, model: SemiDRDNet, encoder: PerceptualEncoder,
                      bank: MemoryBank, cfg: TrainConfig, seed: int = 0, step: int = 0, epoch: int = 0,
                      lr: float = 0.0, push: bool = True) -> Tuple[torch.Tensor, LossReport]:
    """
    Unlabeled-phase loss L_unsup (unweighted). Unless `push` is False, the
    detached rain estimate is pushed into the bank (origin real) after the
    loss is computed.

    Raises:
        TrainingDivergenceError: the loss is not finite.
    """
    outputs = model(batch.rainy)
    transform = get_domain_transform("channel_stats" if cfg.contrastive.positive_augmentation else "identity")
    loss = unsupervised_dual_loss(
        outputs.derained, batch.pseudo_clean, batch.rainy, bank, encoder, contrastive_weights(cfg),
        seed=seed, negative_augmentation=cfg.contrastive.negative_augmentation, transform=transform,
    )
    unsup = float(loss.detach())
    report = LossReport(step=step, epoch=epoch, phase=UNLABELED, total=cfg.train.lambda_unsup * unsup,
                        sup=0.0, unsup=unsup, d=0.0, r=0.0, dual_sup=0.0, dual_unsup=unsup, lr=lr)
    _check_finite(report)
    if push:
        bank.push(outputs.rain, RainOrigin.REAL)
    return loss, report
