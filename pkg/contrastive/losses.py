"""Perceptual contrastive loss and its supervised / unsupervised compositions."""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import torch

from contrastive.augment import augment_negatives, domain_transform
from contrastive.encoder import PerceptualEncoder
from contrastive.memory_bank import MemoryBank, RainOrigin
from utils.errors import InvalidArgumentError

DEFAULT_OMEGAS = (0.2, 0.5, 1.0)
DEFAULT_NEGATIVES = 4
DEFAULT_EPS = 1e-7
DEFAULT_PAIR_FLOOR = 1.0


@dataclass(frozen=True)
class ContrastiveWeights:
    omegas: Sequence[float] = DEFAULT_OMEGAS
    negatives: int = DEFAULT_NEGATIVES
    eps: float = DEFAULT_EPS
    pair_floor: float = DEFAULT_PAIR_FLOOR

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.omegas):
            raise InvalidArgumentError(f"tap weights must be nonnegative, got {tuple(self.omegas)}")
        if self.negatives < 1:
            raise InvalidArgumentError(f"negatives per anchor must be >= 1, got {self.negatives}")
        if self.eps <= 0:
            raise InvalidArgumentError(f"denominator guard must be positive, got {self.eps}")
        if self.pair_floor < 0:
            raise InvalidArgumentError(f"pair floor must be >= 0, got {self.pair_floor}")


def _squared_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return (a - b).pow(2).flatten(1).sum(dim=1)


def contrastive_loss(anchor: torch.Tensor, positive: torch.Tensor, negatives: List[torch.Tensor],
                     encoder: PerceptualEncoder, weights: ContrastiveWeights) -> torch.Tensor:
    """
    Sum over negatives k and taps i of

        w_i * |phi_i(p) - phi_i(a)|^2 / (|phi_i(n_k) - phi_i(a)|^2 + rho * |phi_i(n_k) - phi_i(p)|^2 + eps)

    computed per image and averaged over the batch, with rho = weights.pair_floor.
    The rho term is a constant (positive and negatives carry no gradient): it
    keeps the ratio near 1 / rho when a negative coincides with the anchor, as
    happens at identity initialization where the output equals the rainy input.
    rho = 0 gives the plain ratio. Only the anchor receives gradient.
    """
    if not negatives:
        raise InvalidArgumentError("contrastive loss needs at least one negative")
    anchor_taps = encoder(anchor)
    if len(anchor_taps) != len(weights.omegas):
        raise InvalidArgumentError(
            f"encoder yields {len(anchor_taps)} taps but {len(weights.omegas)} tap weights were given"
        )
    with torch.no_grad():
        positive_taps = encoder(positive.detach())
        negative_taps = [encoder(n.detach()) for n in negatives]
        floors = [
            [weights.pair_floor * _squared_distance(n, p) + weights.eps for n, p in zip(taps, positive_taps)]
            for taps in negative_taps
        ]

    numerators = [_squared_distance(p, a) for p, a in zip(positive_taps, anchor_taps)]
    loss = anchor.new_zeros(anchor.shape[0])
    for taps, floor in zip(negative_taps, floors):
        for omega, numerator, n, a, guard in zip(weights.omegas, numerators, taps, anchor_taps, floor):
            loss = loss + omega * numerator / (_squared_distance(n, a) + guard)
    return loss.mean()


def supervised_dual_loss(derained: torch.Tensor, clean: torch.Tensor, rainy: torch.Tensor,
                         bank: MemoryBank, encoder: PerceptualEncoder, weights: ContrastiveWeights,
                         seed: int = 0, negative_augmentation: bool = True) -> torch.Tensor:
    """Anchor I_s, positive B_s, negatives from bank layers of any origin plus O_s."""
    negatives = augment_negatives(derained, rainy, bank, weights.negatives, seed=seed,
                                  origin=None, enabled=negative_augmentation)
    return contrastive_loss(derained, clean, negatives, encoder, weights)


def unsupervised_dual_loss(derained: torch.Tensor, pseudo_clean: torch.Tensor, rainy: torch.Tensor,
                           bank: MemoryBank, encoder: PerceptualEncoder, weights: ContrastiveWeights,
                           seed: int = 0, negative_augmentation: bool = True,
                           transform: Optional[Callable[[torch.Tensor, torch.Tensor], torch.Tensor]] = None
                           ) -> torch.Tensor:
    """Anchor I_r, positive B_r recoloured to I_r, negatives from real-origin bank layers plus O_r."""
    transform = transform or domain_transform
    positive = transform(pseudo_clean, derained.detach())
    negatives = augment_negatives(derained, rainy, bank, weights.negatives, seed=seed,
                                  origin=RainOrigin.REAL, enabled=negative_augmentation)
    return contrastive_loss(derained, positive, negatives, encoder, weights)
