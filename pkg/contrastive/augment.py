"""
Negative and positive augmentation for the dual contrastive loss.

Negatives are the current anchor with a stored rain layer pasted back on,
plus the original rainy input. The unlabeled positive is the pseudo-clean
image recoloured to the rainy image's per-channel statistics.
"""

import logging
from typing import Callable, Dict, List, Optional, Set, Tuple

import torch

from contrastive.memory_bank import MemoryBank, RainOrigin
from utils.errors import EmptyBankError, InvalidArgumentError

logger = logging.getLogger(__name__)

STATS_EPS = 1e-6

_warned_empty: Set[Optional[str]] = set()


def fit_to_shape(rain: torch.Tensor, shape: Tuple[int, int]) -> torch.Tensor:
    """Tiles a (3, h, w) layer until it covers `shape`, then centre-crops to it."""
    height, width = shape
    h, w = rain.shape[-2:]
    reps_h = -(-height // h)
    reps_w = -(-width // w)
    tiled = rain.repeat(1, reps_h, reps_w)
    top = (tiled.shape[-2] - height) // 2
    left = (tiled.shape[-1] - width) // 2
    return tiled[:, top:top + height, left:left + width]


def augment_negatives(anchor: torch.Tensor, original: torch.Tensor, bank: MemoryBank, m: int,
                      seed: int = 0, origin: Optional[RainOrigin] = None,
                      enabled: bool = True) -> List[torch.Tensor]:
    """
    Builds m negatives for an (N, 3, H, W) anchor batch.

    The first m-1 are clamp(anchor + R) with one bank layer R drawn per image,
    the last is `original`. With an empty bank (or augmentation disabled) all
    m negatives are `original`. Negatives never carry gradient.

    Args:
        anchor: Current full output I.
        original: Rainy input O.
        bank: Rain memory bank.
        m: Number of negatives, at least 1.
        seed: Sampling seed.
        origin: Bank filter; None samples from all entries.
        enabled: False reproduces the "rainy input only" ablation.
    """
    if m < 1:
        raise InvalidArgumentError(f"number of negatives must be >= 1, got {m}")
    if anchor.shape != original.shape:
        raise InvalidArgumentError(f"anchor {tuple(anchor.shape)} and original {tuple(original.shape)} differ")
    original = original.detach()
    if not enabled or m == 1:
        return [original] * m

    batch, _, height, width = anchor.shape
    try:
        layers = bank.sample((m - 1) * batch, origin=origin, seed=seed)
    except EmptyBankError:
        key = None if origin is None else RainOrigin(origin).value
        if key not in _warned_empty:
            _warned_empty.add(key)
            logger.warning("Memory bank empty for origin %s; using the rainy input as every negative", key or "any")
        return [original] * m

    base = anchor.detach()
    negatives = []
    for k in range(m - 1):
        rain = torch.stack([
            fit_to_shape(layers[k * batch + i], (height, width)) for i in range(batch)
        ]).to(device=base.device, dtype=base.dtype)
        negatives.append(torch.clamp(base + rain, 0.0, 1.0))
    negatives.append(original)
    return negatives


def domain_transform(content: torch.Tensor, style: torch.Tensor, eps: float = STATS_EPS) -> torch.Tensor:
    """
    Matches each channel of `content` to the mean and standard deviation of
    the same channel of `style`, per image, and clamps to [0, 1].
    """
    if content.shape[:2] != style.shape[:2]:
        raise InvalidArgumentError(f"content {tuple(content.shape)} and style {tuple(style.shape)} differ")
    style = style.detach()
    mu_c = content.mean(dim=(-2, -1), keepdim=True)
    sigma_c = content.std(dim=(-2, -1), unbiased=False, keepdim=True)
    mu_s = style.mean(dim=(-2, -1), keepdim=True)
    sigma_s = style.std(dim=(-2, -1), unbiased=False, keepdim=True)
    return torch.clamp((content - mu_c) / torch.clamp(sigma_c, min=eps) * sigma_s + mu_s, 0.0, 1.0)


def identity_transform(content: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
    return content


DOMAIN_TRANSFORMS: Dict[str, Callable[[torch.Tensor, torch.Tensor], torch.Tensor]] = {
    "channel_stats": domain_transform,
    "identity": identity_transform,
}


def get_domain_transform(name: str) -> Callable[[torch.Tensor, torch.Tensor], torch.Tensor]:
    try:
        return DOMAIN_TRANSFORMS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown domain transform {name!r}, expected one of {sorted(DOMAIN_TRANSFORMS)}")
