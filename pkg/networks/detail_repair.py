"""Detail repair network g: rainy image -> signed detail residual."""

from typing import Sequence

import torch
import torch.nn as nn

from networks.blocks import SDCAB, DirectBlock, ResidualBlock, check_image_batch, conv3x3
from utils.errors import InvalidArgumentError

MIN_INPUT_SIDE = 9
BLOCK_KINDS = ("sdcab", "residual", "direct")


def make_block(kind: str, channels: int, dilations: Sequence[int]) -> nn.Module:
    if kind == "sdcab":
        return SDCAB(channels, dilations)
    if kind == "residual":
        return ResidualBlock(channels)
    if kind == "direct":
        return DirectBlock(channels)
    raise InvalidArgumentError(f"unknown block kind {kind!r}, expected one of {BLOCK_KINDS}")


class DetailRepairNetwork(nn.Module):
    """
    Layer 0 is a plain 3x3 conv, layers 1..num_blocks are detail blocks
    (SDCAB by default) and the last two layers are plain 3x3 convs. The
    output conv starts at zero so the untrained branch adds nothing.

    Args:
        channels: Feature width M.
        num_blocks: Number of detail blocks.
        dilations: Dilation set of every DCCL.
        block: "sdcab", "residual" or "direct".
    """

    def __init__(self, channels: int = 64, num_blocks: int = 16, dilations: Sequence[int] = (1, 3, 5),
                 block: str = "sdcab") -> None:
        super().__init__()
        self.dilations = tuple(int(d) for d in dilations)
        self.block_kind = block
        self.head = nn.Sequential(conv3x3(3, channels), nn.PReLU(channels))
        self.blocks = nn.Sequential(*[make_block(block, channels, self.dilations) for _ in range(num_blocks)])
        self.tail = nn.Sequential(conv3x3(channels, channels), nn.PReLU(channels))
        self.out = conv3x3(channels, 3)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def layers(self):
        """Modules in depth order: index 0 is the encoder, then blocks, tail, out."""
        return [self.head, *self.blocks, self.tail, self.out]

    def forward(self, rainy: torch.Tensor) -> torch.Tensor:
        """Signed detail residual with the input's shape."""
        check_image_batch(rainy, MIN_INPUT_SIDE, "drn_forward")
        return self.out(self.tail(self.blocks(self.head(rainy))))
