"""
Building blocks of the two branches.

All convolutions are stride 1 with zero padding chosen so spatial size is
preserved. Activations are PReLU with one slope per channel.
"""

from typing import Sequence

import torch
import torch.nn as nn

from utils.errors import InvalidArgumentError


def check_features(x: torch.Tensor, channels: int, where: str) -> None:
    """Raises InvalidArgumentError unless x is (N, channels, H, W)."""
    if x.dim() != 4:
        raise InvalidArgumentError(f"{where}: expected a 4-D feature map, got shape {tuple(x.shape)}")
    if x.shape[1] != channels:
        raise InvalidArgumentError(f"{where}: expected {channels} channels, got {x.shape[1]}")


def conv3x3(in_channels: int, out_channels: int, dilation: int = 1) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=dilation, dilation=dilation)


def batch_norm(channels: int) -> nn.BatchNorm2d:
    # momentum=None keeps a cumulative average of batch statistics for inference
    return nn.BatchNorm2d(channels, eps=1e-5, momentum=None)


class SEGate(nn.Module):
    """
    Squeeze-and-excitation gate.

    Global average pooling, a bottleneck MLP (C -> C/r -> C) and a sigmoid
    give one weight in (0, 1) per channel; the input is scaled by them.

    Args:
        channels: Number of input channels C.
        reduction: Bottleneck ratio r, must divide C.
    """

    def __init__(self, channels: int, reduction: int = 16) -> None:
        super().__init__()
        if reduction < 1 or channels % reduction:
            raise InvalidArgumentError(f"SE reduction {reduction} must divide channel count {channels}")
        self.channels = channels
        self.squeeze = nn.AdaptiveAvgPool2d(1)
        self.fc1 = nn.Linear(channels, channels // reduction)
        self.act = nn.ReLU()
        self.fc2 = nn.Linear(channels // reduction, channels)

    def gates(self, x: torch.Tensor) -> torch.Tensor:
        """Per-channel weights, shape (N, C)."""
        check_features(x, self.channels, "se_gate")
        z = self.squeeze(x).flatten(1)
        return torch.sigmoid(self.fc2(self.act(self.fc1(z))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gates(x)[:, :, None, None]


class RainResidualBlock(nn.Module):
    """
    conv-PReLU-conv with an identity skip, followed by an SE gate.

    With use_se=False the gate is dropped and the block is a plain residual
    block.
    """

    def __init__(self, channels: int, reduction: int = 16, use_se: bool = True) -> None:
        super().__init__()
        self.channels = channels
        self.body = nn.Sequential(
            conv3x3(channels, channels),
            nn.PReLU(channels),
            conv3x3(channels, channels),
        )
        self.se = SEGate(channels, reduction) if use_se else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_features(x, self.channels, "rain_residual_block")
        return self.se(self.body(x) + x)


class DilatedConcatLayer(nn.Module):
    """
    Parallel 3x3 convolutions at several dilations, concatenated and fused
    back to `channels` by a 1x1 convolution (DCCL).
    """

    def __init__(self, channels: int, dilations: Sequence[int] = (1, 3, 5)) -> None:
        super().__init__()
        if not dilations:
            raise InvalidArgumentError("dilation set must not be empty")
        self.channels = channels
        self.dilations = tuple(int(d) for d in dilations)
        self.branches = nn.ModuleList(conv3x3(channels, channels, d) for d in self.dilations)
        self.fuse = nn.Conv2d(channels * len(self.dilations), channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_features(x, self.channels, "dccl")
        return self.fuse(torch.cat([branch(x) for branch in self.branches], dim=1))


class SDCAB(nn.Module):
    """
    Structure detail context aggregation block:
    x + BN(DCCL_2(PReLU(BN(DCCL_1(x))))).
    """

    def __init__(self, channels: int, dilations: Sequence[int] = (1, 3, 5)) -> None:
        super().__init__()
        self.channels = channels
        self.dccl1 = DilatedConcatLayer(channels, dilations)
        self.bn1 = batch_norm(channels)
        self.act = nn.PReLU(channels)
        self.dccl2 = DilatedConcatLayer(channels, dilations)
        self.bn2 = batch_norm(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_features(x, self.channels, "sdcab")
        return x + self.bn2(self.dccl2(self.act(self.bn1(self.dccl1(x)))))


class ResidualBlock(nn.Module):
    """conv-BN-PReLU-conv-BN with an identity skip (the RB ablation block)."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.channels = channels
        self.body = nn.Sequential(
            conv3x3(channels, channels),
            batch_norm(channels),
            nn.PReLU(channels),
            conv3x3(channels, channels),
            batch_norm(channels),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_features(x, self.channels, "residual_block")
        return x + self.body(x)


class DirectBlock(nn.Module):
    """Two conv-BN-PReLU layers without a skip (the DB ablation block)."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.channels = channels
        self.body = nn.Sequential(
            conv3x3(channels, channels),
            batch_norm(channels),
            nn.PReLU(channels),
            conv3x3(channels, channels),
            batch_norm(channels),
            nn.PReLU(channels),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_features(x, self.channels, "direct_block")
        return self.body(x)


def check_image_batch(x: torch.Tensor, min_side: int, where: str) -> None:
    """Validates an (N, 3, H, W) image batch for a branch forward pass."""
    check_features(x, 3, where)
    if x.shape[2] < min_side or x.shape[3] < min_side:
        raise InvalidArgumentError(f"{where}: input must be at least {min_side}x{min_side}, got "
                                   f"{x.shape[2]}x{x.shape[3]}")
    if not torch.isfinite(x).all():
        raise InvalidArgumentError(f"{where}: input contains non-finite values")
