"""The two parallel branches and their combination I = O - f(O) + g(O)."""

from dataclasses import dataclass
from typing import Optional, Sequence

import torch
import torch.nn as nn

from networks.detail_repair import DetailRepairNetwork
from networks.rain_residual import RainResidualNetwork, derain_preliminary


@dataclass
class BranchOutputs:
    """Outputs of one forward pass over a rainy batch."""

    rainy: torch.Tensor         # O
    rain: torch.Tensor          # f(O)
    detail: torch.Tensor        # g(O), zeros when the detail branch is disabled
    preliminary: torch.Tensor   # clamp(O - f(O))

    @property
    def derained(self) -> torch.Tensor:
        """Unclamped full output O - f(O) + g(O), the contrastive anchor."""
        return self.rainy - self.rain + self.detail


class SemiDRDNet(nn.Module):
    """
    Rain residual branch f and detail repair branch g sharing the same input.

    Args:
        channels: Feature width M of both branches.
        rrn_blocks: Rain residual blocks in f.
        drn_blocks: Detail blocks in g.
        se_reduction: SE ratio r.
        rrn_se: Use squeeze-and-excitation in f.
        drn_enabled: Build g; when False g is identically zero.
        drn_block: Detail block kind ("sdcab", "residual", "direct").
        dilations: Dilation set of the detail blocks.
    """

    def __init__(self, channels: int = 64, rrn_blocks: int = 16, drn_blocks: int = 16,
                 se_reduction: int = 16, rrn_se: bool = True, drn_enabled: bool = True,
                 drn_block: str = "sdcab", dilations: Sequence[int] = (1, 3, 5)) -> None:
        super().__init__()
        self.rrn = RainResidualNetwork(channels, rrn_blocks, se_reduction, rrn_se)
        self.drn: Optional[DetailRepairNetwork] = (
            DetailRepairNetwork(channels, drn_blocks, dilations, drn_block) if drn_enabled else None
        )

    @classmethod
    def from_config(cls, model_cfg, seed: int) -> "SemiDRDNet":
        """Builds the model with weights drawn from a private generator seeded by `seed`."""
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            return cls(
                channels=model_cfg.channels,
                rrn_blocks=model_cfg.rrn_blocks,
                drn_blocks=model_cfg.drn_blocks,
                se_reduction=model_cfg.se_reduction,
                rrn_se=model_cfg.rrn_se,
                drn_enabled=model_cfg.drn_enabled,
                drn_block=model_cfg.drn_block,
                dilations=model_cfg.dilations,
            )

    def rain(self, rainy: torch.Tensor) -> torch.Tensor:
        return self.rrn(rainy)

    def detail(self, rainy: torch.Tensor) -> torch.Tensor:
        if self.drn is None:
            return torch.zeros_like(rainy)
        return self.drn(rainy)

    def forward(self, rainy: torch.Tensor) -> BranchOutputs:
        rain = self.rain(rainy)
        return BranchOutputs(rainy=rainy, rain=rain, detail=self.detail(rainy),
                             preliminary=derain_preliminary(rainy, rain))

    @torch.no_grad()
    def derain(self, rainy: torch.Tensor) -> torch.Tensor:
        """Final output clamp(O - f(O) + g(O), 0, 1)."""
        return torch.clamp(rainy - self.rain(rainy) + self.detail(rainy), 0.0, 1.0)


def count_parameters(model: nn.Module) -> int:
    """Number of trainable parameters."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
