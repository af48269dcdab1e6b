"""Rain residual network f: rainy image -> predicted rain layer."""

import torch
import torch.nn as nn

from networks.blocks import RainResidualBlock, check_image_batch, conv3x3

MIN_INPUT_SIDE = 9


class RainResidualNetwork(nn.Module):
    """
    Encoder conv, a stack of rain residual blocks and two decoder convs.

    The last conv starts at zero so an untrained network predicts no rain.

    Args:
        channels: Feature width M.
        num_blocks: Number of rain residual blocks.
        reduction: SE reduction ratio r (must divide M).
        use_se: Gate every block with squeeze-and-excitation.
    """

    def __init__(self, channels: int = 64, num_blocks: int = 16, reduction: int = 16,
                 use_se: bool = True) -> None:
        super().__init__()
        self.head = nn.Sequential(conv3x3(3, channels), nn.PReLU(channels))
        self.blocks = nn.Sequential(*[
            RainResidualBlock(channels, reduction=reduction, use_se=use_se) for _ in range(num_blocks)
        ])
        self.tail = nn.Sequential(conv3x3(channels, channels), nn.PReLU(channels))
        self.out = conv3x3(channels, 3)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, rainy: torch.Tensor) -> torch.Tensor:
        """Predicted rain layer, same shape as the input; not clamped."""
        check_image_batch(rainy, MIN_INPUT_SIDE, "rrn_forward")
        return self.out(self.tail(self.blocks(self.head(rainy))))


def derain_preliminary(rainy: torch.Tensor, rain: torch.Tensor) -> torch.Tensor:
    """I_hat = clamp(O - f(O), 0, 1)."""
    return torch.clamp(rainy - rain, 0.0, 1.0)
