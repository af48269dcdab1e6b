"""
Receptive field of the detail repair network.

receptive_field() is the closed form: the encoder conv gives 3, a 3x3 conv at
dilation d adds 2d, a detail block adds stages_per_block * 2 * max(dilations)
and each of the two final plain convs adds 2. impulse_footprint() measures the
same quantity on an actual network and is the ground truth for the formula.
"""

import copy
from typing import Iterable, List

import torch
import torch.nn as nn

from networks.detail_repair import DetailRepairNetwork
from utils.errors import InvalidArgumentError

TABLE_DILATION = 7


def receptive_field(depth: int, dilation_set: Iterable[int], num_blocks: int = 16,
                    stages_per_block: int = 2) -> int:
    """
    Side length of the input region that influences one output pixel of layer `depth`.

    Args:
        depth: 0 is the encoder conv, 1..num_blocks the detail blocks,
               num_blocks+1 and num_blocks+2 the two final convs.
        dilation_set: Dilations of the parallel branches.
        num_blocks: Number of detail blocks in the network.
        stages_per_block: Dilated stages per block; 2 for SDCAB, 1 reproduces
                          the single-conv-per-layer growth of the architecture table.

    Raises:
        InvalidArgumentError: empty dilation set or depth out of range.
    """
    dilations = [int(d) for d in dilation_set]
    if not dilations:
        raise InvalidArgumentError("dilation set must not be empty")
    if min(dilations) < 1:
        raise InvalidArgumentError(f"dilations must be positive, got {dilations}")
    if depth < 0 or depth > num_blocks + 2:
        raise InvalidArgumentError(f"depth must be in [0, {num_blocks + 2}], got {depth}")
    rf = 3
    for layer in range(1, depth + 1):
        rf += stages_per_block * 2 * max(dilations) if layer <= num_blocks else 2
    return rf


def receptive_field_table(dilation_set: Iterable[int], num_blocks: int = 16) -> List[dict]:
    """Rows of depth -> receptive field for the given set and for the table's dilation-7 column."""
    dilation_set = list(dilation_set)
    return [
        {
            "depth": depth,
            "receptive_field": receptive_field(depth, dilation_set, num_blocks),
            "table_dilation7": receptive_field(depth, [TABLE_DILATION], num_blocks, stages_per_block=1),
        }
        for depth in range(num_blocks + 3)
    ]


def _strip_batch_norm(module: nn.Module) -> None:
    for name, child in module.named_children():
        if isinstance(child, nn.BatchNorm2d):
            setattr(module, name, nn.Identity())
        else:
            _strip_batch_norm(child)


def _reach(layers: List[nn.Module]) -> int:
    # Upper bound on the footprint: every conv's reach added in series.
    reach = 1
    for layer in layers:
        for m in layer.modules():
            if isinstance(m, nn.Conv2d):
                reach += (m.kernel_size[0] - 1) * m.dilation[0]
    return reach


@torch.no_grad()
def impulse_footprint(network: DetailRepairNetwork, depth: int) -> int:
    """
    Feeds a centred delta through layers 0..depth of a copy of `network`
    whose conv weights are all positive, biases zero and batch norm removed,
    and returns the side of the bounding box of the nonzero response.
    """
    layers_all = network.layers()
    if depth < 0 or depth >= len(layers_all):
        raise InvalidArgumentError(f"depth must be in [0, {len(layers_all) - 1}], got {depth}")
    impulse_net = copy.deepcopy(network).double().eval()
    _strip_batch_norm(impulse_net)
    for m in impulse_net.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.weight[0].numel()
            nn.init.constant_(m.weight, 1.0 / fan_in)
            nn.init.zeros_(m.bias)
    layers = impulse_net.layers()[:depth + 1]

    size = _reach(layers) + 8
    size += 1 - size % 2
    x = torch.zeros(1, 3, size, size, dtype=torch.float64)
    x[0, :, size // 2, size // 2] = 1.0
    for layer in layers:
        x = layer(x)

    nonzero = x[0].abs().sum(dim=0) > 0
    rows = torch.nonzero(nonzero.any(dim=1)).flatten()
    cols = torch.nonzero(nonzero.any(dim=0)).flatten()
    height = int(rows.max() - rows.min() + 1)
    width = int(cols.max() - cols.min() + 1)
    return max(height, width)
