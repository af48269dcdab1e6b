"""
Frozen perceptual encoder.

The default topology is VGG-16's convolutional part with taps after the
2nd, 3rd and 5th max-pooling stages. Weights come from one of three sources:

* "seeded": torchvision's initializer run under a private seeded generator,
* "imagenet": torchvision's pretrained ImageNet weights (downloads once),
* a path to a weight file in the tensor-record layout (see save_encoder_weights).

A three-stage "tiny" topology exists for tests on 8x8 inputs.
"""

import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
from torchvision.models import VGG16_Weights
from torchvision.models.vgg import cfgs, make_layers

from utils.errors import CheckpointFormatError, ConfigurationError, InvalidArgumentError
from utils.tensor_records import read_records, write_records

logger = logging.getLogger(__name__)

ENCODER_MAGIC = b"SDRDENC\x00"
ENCODER_VERSION = 1

VGG16_TAPS = (2, 3, 5)
TINY_STAGES = ((4, 1), (4, 1), (4, 1))
TINY_TAPS = (1, 2, 3)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def _split_at_pools(features: nn.Sequential) -> List[nn.Sequential]:
    stages, current = [], []
    for layer in features:
        current.append(layer)
        if isinstance(layer, nn.MaxPool2d):
            stages.append(nn.Sequential(*current))
            current = []
    return stages


def _vgg16_features(pretrained: bool) -> nn.Sequential:
    """VGG-16 convolutional stack alone, initialized the way torchvision initializes VGG."""
    features = make_layers(cfgs["D"], batch_norm=False)
    if pretrained:
        state = VGG16_Weights.IMAGENET1K_V1.get_state_dict(progress=True)
        features.load_state_dict({name[len("features."):]: tensor for name, tensor in state.items()
                                  if name.startswith("features.")})
        return features
    for module in features.modules():
        if isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(module.weight, mode="fan_out", nonlinearity="relu")
            nn.init.constant_(module.bias, 0)
    return features


def _tiny_stages(layout: Sequence[Tuple[int, int]]) -> List[nn.Sequential]:
    stages, in_channels = [], 3
    for out_channels, convs in layout:
        layers = []
        for _ in range(convs):
            layers += [nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1), nn.ReLU()]
            in_channels = out_channels
        layers.append(nn.MaxPool2d(kernel_size=2, stride=2))
        stages.append(nn.Sequential(*layers))
    return stages


class PerceptualEncoder(nn.Module):
    """
    Frozen convolutional stack returning feature taps.

    Args:
        arch: "vgg16" or "tiny".
        weights: "seeded", "imagenet" or a weight-file path.
        seed: Seed for the "seeded" source.
        normalize: "none" or "imagenet" input normalization.
    """

    def __init__(self, arch: str = "vgg16", weights: str = "seeded", seed: int = 0,
                 normalize: str = "none") -> None:
        super().__init__()
        if arch not in ("vgg16", "tiny"):
            raise ConfigurationError(f"unknown encoder arch {arch!r}")
        if normalize not in ("none", "imagenet"):
            raise ConfigurationError(f"unknown encoder normalization {normalize!r}")
        if weights == "imagenet" and arch != "vgg16":
            raise ConfigurationError("imagenet weights exist only for the vgg16 encoder")
        self.arch = arch
        self.taps = VGG16_TAPS if arch == "vgg16" else TINY_TAPS
        self.normalize = normalize
        self.source = {"arch": arch, "weights": weights, "normalize": normalize}

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            if arch == "vgg16":
                stages = _split_at_pools(_vgg16_features(pretrained=weights == "imagenet"))
            else:
                stages = _tiny_stages(TINY_STAGES)
        self.stages = nn.ModuleList(stages[:max(self.taps)])

        if weights == "seeded":
            self.source["seed"] = int(seed)
        elif weights != "imagenet":
            self.source["sha256"] = self._load_weight_file(Path(weights))
        logger.info("Perceptual encoder %s with %s weights", arch,
                    weights if weights in ("seeded", "imagenet") else "file")

        self.register_buffer("mean", torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(IMAGENET_STD).view(1, 3, 1, 1))
        self.requires_grad_(False)
        super().train(False)

    def train(self, mode: bool = True) -> "PerceptualEncoder":
        # Frozen: always in inference mode.
        return super().train(False)

    @property
    def min_input_side(self) -> int:
        return 2 ** max(self.taps)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        """Feature taps for an (N, 3, H, W) batch, shallowest first."""
        if x.dim() != 4 or x.shape[1] != 3:
            raise InvalidArgumentError(f"encoder expects (N, 3, H, W), got {tuple(x.shape)}")
        if min(x.shape[2:]) < self.min_input_side:
            raise InvalidArgumentError(
                f"encoder needs inputs of at least {self.min_input_side} pixels per side, got {tuple(x.shape[2:])}"
            )
        if self.normalize == "imagenet":
            x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        outputs = []
        for index, stage in enumerate(self.stages, start=1):
            x = stage(x)
            if index in self.taps:
                outputs.append(x)
        return outputs

    def weight_records(self) -> Dict[str, np.ndarray]:
        """Per-layer float32 arrays keyed by state-dict name."""
        return {
            name: tensor.detach().cpu().to(torch.float32).numpy()
            for name, tensor in self.stages.state_dict().items()
        }

    def _load_weight_file(self, path: Path) -> str:
        metadata, records = read_records(path, ENCODER_MAGIC, ENCODER_VERSION)
        if metadata.get("arch") != self.arch:
            raise CheckpointFormatError(f"{path}: weights are for {metadata.get('arch')!r}, not {self.arch!r}")
        expected = self.stages.state_dict()
        state = {}
        for name, reference in expected.items():
            if name not in records:
                raise CheckpointFormatError(f"{path}: missing layer {name}")
            if tuple(records[name].shape) != tuple(reference.shape):
                raise CheckpointFormatError(
                    f"{path}: layer {name} has shape {records[name].shape}, expected {tuple(reference.shape)}"
                )
            state[name] = torch.from_numpy(records[name])
        self.stages.load_state_dict(state)
        return hashlib.sha256(path.read_bytes()).hexdigest()


def save_encoder_weights(encoder: PerceptualEncoder, path) -> Path:
    """Writes an encoder's weights in the record layout (e.g. to cache ImageNet weights offline)."""
    return write_records(path, ENCODER_MAGIC, ENCODER_VERSION, {"arch": encoder.arch}, encoder.weight_records())


def build_encoder(contrastive_cfg, seed: int, weights: Optional[str] = None) -> PerceptualEncoder:
    """Encoder described by a ContrastiveConfig section."""
    return PerceptualEncoder(
        arch=contrastive_cfg.encoder_arch,
        weights=weights or contrastive_cfg.encoder_weights,
        seed=seed,
        normalize=contrastive_cfg.encoder_normalize,
    )
