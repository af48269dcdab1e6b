"""
Domain types of the data pipeline.

Images cross module boundaries as numpy arrays of shape (H, W, 3), float32,
values in [0, 1] (ImageTensor). Rain layers share that shape and are
nonnegative but not bounded above (RainField). Batches handed to the
networks are torch tensors in (N, 3, P, P) layout.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import torch

from utils.errors import InvalidArgumentError

MAX_SEED = 2 ** 64 - 1


def validate_image(image: np.ndarray, name: str = "image") -> np.ndarray:
    """
    Checks the ImageTensor invariants and returns the array as float32.

    Raises:
        InvalidArgumentError: wrong rank or channel count, non-finite values,
            or values outside [0, 1].
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidArgumentError(f"{name} must have shape (H, W, 3), got {image.shape}")
    image = image.astype(np.float32, copy=False)
    if not np.all(np.isfinite(image)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        raise InvalidArgumentError(f"{name} values must lie in [0, 1]")
    return image


def validate_rain_field(streaks: np.ndarray, name: str = "streaks") -> np.ndarray:
    """Checks the RainField invariants (rank, finiteness, nonnegativity)."""
    streaks = np.asarray(streaks)
    if streaks.ndim != 3 or streaks.shape[2] != 3:
        raise InvalidArgumentError(f"{name} must have shape (H, W, 3), got {streaks.shape}")
    streaks = streaks.astype(np.float32, copy=False)
    if not np.all(np.isfinite(streaks)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if streaks.size and streaks.min() < 0.0:
        raise InvalidArgumentError(f"{name} must be nonnegative")
    return streaks


@dataclass(frozen=True)
class StreakParams:
    """
    Parameters of one synthetic rain layer.

    Args:
        angle: Streak direction in degrees from vertical, in [-45, 45].
        length: Streak length in pixels, >= 1.
        density: Target fraction of covered pixels, in [0, 1].
        intensity: Value of a covered pixel, in (0, 1].
        seed: 64-bit seed of the white-noise field.
    """

    angle: float = 0.0
    length: int = 9
    density: float = 0.1
    intensity: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not -45.0 <= self.angle <= 45.0:
            raise InvalidArgumentError(f"angle must be in [-45, 45], got {self.angle}")
        if int(self.length) != self.length or self.length < 1:
            raise InvalidArgumentError(f"length must be an integer >= 1, got {self.length}")
        if not 0.0 <= self.density <= 1.0:
            raise InvalidArgumentError(f"density must be in [0, 1], got {self.density}")
        if not 0.0 < self.intensity <= 1.0:
            raise InvalidArgumentError(f"intensity must be in (0, 1], got {self.intensity}")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class LabeledSample:
    """Paired synthetic sample: rainy = clamp(clean + streaks)."""

    rainy: np.ndarray
    clean: np.ndarray
    streaks: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.rainy = validate_image(self.rainy, "rainy")
        self.clean = validate_image(self.clean, "clean")
        self.streaks = validate_rain_field(self.streaks)
        if not (self.rainy.shape == self.clean.shape == self.streaks.shape):
            raise InvalidArgumentError(
                f"sample shapes differ: rainy {self.rainy.shape}, clean {self.clean.shape}, "
                f"streaks {self.streaks.shape}"
            )

    @classmethod
    def from_pair(cls, rainy: np.ndarray, clean: np.ndarray, name: str = "") -> "LabeledSample":
        """Builds a sample from an image pair; streaks = max(rainy - clean, 0)."""
        rainy = validate_image(rainy, "rainy")
        clean = validate_image(clean, "clean")
        if rainy.shape != clean.shape:
            raise InvalidArgumentError(f"pair shapes differ: {rainy.shape} vs {clean.shape}")
        return cls(rainy=rainy, clean=clean, streaks=np.clip(rainy - clean, 0.0, None), name=name)


@dataclass
class UnlabeledSample:
    """Unpaired rainy image; pseudo_clean is assigned by the batch stream."""

    rainy: np.ndarray
    pseudo_clean: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.rainy = validate_image(self.rainy, "rainy")
        if self.pseudo_clean is not None:
            self.pseudo_clean = validate_image(self.pseudo_clean, "pseudo_clean")


@dataclass
class LabeledBatch:
    """Patches of labeled samples, (N, 3, P, P) float32 tensors."""

    rainy: torch.Tensor
    clean: torch.Tensor
    streaks: torch.Tensor
    indices: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return self.rainy.shape[0]


@dataclass
class UnlabeledBatch:
    """Patches of unlabeled samples and their pseudo-clean partners."""

    rainy: torch.Tensor
    pseudo_clean: torch.Tensor
    indices: List[int] = field(default_factory=list)
    clean_indices: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return self.rainy.shape[0]


def images_to_tensor(images: List[np.ndarray]) -> torch.Tensor:
    """Stacks (H, W, 3) arrays into a (N, 3, H, W) float32 tensor."""
    stacked = np.stack([np.asarray(img, dtype=np.float32) for img in images])
    return torch.from_numpy(np.ascontiguousarray(stacked.transpose(0, 3, 1, 2)))


def tensor_to_images(batch: torch.Tensor) -> List[np.ndarray]:
    """Inverse of images_to_tensor."""
    array = batch.detach().cpu().to(torch.float32).numpy().transpose(0, 2, 3, 1)
    return [np.ascontiguousarray(img) for img in array]
