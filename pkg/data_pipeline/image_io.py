"""8-bit RGB PNG boundary: float images in [0, 1] <-> files on disk."""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from data_pipeline.types import validate_image
from utils.errors import ArtifactIOError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def to_uint8(image: np.ndarray) -> np.ndarray:
    """round(x * 255) as uint8."""
    image = validate_image(image)
    return np.round(image.astype(np.float64) * 255.0).astype(np.uint8)


def from_uint8(pixels: np.ndarray) -> np.ndarray:
    """x / 255 as float32."""
    return (np.asarray(pixels, dtype=np.float32) / 255.0).astype(np.float32)


def load_image(path: Union[str, Path]) -> np.ndarray:
    """
    Loads any Pillow-readable image as an RGB float32 array in [0, 1].

    Raises:
        ArtifactIOError: the file is missing or not an image.
    """
    try:
        with Image.open(path) as image:
            if image.mode != "RGB":
                image = image.convert("RGB")
            return from_uint8(np.asarray(image))
    except (OSError, ValueError) as e:
        raise ArtifactIOError(f"failed to load image {path}: {e}")


def save_png(image: np.ndarray, path: Union[str, Path]) -> Path:
    """Writes an image as an 8-bit RGB PNG, creating parent directories."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(to_uint8(image)).save(path, format="PNG")
    except OSError as e:
        raise ArtifactIOError(f"failed to write image {path}: {e}")
    return path


def list_images(directory: Union[str, Path]):
    """Sorted image files directly inside a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ArtifactIOError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
