"""Exact sub-window extraction for training patches."""

import numpy as np

from utils.errors import InvalidArgumentError

DEFAULT_PATCH_SIZE = 100


def crop_patch(img: np.ndarray, top: int, left: int, size: int = DEFAULT_PATCH_SIZE) -> np.ndarray:
    """
    Returns img[top:top+size, left:left+size] without resampling.

    Works for images and rain fields alike (any array with spatial axes first).

    Raises:
        InvalidArgumentError: the window does not fit inside the image.
    """
    img = np.asarray(img)
    if img.ndim < 2:
        raise InvalidArgumentError(f"expected an image, got shape {img.shape}")
    height, width = img.shape[:2]
    if size < 1 or top < 0 or left < 0 or top + size > height or left + size > width:
        raise InvalidArgumentError(
            f"window top={top} left={left} size={size} does not fit a {height}x{width} image"
        )
    return np.ascontiguousarray(img[top:top + size, left:left + size])


def random_window(rng: np.random.Generator, shape, size: int):
    """Uniform (top, left) of a size x size window inside an image of `shape`."""
    height, width = shape[:2]
    if size > height or size > width:
        raise InvalidArgumentError(f"patch size {size} exceeds image size {height}x{width}")
    return int(rng.integers(0, height - size + 1)), int(rng.integers(0, width - size + 1))
