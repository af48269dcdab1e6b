"""
Synthetic rain under the additive model O = clamp(B + R).

Rain layers are thresholded white noise convolved with an oriented line
kernel. The threshold is chosen by bisection so that the fraction of covered
pixels matches the requested density; every covered pixel takes the value
`intensity`. Backgrounds are procedural: a smooth colour field with drawn
shapes and a fine grating, so there is structure for the detail branch to
recover.
"""

import logging
from typing import Tuple

import cv2
import numpy as np

from data_pipeline.types import (
    LabeledSample,
    StreakParams,
    validate_image,
    validate_rain_field,
)
from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

MIN_SIDE = 16
_BISECTION_STEPS = 40


def line_kernel(length: int, angle: float) -> np.ndarray:
    """
    Binary kernel holding one line segment through its centre.

    Args:
        length: Segment length in pixels.
        angle: Degrees from vertical; positive leans right at the bottom.

    Returns:
        Square float32 kernel of odd side.
    """
    size = length if length % 2 == 1 else length + 1
    kernel = np.zeros((size, size), dtype=np.float32)
    centre = size // 2
    half = (length - 1) / 2.0
    theta = np.deg2rad(angle)
    dx, dy = half * np.sin(theta), half * np.cos(theta)
    start = (int(round(centre - dx)), int(round(centre - dy)))
    end = (int(round(centre + dx)), int(round(centre + dy)))
    cv2.line(kernel, start, end, color=1.0, thickness=1, lineType=cv2.LINE_8)
    kernel[centre, centre] = 1.0
    return kernel


def _coverage_mask(noise: np.ndarray, threshold: float, kernel: np.ndarray, pad: int,
                   shape: Tuple[int, int]) -> np.ndarray:
    seeds = (noise < threshold).astype(np.float32)
    spread = cv2.filter2D(seeds, -1, kernel, borderType=cv2.BORDER_CONSTANT)
    height, width = shape
    return spread[pad:pad + height, pad:pad + width] > 0.5


def synthesize_streaks(shape: Tuple[int, int], params: StreakParams) -> np.ndarray:
    """
    Generates a rain layer of the given spatial shape.

    The result is a pure function of (shape, params): the noise field comes
    from numpy's PCG64 generator seeded with params.seed.

    Args:
        shape: (H, W), both >= 16.
        params: Streak parameters.

    Returns:
        (H, W, 3) float32 RainField, achromatic.

    Raises:
        InvalidArgumentError: shape below the minimum.
    """
    height, width = (int(s) for s in shape)
    if height < MIN_SIDE or width < MIN_SIDE:
        raise InvalidArgumentError(f"streak field must be at least {MIN_SIDE}x{MIN_SIDE}, got {height}x{width}")
    if params.density == 0.0:
        return np.zeros((height, width, 3), dtype=np.float32)

    kernel = line_kernel(int(params.length), params.angle)
    pad = kernel.shape[0] // 2
    rng = np.random.default_rng(int(params.seed))
    noise = rng.random((height + 2 * pad, width + 2 * pad), dtype=np.float64)

    # Coverage is monotone in the threshold, so bisect for the smallest
    # threshold whose coverage reaches the target density.
    lo, hi = 0.0, 1.0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _coverage_mask(noise, mid, kernel, pad, (height, width)).mean() < params.density:
            lo = mid
        else:
            hi = mid
    below = _coverage_mask(noise, lo, kernel, pad, (height, width))
    above = _coverage_mask(noise, hi, kernel, pad, (height, width))
    if abs(below.mean() - params.density) < abs(above.mean() - params.density):
        mask = below
    else:
        mask = above

    layer = mask.astype(np.float32) * np.float32(params.intensity)
    return np.repeat(layer[:, :, None], 3, axis=2)


def composite(clean: np.ndarray, streaks: np.ndarray) -> np.ndarray:
    """
    O = clamp(B + R, 0, 1).

    Raises:
        InvalidArgumentError: the spatial sizes differ.
    """
    clean = validate_image(clean, "clean")
    streaks = validate_rain_field(streaks)
    if clean.shape != streaks.shape:
        raise InvalidArgumentError(f"size mismatch: clean {clean.shape} vs streaks {streaks.shape}")
    return np.clip(clean + streaks, 0.0, 1.0).astype(np.float32)


def synthesize_background(shape: Tuple[int, int], seed: int) -> np.ndarray:
    """
    Procedural clean background with smooth colour, edges and fine texture.

    Args:
        shape: (H, W).
        seed: Seed of the generator; equal seeds give equal images.

    Returns:
        (H, W, 3) float32 image in [0, 1].
    """
    height, width = (int(s) for s in shape)
    if height < MIN_SIDE or width < MIN_SIDE:
        raise InvalidArgumentError(f"background must be at least {MIN_SIDE}x{MIN_SIDE}, got {height}x{width}")
    rng = np.random.default_rng(seed)

    coarse = rng.uniform(0.15, 0.75, size=(4, 4, 3)).astype(np.float32)
    image = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC)

    for _ in range(int(rng.integers(2, 6))):
        colour = tuple(float(c) for c in rng.uniform(0.05, 0.8, size=3))
        x0, x1 = sorted(int(v) for v in rng.integers(0, width, size=2))
        y0, y1 = sorted(int(v) for v in rng.integers(0, height, size=2))
        if rng.random() < 0.5:
            cv2.rectangle(image, (x0, y0), (x1, y1), colour, thickness=-1)
        else:
            radius = max(2, (x1 - x0 + y1 - y0) // 4)
            cv2.circle(image, ((x0 + x1) // 2, (y0 + y1) // 2), radius, colour, thickness=-1)
    for _ in range(int(rng.integers(1, 4))):
        colour = tuple(float(c) for c in rng.uniform(0.0, 0.6, size=3))
        p0 = (int(rng.integers(0, width)), int(rng.integers(0, height)))
        p1 = (int(rng.integers(0, width)), int(rng.integers(0, height)))
        cv2.line(image, p0, p1, colour, thickness=1, lineType=cv2.LINE_AA)

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    theta = rng.uniform(0, np.pi)
    frequency = rng.uniform(0.3, 1.2)
    grating = 0.04 * np.sin(frequency * (xx * np.cos(theta) + yy * np.sin(theta)))
    image = image + grating[:, :, None]
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def random_streak_params(rng: np.random.Generator, real_like: bool = False) -> StreakParams:
    """
    Draws streak parameters for dataset generation.

    The real-like distribution is wider (steeper, longer, denser streaks) and
    stands in for the synthetic-to-real streak gap of the unlabeled pool.
    """
    if real_like:
        angle = rng.uniform(-45.0, 45.0)
        length = int(rng.integers(9, 25))
        density = rng.uniform(0.08, 0.25)
        intensity = rng.uniform(0.4, 1.0)
    else:
        angle = rng.uniform(-15.0, 15.0)
        length = int(rng.integers(5, 15))
        density = rng.uniform(0.05, 0.15)
        intensity = rng.uniform(0.5, 0.9)
    return StreakParams(
        angle=float(angle),
        length=length,
        density=float(density),
        intensity=float(intensity),
        seed=int(rng.integers(0, 2 ** 63)),
    )


def make_labeled_sample(clean: np.ndarray, params: StreakParams, name: str = "") -> LabeledSample:
    """Synthesizes streaks for `clean` and composites them."""
    clean = validate_image(clean, "clean")
    streaks = synthesize_streaks(clean.shape[:2], params)
    return LabeledSample(rainy=composite(clean, streaks), clean=clean, streaks=streaks, name=name)
