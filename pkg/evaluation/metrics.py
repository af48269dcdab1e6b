"""
Full-reference quality metrics on [0, 1] RGB images.

Both metrics come from scikit-image. PSNR uses peak 1.0 and is capped at
100 dB. SSIM is the mean local SSIM over an 11x11 Gaussian window (sigma
1.5) with C1 = 0.01^2 and C2 = 0.03^2, computed per channel and averaged.
"""

import numpy as np
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio, structural_similarity

from utils.errors import InvalidArgumentError

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _check_pair(x: np.ndarray, y: np.ndarray, where: str):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"{where}: shapes differ, {x.shape} vs {y.shape}")
    if x.ndim != 3 or x.shape[2] != 3:
        raise InvalidArgumentError(f"{where}: expected (H, W, 3) images, got {x.shape}")
    return x, y


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """10 * log10(1 / MSE) in dB, capped at 100 dB."""
    x, y = _check_pair(x, y, "psnr")
    if mean_squared_error(x, y) == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(peak_signal_noise_ratio(x, y, data_range=1.0)))


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean SSIM over the channels; both sides must be at least 11 pixels."""
    x, y = _check_pair(x, y, "ssim")
    if min(x.shape[:2]) < SSIM_WINDOW:
        raise InvalidArgumentError(f"ssim: image {x.shape[:2]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    if np.array_equal(x, y):
        return 1.0
    return float(structural_similarity(
        x, y,
        data_range=1.0,
        channel_axis=2,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=0.01,
        K2=0.03,
    ))
