"""Evaluation metrics on the luminance channel.

Both metrics follow the benchmark convention for 8-bit images: convert
RGB to studio-swing Y, optionally shave a border, and compare with a
peak level of 255. Identical inputs report infinite PSNR.
"""

from __future__ import annotations

import numpy as np

from .data import Image, rgb_to_y
from .errors import ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PEAK = 255.0


def _y_planes(sr: Image, hr: Image) -> tuple[np.ndarray, np.ndarray]:
    if (sr.width, sr.height) != (hr.width, hr.height):
        raise ShapeError(
            f"image dimensions differ: {sr.width}x{sr.height} vs {hr.width}x{hr.height}"
        )
    return rgb_to_y(sr), rgb_to_y(hr)


def psnr_y(sr: Image, hr: Image, shave: int = 0) -> float:
    """Peak signal-to-noise ratio in dB over shaved Y planes.

    Returns ``inf`` when the shaved planes are identical.
    """
    a, b = _y_planes(sr, hr)
    if shave < 0:
        raise ShapeError(f"shave must be nonnegative, got {shave}")
    if shave:
        if 2 * shave >= min(a.shape):
            raise ShapeError(
                f"shave {shave} consumes the whole {a.shape[1]}x{a.shape[0]} image"
            )
        a = a[shave:-shave, shave:-shave]
        b = b[shave:-shave, shave:-shave]
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(PEAK * PEAK / mse)


def _gaussian_window(n: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Separable valid-region correlation with a 1-D window."""
    k = w.size
    h, wd = x.shape
    rows = np.zeros((h - k + 1, wd))
    for t in range(k):
        rows += w[t] * x[t : t + h - k + 1, :]
    out = np.zeros((h - k + 1, wd - k + 1))
    for t in range(k):
        out += w[t] * rows[:, t : t + wd - k + 1]
    return out


def ssim_y(sr: Image, hr: Image) -> float:
    """Mean local structural similarity over Y, valid windows only."""
    a, b = _y_planes(sr, hr)
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(
            f"image {a.shape[1]}x{a.shape[0]} is smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    w = _gaussian_window()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a * mu_a
    var_b = _filter_valid(b * b, w) - mu_b * mu_b
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
