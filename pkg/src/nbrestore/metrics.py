"""Reference PSNR and SSIM for [0,1] images.

PSNR uses peak 1.0 and reports +inf for identical images.  SSIM is the
standard windowed form: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
population (not sample) statistics, mean over valid window positions.  Both
are computed on the grayscale luminance plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import ShapeMismatchError
from .imgio import rgb_to_gray

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricResult:
    psnr_db: float
    ssim: float


def _as_gray64(ref: np.ndarray, test: np.ndarray) -> "tuple[np.ndarray, np.ndarray]":
    if ref.shape != test.shape:
        raise ShapeMismatchError(f"shape mismatch: {ref.shape} vs {test.shape}")
    return (rgb_to_gray(ref).astype(np.float64),
            rgb_to_gray(test).astype(np.float64))


def psnr(ref: np.ndarray, test: np.ndarray) -> float:
    """10*log10(1/MSE) in dB; +inf when the images are identical."""
    r, t = _as_gray64(ref, test)
    mse = float(np.mean((r - t) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(ref: np.ndarray, test: np.ndarray) -> float:
    """Mean local SSIM with the standard constants; peak value 1.0."""
    r, t = _as_gray64(ref, test)
    if min(r.shape) < SSIM_WINDOW:
        raise ShapeMismatchError(
            f"image {r.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    win = _gaussian_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2

    mu1 = convolve2d(r, win, mode="valid")
    mu2 = convolve2d(t, win, mode="valid")
    mu1_sq, mu2_sq, mu1_mu2 = mu1 * mu1, mu2 * mu2, mu1 * mu2
    sigma1_sq = convolve2d(r * r, win, mode="valid") - mu1_sq
    sigma2_sq = convolve2d(t * t, win, mode="valid") - mu2_sq
    sigma12 = convolve2d(r * t, win, mode="valid") - mu1_mu2

    num = (2.0 * mu1_mu2 + c1) * (2.0 * sigma12 + c2)
    den = (mu1_sq + mu2_sq + c1) * (sigma1_sq + sigma2_sq + c2)
    return float(np.mean(num / den))


def compare(ref: np.ndarray, test: np.ndarray) -> MetricResult:
    return MetricResult(psnr_db=psnr(ref, test), ssim=ssim(ref, test))


def crop_border(img: np.ndarray, pixels: int) -> np.ndarray:
    """Remove a uniform border before metric computation."""
    if pixels == 0:
        return img
    if pixels < 0 or 2 * pixels >= min(img.shape[:2]):
        raise ShapeMismatchError(
            f"cannot crop {pixels}px border from {img.shape[0]}x{img.shape[1]} image"
        )
    return img[pixels:-pixels, pixels:-pixels, ...]


def total_variation(img: np.ndarray) -> float:
    """Anisotropic total variation: mean absolute neighbor difference."""
    g = rgb_to_gray(img).astype(np.float64)
    dh = np.abs(np.diff(g, axis=0)).sum()
    dw = np.abs(np.diff(g, axis=1)).sum()
    return float(dh + dw) / g.size
