"""Procedural grayscale test images.

Benchmark datasets are not vendored, so tests, demos, and desk-scale training
use procedurally generated images: smooth shaded backgrounds, hard-edged
shapes, and band-limited texture — enough structure for a denoiser to learn
local statistics and for metrics to move the way they do on photographs.
Fully deterministic per (seed, index).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import rng
from .imgio import save_image

_TAG_SYNTH = 0x5A


def synthetic_image(seed: int, index: int, size: int = 192) -> np.ndarray:
    """One (size, size) float32 image in [0,1]."""
    gen = rng.stream(seed, _TAG_SYNTH, index)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size

    # Smooth background: a few low-frequency cosine waves
    img = np.zeros((size, size))
    for _ in range(3):
        fx, fy = gen.uniform(0.5, 3.0, size=2)
        phase = gen.uniform(0, 2 * np.pi)
        amp = gen.uniform(0.1, 0.3)
        img += amp * np.cos(2 * np.pi * (fx * xx + fy * yy) + phase)

    # Hard-edged shapes: rectangles and disks at random intensities
    for _ in range(int(gen.integers(4, 9))):
        value = gen.uniform(-0.5, 0.5)
        if gen.random() < 0.5:
            x0, y0 = gen.uniform(0, 0.8, size=2)
            wdt, hgt = gen.uniform(0.1, 0.45, size=2)
            mask = (xx >= x0) & (xx < x0 + wdt) & (yy >= y0) & (yy < y0 + hgt)
        else:
            cx, cy = gen.uniform(0.1, 0.9, size=2)
            r = gen.uniform(0.05, 0.25)
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r ** 2
        img[mask] += value

    # Band-limited texture: white noise smoothed by box filters
    tex = gen.normal(0.0, 1.0, (size, size))
    k = int(gen.integers(2, 5))
    kernel = np.ones(k) / k
    tex = np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="same"), 0, tex)
    tex = np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="same"), 1, tex)
    img += gen.uniform(0.02, 0.08) * tex

    lo, hi = img.min(), img.max()
    img = (img - lo) / (hi - lo) if hi > lo else np.full_like(img, 0.5)
    # Leave a little headroom so AWGN statistics are not dominated by clipping
    return (0.04 + 0.92 * img).astype(np.float32)


def write_corpus(directory: "str | Path", count: int, seed: int,
                 size: int = 192, prefix: str = "synth") -> "list[Path]":
    """Write count synthetic PNGs into directory; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = directory / f"{prefix}_{i:04d}.png"
        save_image(synthetic_image(seed, i, size), path)
        paths.append(path)
    return paths
