"""Image file I/O and pixel conventions.

Images are float32 numpy arrays in [0,1]: shape (H, W) for grayscale,
(H, W, 3) for RGB.  8-bit conversion is round-half-up: store
round(clip(v,0,1)*255), load v/255.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeMismatchError

#: ITU-R BT.601 luma weights, used for all RGB -> grayscale conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the (H, W) / (H, W, 3) float-in-[0,1] contract; returns img."""
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise ShapeMismatchError(
            f"expected (H, W) or (H, W, 3), got {img.shape}"
        )
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeMismatchError(f"degenerate image shape {img.shape}")
    mn, mx = float(img.min()), float(img.max())
    if mn < 0.0 or mx > 1.0:
        raise ValueError(f"pixel values outside [0,1]: min={mn}, max={mx}")
    return img


def clip01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """[0,1] float -> uint8 with round-half-up."""
    return np.floor(clip01(img) * 255.0 + 0.5).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32)) / np.float32(255.0)


def rgb_to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 luminance of an (H, W, 3) image; grayscale passes through."""
    if img.ndim == 2:
        return img
    r, g, b = LUMA_WEIGHTS
    gray = r * img[..., 0] + g * img[..., 1] + b * img[..., 2]
    return clip01(gray).astype(np.float32)


def load_image(path: "str | Path", grayscale: bool = True) -> np.ndarray:
    """Decode a PNG/JPEG/BMP file to a float32 image in [0,1]."""
    with Image.open(path) as im:
        if grayscale:
            arr = np.asarray(im.convert("RGB"))
            return rgb_to_gray(from_uint8(arr))
        return from_uint8(np.asarray(im.convert("RGB")))


def save_image(img: np.ndarray, path: "str | Path", quality: int = 95) -> None:
    """Write [0,1] float image as PNG (lossless) or JPEG by extension."""
    validate_image(img)
    arr = to_uint8(img)
    pil = Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")
    suffix = Path(path).suffix.lower()
    if suffix in (".jpg", ".jpeg"):
        pil.save(path, format="JPEG", quality=quality)
    else:
        pil.save(path, format="PNG")


def encode_png(img: np.ndarray) -> bytes:
    """In-memory lossless PNG encoding of a [0,1] image."""
    arr = to_uint8(img)
    pil = Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def decode_image(data: bytes, grayscale: bool = True) -> np.ndarray:
    """Decode PNG/JPEG bytes to a float32 image in [0,1]."""
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"))
    img = from_uint8(arr)
    return rgb_to_gray(img) if grayscale else img
