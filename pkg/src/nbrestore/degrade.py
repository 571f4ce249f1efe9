"""Synthetic degradation operators and their composition.

Every operator is a pure function of (image, parameters, seed): identical
inputs give bit-identical outputs, outputs are clipped to [0,1], and all
operators except percent upscaling preserve the image dimensions.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import rng
from .errors import ChainParseError, ChainStepError, InvalidParameterError
from .imgio import clip01, to_uint8, from_uint8
from .resample import resize

KINDS = ("awgn", "scale", "jpeg", "salt_pepper", "upscale_percent")

SCALE_FACTORS = (1, 2, 3, 4)
NOISE_SIGMA_RANGE = (5.0 / 255.0, 55.0 / 255.0)
JPEG_QUALITY_RANGE = (5, 95)


@dataclass(frozen=True)
class DegradationSpec:
    """One degradation step: kind + parameter + seed.

    param units: awgn sigma in [0,1] intensity; scale factor in {1,2,3,4};
    jpeg quality in [1,100]; salt_pepper density in [0,1]; upscale_percent
    size change in percent.
    """

    kind: str
    param: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown degradation kind {self.kind!r}")


@dataclass(frozen=True)
class DegradationChain:
    """Ordered composition of degradation steps, applied left to right."""

    steps: "tuple[DegradationSpec, ...]" = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def with_seeds(self, seed: int) -> "DegradationChain":
        """Copy with per-step seeds derived from (seed, step index)."""
        return DegradationChain(tuple(
            DegradationSpec(s.kind, s.param, rng.mix(seed, i))
            for i, s in enumerate(self.steps)
        ))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def apply_awgn(img: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise of standard deviation sigma."""
    if sigma < 0:
        raise InvalidParameterError(f"awgn sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.astype(np.float32, copy=True)
    noise = rng.stream(seed, rng.TAG_AWGN).normal(0.0, sigma, size=img.shape)
    return clip01(img.astype(np.float64) + noise).astype(np.float32)


def apply_scale_degradation(img: np.ndarray, s: int) -> np.ndarray:
    """Bicubic downscale by s then upscale back: low-resolution simulation."""
    if s not in SCALE_FACTORS:
        raise InvalidParameterError(f"scale factor must be one of {SCALE_FACTORS}, got {s}")
    h, w = img.shape[:2]
    if h < s or w < s:
        raise InvalidParameterError(f"image {h}x{w} smaller than scale factor {s}")
    if s == 1:
        return img.astype(np.float32, copy=True)
    low_h = max(1, round_half_up(h / s))
    low_w = max(1, round_half_up(w / s))
    low = resize(img, low_h, low_w)
    return clip01(resize(low, h, w))


def apply_jpeg(img: np.ndarray, quality: int) -> np.ndarray:
    """Round trip through a baseline JPEG codec at the given quality.

    Operates on the 8-bit quantized image; grayscale uses single-component
    JPEG.
    """
    quality = int(quality)
    if not 1 <= quality <= 100:
        raise InvalidParameterError(f"jpeg quality must be in [1,100], got {quality}")
    arr = to_uint8(img)
    pil = Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")
    buf = io.BytesIO()
    pil.save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    with Image.open(buf) as back:
        out = np.asarray(back.convert("L" if arr.ndim == 2 else "RGB"))
    return from_uint8(out)


def apply_salt_pepper(img: np.ndarray, density: float, seed: int = 0) -> np.ndarray:
    """Replace a fraction ~density of pixels by 0 or 1 with equal probability."""
    if not 0.0 <= density <= 1.0:
        raise InvalidParameterError(f"salt-pepper density must be in [0,1], got {density}")
    if density == 0:
        return img.astype(np.float32, copy=True)
    gen = rng.stream(seed, rng.TAG_SALT_PEPPER)
    hw = img.shape[:2]
    hit = gen.random(hw) < density
    salt = gen.random(hw) < 0.5
    impulse = salt.astype(np.float32)
    out = img.astype(np.float32, copy=True)
    if out.ndim == 3:
        out[hit, :] = impulse[hit, None]
    else:
        out[hit] = impulse[hit]
    return out


def apply_upscale_percent(img: np.ndarray, percent: float) -> np.ndarray:
    """Bicubic resize by (1 + percent/100); dimensions round half-up."""
    if percent <= -100:
        raise InvalidParameterError(f"upscale percent must be > -100, got {percent}")
    h, w = img.shape[:2]
    factor = 1.0 + percent / 100.0
    out_h = round_half_up(h * factor)
    out_w = round_half_up(w * factor)
    if out_h < 1 or out_w < 1:
        raise InvalidParameterError(
            f"upscaling {h}x{w} by {percent}% gives degenerate size {out_h}x{out_w}"
        )
    if (out_h, out_w) == (h, w):
        return img.astype(np.float32, copy=True)
    return clip01(resize(img, out_h, out_w))


def apply_spec(img: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    if spec.kind == "awgn":
        return apply_awgn(img, spec.param, spec.seed)
    if spec.kind == "scale":
        return apply_scale_degradation(img, int(spec.param))
    if spec.kind == "jpeg":
        return apply_jpeg(img, int(spec.param))
    if spec.kind == "salt_pepper":
        return apply_salt_pepper(img, spec.param, spec.seed)
    if spec.kind == "upscale_percent":
        return apply_upscale_percent(img, spec.param)
    raise InvalidParameterError(f"unknown degradation kind {spec.kind!r}")


def apply_chain(img: np.ndarray, chain: DegradationChain) -> np.ndarray:
    """Apply chain steps left to right; step errors carry the step index."""
    if not chain.steps:
        raise InvalidParameterError("empty degradation chain")
    out = img
    for i, spec in enumerate(chain.steps):
        try:
            out = apply_spec(out, spec)
        except InvalidParameterError as e:
            raise ChainStepError(i, spec.kind, e) from e
    return out


# Chain DSL: chain := step ('|' step)*; step := kind ':' number[('/' number)]
# e.g. "awgn:50/255|jpeg:30".  Seeds are not part of the grammar; parse_chain
# derives per-step seeds from its seed argument.

def _parse_number(text: str, column: int) -> float:
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError):
            raise ChainParseError(f"bad rational number {text!r}", column) from None
    try:
        return float(text)
    except ValueError:
        raise ChainParseError(f"bad number {text!r}", column) from None


def parse_chain(text: str, seed: int = 0) -> DegradationChain:
    """Parse the chain DSL; per-step seeds derived from (seed, step index)."""
    if not text.strip():
        raise ChainParseError("empty chain", 0)
    steps = []
    column = 0
    for part in text.split("|"):
        if ":" not in part:
            raise ChainParseError(f"step {part!r} missing ':'", column)
        kind, _, value = part.partition(":")
        kind = kind.strip()
        if kind not in KINDS:
            raise ChainParseError(f"unknown kind {kind!r}", column)
        param = _parse_number(value.strip(), column + len(kind) + 1)
        steps.append(DegradationSpec(kind, param, rng.mix(seed, len(steps))))
        column += len(part) + 1
    return DegradationChain(tuple(steps))


def render_chain(chain: DegradationChain) -> str:
    """Inverse of parse_chain up to number formatting (seeds not rendered)."""
    parts = []
    for s in chain.steps:
        if s.kind in ("scale", "jpeg") or float(s.param).is_integer():
            parts.append(f"{s.kind}:{int(s.param)}")
        else:
            parts.append(f"{s.kind}:{s.param!r}")
    return "|".join(parts)
