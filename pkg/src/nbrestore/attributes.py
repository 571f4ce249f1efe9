"""Degradation attribute encoding and per-pixel attribute maps.

Three normalized channels, fixed order (noise, scale, jpeg):
  noise: 0 at sigma=0, 1 at sigma=55/255, linear.
  scale: 0 at x1, 1 at x4, linear.
  jpeg:  0 at quality 100, 1 at quality 0, linear.

Parameters beyond the training range clamp to [0,1] with a warning so
interactive use can sweep freely; structurally invalid parameters raise.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .degrade import DegradationSpec
from .errors import InvalidParameterError, NoTrueAttributeError, ShapeMismatchError

CHANNEL_ORDER = ("noise", "scale", "jpeg")

NOISE_SIGMA_MAX = 55.0 / 255.0
SCALE_MIN, SCALE_MAX = 1.0, 4.0

MAP_FORMAT_VERSION = 1


def _clamp01(value: float, what: str) -> float:
    if value < 0.0 or value > 1.0:
        warnings.warn(f"{what} outside training range; clamping to [0,1]",
                      stacklevel=3)
    return min(1.0, max(0.0, value))


def encode_noise(sigma: float) -> float:
    """sigma (intensity units) -> [0,1]; 0 at sigma=0, 1 at sigma=55/255."""
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    return _clamp01(sigma / NOISE_SIGMA_MAX, f"noise sigma {sigma}")


def encode_scale(s: float) -> float:
    """scale factor -> [0,1]; 0 at x1, 1 at x4."""
    if s < 1:
        raise InvalidParameterError(f"scale factor must be >= 1, got {s}")
    return _clamp01((s - SCALE_MIN) / (SCALE_MAX - SCALE_MIN), f"scale factor {s}")


def encode_jpeg(q: float) -> float:
    """JPEG quality -> [0,1]; 0 at quality 100, 1 at quality 0."""
    if not 0 <= q <= 100:
        raise InvalidParameterError(f"jpeg quality must be in [0,100], got {q}")
    return (100.0 - q) / 100.0


def decode_noise(v: float) -> float:
    return v * NOISE_SIGMA_MAX


def decode_scale(v: float) -> float:
    return SCALE_MIN + v * (SCALE_MAX - SCALE_MIN)


def decode_jpeg(v: float) -> float:
    return 100.0 - 100.0 * v


@dataclass(frozen=True)
class AttributeVector:
    """The three normalized attributes as scalars; components clamp to [0,1]."""

    noise: float = 0.0
    scale: float = 0.0
    jpeg: float = 0.0

    def __post_init__(self):
        for name in CHANNEL_ORDER:
            v = getattr(self, name)
            object.__setattr__(self, name, min(1.0, max(0.0, float(v))))

    def as_tuple(self) -> "tuple[float, float, float]":
        return (self.noise, self.scale, self.jpeg)


def from_spec(spec: DegradationSpec) -> AttributeVector:
    """True attribute vector of a single degradation step."""
    if spec.kind == "awgn":
        return AttributeVector(noise=encode_noise(spec.param))
    if spec.kind == "scale":
        return AttributeVector(scale=encode_scale(spec.param))
    if spec.kind == "jpeg":
        return AttributeVector(jpeg=encode_jpeg(spec.param))
    raise NoTrueAttributeError(
        f"degradation kind {spec.kind!r} has no true attribute channel; "
        "choose a surrogate vector explicitly"
    )


def constant_map(vec: AttributeVector, h: int, w: int) -> np.ndarray:
    """(h, w, 3) map with every pixel equal to vec."""
    if h < 1 or w < 1:
        raise InvalidParameterError(f"map dimensions must be >= 1, got {h}x{w}")
    out = np.empty((h, w, 3), dtype=np.float32)
    out[..., 0] = vec.noise
    out[..., 1] = vec.scale
    out[..., 2] = vec.jpeg
    return out


def gradient_map(channel: int, v_start: float, v_end: float, axis: str,
                 h: int, w: int) -> np.ndarray:
    """Map with one plane ramping linearly from v_start to v_end; others 0.

    axis 'horizontal' ramps over columns, 'vertical' over rows.
    """
    if channel not in (0, 1, 2):
        raise InvalidParameterError(f"channel must be 0, 1 or 2, got {channel}")
    if axis not in ("horizontal", "vertical"):
        raise InvalidParameterError(f"axis must be horizontal|vertical, got {axis!r}")
    for v in (v_start, v_end):
        if not 0.0 <= v <= 1.0:
            raise InvalidParameterError(f"ramp value {v} outside [0,1]")
    out = np.zeros((h, w, 3), dtype=np.float32)
    n = w if axis == "horizontal" else h
    ramp = np.full(n, v_start, dtype=np.float32) if n == 1 else \
        np.linspace(v_start, v_end, n, dtype=np.float32)
    out[..., channel] = ramp[None, :] if axis == "horizontal" else ramp[:, None]
    return out


def validate_map(attrs: np.ndarray, h: int, w: int) -> np.ndarray:
    if attrs.ndim != 3 or attrs.shape[2] != 3:
        raise ShapeMismatchError(f"attribute map must be (H, W, 3), got {attrs.shape}")
    if attrs.shape[:2] != (h, w):
        raise ShapeMismatchError(
            f"attribute map is {attrs.shape[0]}x{attrs.shape[1]} "
            f"but the image is {h}x{w}"
        )
    if float(attrs.min()) < 0.0 or float(attrs.max()) > 1.0:
        raise ValueError("attribute map values outside [0,1]")
    return attrs


# Persistence: 3-plane 16-bit PNG (value = round(v*65535); file channel order
# R,G,B = noise, scale, jpeg) plus a JSON sidecar with channel order/version.

def map_to_uint16(attrs: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(attrs, 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)


def map_from_uint16(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float32) / np.float32(65535.0)


def encode_map_png(attrs: np.ndarray) -> bytes:
    """16-bit RGB PNG bytes for an (H, W, 3) map in [0,1]."""
    raw = map_to_uint16(attrs)
    ok, buf = cv2.imencode(".png", raw[..., ::-1])  # cv2 expects BGR
    if not ok:
        raise RuntimeError("PNG encoding failed")
    return bytes(buf)


def decode_map_png(data: bytes) -> np.ndarray:
    arr = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise ValueError("not a decodable PNG")
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint16:
        raise ValueError(
            f"attribute map PNG must be 3-plane 16-bit, got shape "
            f"{arr.shape} dtype {arr.dtype}"
        )
    return map_from_uint16(arr[..., ::-1])


def save_attribute_map(attrs: np.ndarray, path: "str | Path") -> None:
    path = Path(path)
    path.write_bytes(encode_map_png(attrs))
    sidecar = {
        "format_version": MAP_FORMAT_VERSION,
        "channel_order": list(CHANNEL_ORDER),
        "encoding": "uint16/65535",
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2) + "\n")


def load_attribute_map(path: "str | Path") -> np.ndarray:
    path = Path(path)
    attrs = decode_map_png(path.read_bytes())
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        order = tuple(sidecar.get("channel_order", CHANNEL_ORDER))
        if order != CHANNEL_ORDER:
            if sorted(order) != sorted(CHANNEL_ORDER):
                raise ValueError(f"unknown channel order {order}")
            warnings.warn(f"remapping attribute channels from {order}")
            attrs = attrs[..., [order.index(c) for c in CHANNEL_ORDER]]
    return attrs
