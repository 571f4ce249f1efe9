"""Residual conv net conditioned on attribute channels, plus checkpoints.

Architecture: L conv layers, 3x3 kernels, 64 feature maps, ReLU after every
layer except the last, zero padding 1 so feature maps keep the input size,
no normalization layers.  Input is the degraded image concatenated with the
three attribute planes; the output is the predicted residual, and the
restored image is clip(input + residual, 0, 1).

Checkpoints are a single file: JSON header (config, channel order,
provenance, tensor table) + raw little-endian float32 weights + SHA-256.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from . import rng
from .attributes import CHANNEL_ORDER, validate_map
from .errors import CheckpointError, InvalidParameterError, ShapeMismatchError
from .imgio import clip01

_CKPT_MAGIC = b"NBRCKPT1"
_CKPT_VERSION = 1
_TAG_INIT = 0x30

#: first-layer filter slices that read attribute channels start at this scale
ATTRIBUTE_FILTER_SCALE = 0.1


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 20
    features: int = 64
    kernel_size: int = 3
    image_channels: int = 1
    attribute_channels: int = 3

    def __post_init__(self):
        if self.layers < 2:
            raise InvalidParameterError(f"need >= 2 layers, got {self.layers}")
        if self.features < 1 or self.kernel_size % 2 != 1:
            raise InvalidParameterError("features >= 1 and odd kernel required")

    @property
    def in_channels(self) -> int:
        return self.image_channels + self.attribute_channels


def layer_shapes(config: ModelConfig) -> "list[tuple[tuple[int, ...], tuple[int, ...]]]":
    """(weight_shape, bias_shape) per layer, first to last."""
    k = config.kernel_size
    shapes = []
    for i in range(config.layers):
        cin = config.in_channels if i == 0 else config.features
        cout = config.image_channels if i == config.layers - 1 else config.features
        shapes.append(((cout, cin, k, k), (cout,)))
    return shapes


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(w)) + int(np.prod(b)) for w, b in layer_shapes(config))


def weight_names(config: ModelConfig) -> "list[str]":
    names = []
    for i in range(1, config.layers + 1):
        names.append(f"conv{i:02d}.weight")
        names.append(f"conv{i:02d}.bias")
    return names


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    weights: "dict[str, np.ndarray]"
    channel_order: "tuple[str, ...]" = CHANNEL_ORDER
    provenance: dict = field(default_factory=dict)

    def weights_hash(self) -> str:
        digest = hashlib.sha256()
        for name in weight_names(self.config):
            digest.update(self.weights[name].tobytes())
        return digest.hexdigest()


class ResidualNet(nn.Module):
    """The bare network; predicts the residual from (image + attributes)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        pad = config.kernel_size // 2
        convs = []
        for (cout, cin, k, _), _bias in layer_shapes(config):
            convs.append(nn.Conv2d(cin, cout, k, padding=pad))
        self.convs = nn.ModuleList(convs)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for conv in self.convs[:-1]:
            x = torch.relu(conv(x))
        return self.convs[-1](x)


def to_module(ckpt: ModelCheckpoint, dtype: torch.dtype = torch.float32) -> ResidualNet:
    net = ResidualNet(ckpt.config).to(dtype)
    state = {}
    for i in range(ckpt.config.layers):
        state[f"convs.{i}.weight"] = torch.from_numpy(
            ckpt.weights[f"conv{i + 1:02d}.weight"]).to(dtype)
        state[f"convs.{i}.bias"] = torch.from_numpy(
            ckpt.weights[f"conv{i + 1:02d}.bias"]).to(dtype)
    net.load_state_dict(state)
    net = net.to(memory_format=torch.channels_last)
    net.eval()
    return net


def weights_from_module(net: ResidualNet, config: ModelConfig) -> "dict[str, np.ndarray]":
    out = {}
    for i in range(config.layers):
        w = net.convs[i].weight.detach().to(torch.float32).contiguous().numpy()
        b = net.convs[i].bias.detach().to(torch.float32).contiguous().numpy()
        out[f"conv{i + 1:02d}.weight"] = np.ascontiguousarray(w)
        out[f"conv{i + 1:02d}.bias"] = np.ascontiguousarray(b)
    return out


def build_model(config: ModelConfig, seed: int = 0) -> ModelCheckpoint:
    """Fresh checkpoint: fan-in-scaled Gaussian weights, zero biases.

    The first-layer filter slices that see the attribute channels are scaled
    by ATTRIBUTE_FILTER_SCALE so an untrained model is dominated by the image.
    """
    gen = rng.stream(seed, _TAG_INIT)
    weights: "dict[str, np.ndarray]" = {}
    for i, ((cout, cin, k, _), bias_shape) in enumerate(layer_shapes(config)):
        fan_in = cin * k * k
        std = float(np.sqrt(2.0 / fan_in))
        w = gen.normal(0.0, std, size=(cout, cin, k, k)).astype(np.float32)
        if i == 0:
            w[:, config.image_channels:, :, :] *= ATTRIBUTE_FILTER_SCALE
        weights[f"conv{i + 1:02d}.weight"] = w
        weights[f"conv{i + 1:02d}.bias"] = np.zeros(bias_shape, dtype=np.float32)
    provenance = {
        "init": "fan-in-gaussian(philox)",
        "init_seed": int(seed),
        "attribute_filter_scale": ATTRIBUTE_FILTER_SCALE,
        "init_note": "random initialization (no pretrained weights imported)",
        "epochs_completed": 0,
        "stage": "init",
        "toolkit_version": __import__("nbrestore").__version__,
    }
    return ModelCheckpoint(config=config, weights=weights,
                           channel_order=CHANNEL_ORDER, provenance=provenance)


def forward(ckpt: ModelCheckpoint, img: np.ndarray,
            attrs: np.ndarray) -> "tuple[np.ndarray, np.ndarray]":
    """(restored, residual) for one grayscale image and its attribute map."""
    if img.ndim != 2:
        raise ShapeMismatchError(
            f"expected a grayscale (H, W) image, got shape {img.shape}")
    h, w = img.shape
    if min(h, w) < ckpt.config.kernel_size:
        raise ShapeMismatchError(
            f"image {h}x{w} smaller than the {ckpt.config.kernel_size} kernel")
    validate_map(attrs, h, w)
    if tuple(ckpt.channel_order) != CHANNEL_ORDER:
        raise ShapeMismatchError(
            f"checkpoint channel order {ckpt.channel_order} != runtime "
            f"{CHANNEL_ORDER}; reload with remapping")
    # lazily built torch module, invalidated when the weights change
    weights_hash = ckpt.weights_hash()
    cached = getattr(ckpt, "_cached_module", None)
    if cached is None or cached[0] != weights_hash:
        cached = (weights_hash, to_module(ckpt))
        ckpt._cached_module = cached
    net = cached[1]
    x = np.concatenate([img[None], np.moveaxis(attrs, 2, 0)], axis=0)
    with torch.no_grad():
        t = torch.from_numpy(np.ascontiguousarray(x[None], dtype=np.float32))
        t = t.to(memory_format=torch.channels_last)
        residual = net(t)[0, 0].numpy()
    restored = clip01(img.astype(np.float32) + residual)
    return restored, residual


def _config_to_dict(config: ModelConfig) -> dict:
    return asdict(config)


def save_checkpoint(ckpt: ModelCheckpoint, path: "str | Path") -> None:
    """Single-file container, written atomically (temp + rename)."""
    path = Path(path)
    names = weight_names(ckpt.config)
    tensors = []
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(ckpt.weights[name], dtype="<f4")
        tensors.append({"name": name, "shape": list(arr.shape),
                        "dtype": "<f4", "offset": offset,
                        "nbytes": arr.nbytes})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({
        "format_version": _CKPT_VERSION,
        "config": _config_to_dict(ckpt.config),
        "channel_order": list(ckpt.channel_order),
        "provenance": ckpt.provenance,
        "tensors": tensors,
    }, sort_keys=True).encode()
    body = b"".join([_CKPT_MAGIC, struct.pack("<I", len(header)), header,
                     *blobs])
    digest = hashlib.sha256(body).digest()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + digest)
    os.replace(tmp, path)


def load_checkpoint(path: "str | Path", strict_channel_order: bool = True) -> ModelCheckpoint:
    data = Path(path).read_bytes()
    if len(data) < len(_CKPT_MAGIC) + 4 + 32:
        raise CheckpointError(f"{path}: truncated checkpoint")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt file)")
    if body[:8] != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    (header_len,) = struct.unpack_from("<I", body, 8)
    header = json.loads(body[12:12 + header_len])
    if header["format_version"] != _CKPT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header['format_version']} != {_CKPT_VERSION}")
    config = ModelConfig(**header["config"])
    blob_start = 12 + header_len
    weights = {}
    for t in header["tensors"]:
        start = blob_start + t["offset"]
        arr = np.frombuffer(body, dtype="<f4", count=t["nbytes"] // 4,
                            offset=start).reshape(t["shape"])
        weights[t["name"]] = arr.copy()
    order = tuple(header["channel_order"])
    if order != CHANNEL_ORDER:
        if strict_channel_order:
            raise CheckpointError(
                f"{path}: checkpoint channel order {order} != runtime "
                f"{CHANNEL_ORDER}; load with strict_channel_order=False to remap")
        if sorted(order) != sorted(CHANNEL_ORDER):
            raise CheckpointError(f"{path}: unknown channel order {order}")
        warnings.warn(f"remapping attribute channels from {order}")
        perm = [order.index(c) for c in CHANNEL_ORDER]
        first = weights["conv01.weight"]
        img_ch = config.image_channels
        attr = first[:, img_ch:, :, :][:, perm, :, :]
        weights["conv01.weight"] = np.concatenate(
            [first[:, :img_ch, :, :], attr], axis=1)
        order = CHANNEL_ORDER
    return ModelCheckpoint(config=config, weights=weights,
                           channel_order=order,
                           provenance=header["provenance"])


def zero_final_layer(ckpt: ModelCheckpoint) -> ModelCheckpoint:
    """Copy with the last layer zeroed: forward becomes the identity."""
    weights = {k: v.copy() for k, v in ckpt.weights.items()}
    last = ckpt.config.layers
    weights[f"conv{last:02d}.weight"][:] = 0.0
    weights[f"conv{last:02d}.bias"][:] = 0.0
    out = ModelCheckpoint(config=ckpt.config, weights=weights,
                          channel_order=ckpt.channel_order,
                          provenance=dict(ckpt.provenance))
    out.provenance["note"] = "final layer zeroed (identity model)"
    return out
