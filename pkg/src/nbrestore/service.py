"""HTTP inference service.

Versioned endpoints under /v1/: POST /v1/restore runs one forward pass,
GET /v1/model/info and /v1/health report state, POST /v1/admin/reload swaps
the checkpoint atomically, POST /v1/debug/attr-map-echo round-trips an
attribute map (the UI's fidelity check).

Wire format: requests are multipart/form-data (binary image parts + a JSON
"meta" text part); the restore response is multipart/mixed with a JSON
metadata part and PNG image parts.  Response bodies are deterministic for
identical (request, checkpoint) pairs — timing travels in the X-Restore-Ms
header, and the part boundary is fixed.
"""

from __future__ import annotations

import base64
import json
import threading
import time
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import Response

from . import __version__
from .attributes import (
    AttributeVector,
    constant_map,
    decode_map_png,
    encode_map_png,
    map_from_uint16,
    map_to_uint16,
    validate_map,
)
from .errors import NbrestoreError, ShapeMismatchError
from .imgio import clip01, decode_image, encode_png
from .metrics import psnr, ssim
from .model import ModelCheckpoint, forward, load_checkpoint

_BOUNDARY = "nbrestore-5c2b1f9e"


class CheckpointHolder:
    """Atomic checkpoint reference with a 'reloading' flag."""

    def __init__(self, ckpt: "ModelCheckpoint | None" = None):
        self._lock = threading.Lock()
        self._ckpt = ckpt
        self._reloading = False

    def get(self) -> "ModelCheckpoint | None":
        with self._lock:
            return self._ckpt

    def reloading(self) -> bool:
        with self._lock:
            return self._reloading

    def reload(self, path: "str | Path") -> ModelCheckpoint:
        with self._lock:
            self._reloading = True
        try:
            ckpt = load_checkpoint(path)
            with self._lock:
                self._ckpt = ckpt
            return ckpt
        finally:
            with self._lock:
                self._reloading = False


def _multipart_mixed(parts: "list[tuple[str, str, bytes]]") -> bytes:
    chunks = []
    for name, content_type, data in parts:
        chunks.append(
            f"--{_BOUNDARY}\r\n"
            f"Content-Type: {content_type}\r\n"
            f"Content-Disposition: inline; name=\"{name}\"\r\n"
            f"Content-Length: {len(data)}\r\n\r\n".encode())
        chunks.append(data)
        chunks.append(b"\r\n")
    chunks.append(f"--{_BOUNDARY}--\r\n".encode())
    return b"".join(chunks)


def parse_multipart_mixed(body: bytes) -> "dict[str, tuple[str, bytes]]":
    """Parse a response produced by _multipart_mixed: {name: (ctype, data)}."""
    delim = f"--{_BOUNDARY}".encode()
    parts = {}
    for section in body.split(delim)[1:]:
        if section.startswith(b"--"):
            break
        header_blob, _, payload = section.lstrip(b"\r\n").partition(b"\r\n\r\n")
        headers = {}
        for line in header_blob.decode().split("\r\n"):
            key, _, value = line.partition(":")
            headers[key.strip().lower()] = value.strip()
        name = headers.get("content-disposition", "").split('name="')[1].split('"')[0]
        length = int(headers["content-length"])
        parts[name] = (headers.get("content-type", ""), payload[:length])
    return parts


def create_app(checkpoint: "str | Path | ModelCheckpoint | None",
               max_pixels: int = 4_000_000) -> FastAPI:
    app = FastAPI(title="nbrestore", version=__version__)
    if checkpoint is None or isinstance(checkpoint, ModelCheckpoint):
        holder = CheckpointHolder(checkpoint)
    else:
        holder = CheckpointHolder(load_checkpoint(checkpoint))
    app.state.holder = holder
    app.state.max_pixels = max_pixels

    def _current() -> ModelCheckpoint:
        ckpt = holder.get()
        if ckpt is None:
            raise HTTPException(503, "no checkpoint loaded")
        return ckpt

    @app.get("/v1/health")
    def health():
        return {"status": "reloading" if holder.reloading() else "ok",
                "model_loaded": holder.get() is not None}

    @app.get("/v1/model/info")
    def model_info():
        ckpt = _current()
        return {
            "config": vars(ckpt.config),
            "channel_order": list(ckpt.channel_order),
            "provenance": ckpt.provenance,
            "checkpoint_id": ckpt.weights_hash(),
            "toolkit_version": __version__,
            "max_pixels": max_pixels,
        }

    @app.post("/v1/admin/reload")
    def admin_reload(payload: dict):
        path = payload.get("path")
        if not path:
            raise HTTPException(400, "body must be {'path': <checkpoint path>}")
        try:
            ckpt = holder.reload(path)
        except (OSError, NbrestoreError) as e:
            raise HTTPException(400, f"reload failed: {e}")
        return {"status": "ok", "checkpoint_id": ckpt.weights_hash()}

    @app.post("/v1/debug/attr-map-echo")
    def attr_map_echo(attr_map: UploadFile = File(...)):
        try:
            attrs = decode_map_png(attr_map.file.read())
        except ValueError as e:
            raise HTTPException(400, str(e))
        return Response(content=encode_map_png(attrs), media_type="image/png")

    @app.post("/v1/restore")
    def restore(image: UploadFile = File(...),
                meta: str = Form("{}"),
                attr_map: "UploadFile | None" = File(None),
                reference: "UploadFile | None" = File(None)):
        t0 = time.monotonic()
        ckpt = _current()
        try:
            options = json.loads(meta)
        except json.JSONDecodeError as e:
            raise HTTPException(400, f"meta is not valid JSON: {e}")
        try:
            img = decode_image(image.file.read(), grayscale=True)
        except Exception as e:
            raise HTTPException(400, f"image does not decode: {e}")
        h, w = img.shape
        if h * w > max_pixels:
            raise HTTPException(413, f"image has {h * w} pixels, "
                                     f"limit is {max_pixels}")

        scalar = options.get("attributes")
        map_b64 = options.get("attr_map_base64")
        sources = sum(x is not None for x in (scalar, attr_map, map_b64))
        if sources != 1:
            raise HTTPException(
                400, "exactly one attribute source is required: meta.attributes, "
                     "meta.attr_map_base64, or an attr_map file part")
        if scalar is not None:
            try:
                vec = AttributeVector(float(scalar.get("noise", 0)),
                                      float(scalar.get("scale", 0)),
                                      float(scalar.get("jpeg", 0)))
            except (TypeError, ValueError, AttributeError):
                raise HTTPException(400, "meta.attributes must be "
                                         "{noise, scale, jpeg} numbers")
            # quantize through the 16-bit wire grid so a scalar triple and
            # its encoded constant map give bit-identical restorations
            attrs = map_from_uint16(map_to_uint16(constant_map(vec, h, w)))
        else:
            raw = attr_map.file.read() if attr_map is not None \
                else base64.b64decode(map_b64)
            try:
                attrs = decode_map_png(raw)
                validate_map(attrs, h, w)
            except (ValueError, ShapeMismatchError) as e:
                raise HTTPException(400, f"attribute map rejected: {e}")

        restored, residual = forward(ckpt, img, attrs)

        parts = [("restored", "image/png", encode_png(restored))]
        if options.get("return_residual"):
            parts.append(("residual", "image/png",
                          encode_png(clip01(residual + 0.5))))
        meta_out = {
            "checkpoint_id": ckpt.weights_hash(),
            "toolkit_version": __version__,
            "width": w, "height": h,
        }
        if reference is not None:
            try:
                ref = decode_image(reference.file.read(), grayscale=True)
            except Exception as e:
                raise HTTPException(400, f"reference does not decode: {e}")
            if ref.shape != restored.shape:
                raise HTTPException(
                    400, f"reference is {ref.shape[0]}x{ref.shape[1]} but the "
                         f"image is {h}x{w}")
            value = psnr(ref, restored)
            meta_out["psnr"] = "inf" if value == float("inf") else value
            meta_out["ssim"] = ssim(ref, restored)
        parts.insert(0, ("meta", "application/json",
                         json.dumps(meta_out, sort_keys=True).encode()))
        body = _multipart_mixed(parts)
        elapsed_ms = (time.monotonic() - t0) * 1000.0
        return Response(
            content=body,
            media_type=f"multipart/mixed; boundary={_BOUNDARY}",
            headers={"X-Restore-Ms": f"{elapsed_ms:.1f}"},
        )

    return app
