"""Training corpora: ingestion, addressable sample generation, shards.

Every training sample is a pure function of (manifest, index): the degradation
type, its parameter, the source image, and the crop offset are all drawn from
a Philox stream keyed by (master_seed, index).  That makes the dataset
resumable, shardable, and bit-reproducible from the manifest alone.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, rng
from .attributes import AttributeVector, from_spec
from .degrade import (
    JPEG_QUALITY_RANGE,
    NOISE_SIGMA_RANGE,
    SCALE_FACTORS,
    DegradationSpec,
    apply_spec,
)
from .errors import DatasetError
from .imgio import load_image

SCHEMA_VERSION = 1
DEFAULT_PATCH = 50
TRAIN_KINDS = ("awgn", "scale", "jpeg")

# scale degrades the full source then crops (resampling has no boundary
# artifacts inside the patch); pointwise/blockwise kinds degrade the crop,
# so re-applying the recorded spec to the clean crop is bit-exact.
_FULL_THEN_CROP_KINDS = ("scale",)

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

_SOURCE_RETRIES = 16


@dataclass(frozen=True)
class SourceImage:
    path: str
    sha256: str
    height: int
    width: int
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    patch_size: int
    sample_count: int
    master_seed: int
    split: str
    sources: "tuple[SourceImage, ...]"
    degradation_kinds: "tuple[str, ...]" = TRAIN_KINDS
    augment: bool = False  # flip/rotation augmentation; off by default
    schema_version: int = SCHEMA_VERSION
    generator_version: str = __version__

    def active_sources(self) -> "list[SourceImage]":
        return [s for s in self.sources if s.split == self.split]

    def for_split(self, split: str, sample_count: "int | None" = None) -> "DatasetManifest":
        return replace(self, split=split,
                       sample_count=self.sample_count if sample_count is None
                       else sample_count)

    def to_json(self) -> str:
        data = {
            "schema_version": self.schema_version,
            "generator_version": self.generator_version,
            "patch_size": self.patch_size,
            "sample_count": self.sample_count,
            "master_seed": self.master_seed,
            "split": self.split,
            "degradation_kinds": list(self.degradation_kinds),
            "sources": [vars(s) for s in self.sources],
        }
        if self.augment:  # omitted when off so existing manifests keep their hash
            data["augment"] = True
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(self.to_json())


def load_manifest(path: "str | Path") -> DatasetManifest:
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(
            f"manifest schema {data.get('schema_version')} != {SCHEMA_VERSION}")
    return DatasetManifest(
        patch_size=data["patch_size"],
        sample_count=data["sample_count"],
        master_seed=data["master_seed"],
        split=data["split"],
        sources=tuple(SourceImage(**s) for s in data["sources"]),
        degradation_kinds=tuple(data["degradation_kinds"]),
        augment=bool(data.get("augment", False)),
        schema_version=data["schema_version"],
        generator_version=data["generator_version"],
    )


def split_names(names: "list[str]", ratio: float, seed: int) -> "dict[str, str]":
    """Deterministic train/val assignment by hashed filename.

    train gets floor(n * ratio) names; the remainder goes to val.
    """
    if not 0.0 < ratio < 1.0:
        raise DatasetError(f"split ratio must be in (0,1), got {ratio}")
    def key(name: str) -> int:
        digest = hashlib.sha256(f"{name}:{seed}".encode()).digest()
        return int.from_bytes(digest[:8], "little")
    ordered = sorted(names, key=key)
    n_train = int(len(ordered) * ratio)
    if n_train == 0 or n_train == len(ordered):
        raise DatasetError(
            f"split of {len(ordered)} sources at ratio {ratio} leaves an "
            "empty side; both splits must be non-empty")
    train = set(ordered[:n_train])
    return {name: ("train" if name in train else "val") for name in names}


def ingest_corpus(directory: "str | Path", split_ratio: float = 0.95,
                  seed: int = 0, sample_count: int = 8192,
                  patch_size: int = DEFAULT_PATCH,
                  kinds: "tuple[str, ...]" = TRAIN_KINDS,
                  manifest_path: "str | Path | None" = None) -> DatasetManifest:
    """Scan a directory of clean images into a train-split manifest.

    Images convert to grayscale luminance in [0,1].  Undecodable files are
    skipped with a warning; an empty result is an error.  The val-split view
    is `manifest.for_split("val")`.
    """
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not files:
        raise DatasetError(f"no image files in {directory}")
    records = []
    for p in files:
        try:
            img = load_image(p, grayscale=True)
        except Exception as e:  # undecodable: skip, keep going
            import warnings
            warnings.warn(f"skipping undecodable {p.name}: {e}")
            continue
        records.append((p, hashlib.sha256(p.read_bytes()).hexdigest(),
                        img.shape[0], img.shape[1]))
    if not records:
        raise DatasetError(f"no decodable images in {directory}")
    assignment = split_names([p.name for p, *_ in records], split_ratio, seed)
    sources = tuple(
        SourceImage(path=str(p), sha256=sha, height=h, width=w,
                    split=assignment[p.name])
        for p, sha, h, w in records
    )
    manifest = DatasetManifest(
        patch_size=patch_size, sample_count=sample_count, master_seed=seed,
        split="train", sources=sources, degradation_kinds=tuple(kinds),
    )
    if manifest_path is not None:
        manifest.save(manifest_path)
    return manifest


@dataclass(frozen=True)
class SampleProvenance:
    source_index: int
    source_path: str
    crop_y: int
    crop_x: int
    spec: DegradationSpec
    mode: str  # "crop_then_degrade" | "full_then_crop"
    augment_k: int = 0  # dihedral-group index: (k % 4) quarter turns, k >= 4 flips


def _dihedral(img: np.ndarray, k: int) -> np.ndarray:
    out = np.rot90(img, k % 4)
    if k >= 4:
        out = np.fliplr(out)
    return np.ascontiguousarray(out)


@dataclass(frozen=True)
class TrainingSample:
    input_patch: np.ndarray
    target_patch: np.ndarray
    attribute: AttributeVector
    provenance: SampleProvenance


class _SourceCache:
    """Per-process cache of decoded, hash-verified source images."""

    def __init__(self):
        self._cache: "dict[str, np.ndarray]" = {}

    def get(self, source: SourceImage) -> np.ndarray:
        img = self._cache.get(source.path)
        if img is None:
            path = Path(source.path)
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            if digest != source.sha256:
                raise DatasetError(
                    f"{source.path} content hash changed since ingestion")
            img = load_image(path, grayscale=True)
            self._cache[source.path] = img
        return img


_sources = _SourceCache()


def _draw_spec(gen: np.random.Generator, kinds: "tuple[str, ...]",
               seed: int) -> DegradationSpec:
    kind = kinds[int(gen.integers(len(kinds)))]
    if kind == "awgn":
        param = float(gen.uniform(*NOISE_SIGMA_RANGE))
    elif kind == "scale":
        param = float(SCALE_FACTORS[int(gen.integers(len(SCALE_FACTORS)))])
    elif kind == "jpeg":
        lo, hi = JPEG_QUALITY_RANGE
        param = float(int(gen.integers(lo, hi + 1)))
    else:
        raise DatasetError(f"kind {kind!r} not supported in training data")
    return DegradationSpec(kind, param, seed)


def generate_sample(manifest: DatasetManifest, index: int) -> TrainingSample:
    """The index-th sample; depends only on (manifest, index)."""
    if index >= manifest.sample_count:
        raise IndexError(f"sample {index} >= declared count {manifest.sample_count}")
    gen = rng.stream(manifest.master_seed, rng.TAG_SAMPLE, index)
    spec = _draw_spec(gen, manifest.degradation_kinds,
                      seed=rng.mix(manifest.master_seed, index))
    active_idx = [i for i, s in enumerate(manifest.sources)
                  if s.split == manifest.split]
    if not active_idx:
        raise DatasetError(f"manifest has no sources in split {manifest.split!r}")
    patch = manifest.patch_size
    source = None
    source_index = -1
    for _ in range(_SOURCE_RETRIES):
        source_index = active_idx[int(gen.integers(len(active_idx)))]
        candidate = manifest.sources[source_index]
        if candidate.height >= patch and candidate.width >= patch:
            source = candidate
            break
    if source is None:
        raise DatasetError(
            f"no source >= {patch}x{patch} found in {_SOURCE_RETRIES} draws")
    full = _sources.get(source)
    augment_k = int(gen.integers(8)) if manifest.augment else 0
    if augment_k:
        # transform before degrading so the recorded clean crop stays truthful
        full = _dihedral(full, augment_k)
    h, w = full.shape
    cy = int(gen.integers(h - patch + 1))
    cx = int(gen.integers(w - patch + 1))
    target = np.ascontiguousarray(full[cy:cy + patch, cx:cx + patch])
    if spec.kind in _FULL_THEN_CROP_KINDS:
        mode = "full_then_crop"
        degraded_full = apply_spec(full, spec)
        inp = np.ascontiguousarray(degraded_full[cy:cy + patch, cx:cx + patch])
    else:
        mode = "crop_then_degrade"
        inp = apply_spec(target, spec)
    return TrainingSample(
        input_patch=inp,
        target_patch=target,
        attribute=from_spec(spec),
        provenance=SampleProvenance(
            source_index=source_index,
            source_path=source.path,
            crop_y=cy, crop_x=cx, spec=spec, mode=mode,
            augment_k=augment_k,
        ),
    )


def regenerate_input(manifest: DatasetManifest, sample: TrainingSample) -> np.ndarray:
    """Re-run the recorded degradation pipeline; must be bit-exact."""
    prov = sample.provenance
    patch = manifest.patch_size
    if prov.mode == "crop_then_degrade":
        return apply_spec(sample.target_patch, prov.spec)
    full = _sources.get(manifest.sources[prov.source_index])
    if prov.augment_k:
        full = _dihedral(full, prov.augment_k)
    deg = apply_spec(full, prov.spec)
    return np.ascontiguousarray(
        deg[prov.crop_y:prov.crop_y + patch, prov.crop_x:prov.crop_x + patch])


# Shard files: sequential length-prefixed binary records.
# record := u32 payload_len, payload
# payload := magic "NBRS", u8 version, u16 h, u16 w,
#            input float32[h*w], target float32[h*w], attr float64[3],
#            u8 kind_index, f64 param, u64 seed,
#            u32 source_index, u16 crop_y, u16 crop_x, u8 mode, u8 augment_k
# All integers and floats little-endian.

_SHARD_MAGIC = b"NBRS"
_SHARD_VERSION = 1
_KIND_INDEX = {"awgn": 0, "scale": 1, "jpeg": 2, "salt_pepper": 3,
               "upscale_percent": 4}
_KIND_FROM_INDEX = {v: k for k, v in _KIND_INDEX.items()}
_MODE_INDEX = {"crop_then_degrade": 0, "full_then_crop": 1}
_MODE_FROM_INDEX = {v: k for k, v in _MODE_INDEX.items()}


def _encode_record(sample: TrainingSample) -> bytes:
    h, w = sample.input_patch.shape
    prov = sample.provenance
    payload = b"".join([
        _SHARD_MAGIC,
        struct.pack("<BHH", _SHARD_VERSION, h, w),
        sample.input_patch.astype("<f4").tobytes(),
        sample.target_patch.astype("<f4").tobytes(),
        np.asarray(sample.attribute.as_tuple(), dtype="<f8").tobytes(),
        struct.pack("<BdQIHHBB", _KIND_INDEX[prov.spec.kind], prov.spec.param,
                    prov.spec.seed, prov.source_index, prov.crop_y,
                    prov.crop_x, _MODE_INDEX[prov.mode], prov.augment_k),
    ])
    return struct.pack("<I", len(payload)) + payload


def _decode_record(payload: bytes, source_paths: "list[str]") -> TrainingSample:
    if payload[:4] != _SHARD_MAGIC:
        raise DatasetError("bad shard record magic")
    version, h, w = struct.unpack_from("<BHH", payload, 4)
    if version != _SHARD_VERSION:
        raise DatasetError(f"shard record version {version} != {_SHARD_VERSION}")
    off = 9
    n = h * w
    inp = np.frombuffer(payload, dtype="<f4", count=n, offset=off).reshape(h, w)
    off += 4 * n
    tgt = np.frombuffer(payload, dtype="<f4", count=n, offset=off).reshape(h, w)
    off += 4 * n
    av = np.frombuffer(payload, dtype="<f8", count=3, offset=off)
    off += 24
    kind_i, param, seed, src_i, cy, cx, mode_i, augment_k = struct.unpack_from(
        "<BdQIHHBB", payload, off)
    spec = DegradationSpec(_KIND_FROM_INDEX[kind_i], param, seed)
    return TrainingSample(
        input_patch=inp.copy(), target_patch=tgt.copy(),
        attribute=AttributeVector(*map(float, av)),
        provenance=SampleProvenance(
            source_index=src_i,
            source_path=source_paths[src_i] if src_i < len(source_paths) else "",
            crop_y=cy, crop_x=cx, spec=spec, mode=_MODE_FROM_INDEX[mode_i],
            augment_k=augment_k),
    )


def write_shards(manifest: DatasetManifest, shard_size: int,
                 out_dir: "str | Path") -> "list[Path]":
    """Serialize all manifest samples into fixed-count shards + an index."""
    if shard_size < 1:
        raise DatasetError(f"shard size must be >= 1, got {shard_size}")
    if manifest.sample_count < 1:
        raise DatasetError("manifest declares no samples")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shard_paths = []
    counts = []
    index = 0
    shard_id = 0
    while index < manifest.sample_count:
        count = min(shard_size, manifest.sample_count - index)
        path = out_dir / f"shard_{shard_id:04d}.bin"
        try:
            with open(path, "wb") as f:
                for i in range(index, index + count):
                    f.write(_encode_record(generate_sample(manifest, i)))
        except OSError as e:
            raise DatasetError(f"writing shard {shard_id} failed: {e}") from e
        shard_paths.append(path)
        counts.append(count)
        index += count
        shard_id += 1
    index_data = {
        "manifest": json.loads(manifest.to_json()),
        "manifest_hash": manifest.content_hash(),
        "shards": [{"file": p.name, "count": c}
                   for p, c in zip(shard_paths, counts)],
        "total": manifest.sample_count,
    }
    (out_dir / "index.json").write_text(
        json.dumps(index_data, indent=2, sort_keys=True) + "\n")
    return shard_paths


def read_shards(out_dir: "str | Path"):
    """Yield TrainingSamples from a shard directory in index order."""
    out_dir = Path(out_dir)
    index = json.loads((out_dir / "index.json").read_text())
    source_paths = [s["path"] for s in index["manifest"]["sources"]]
    for entry in index["shards"]:
        data = (out_dir / entry["file"]).read_bytes()
        pos = 0
        for _ in range(entry["count"]):
            (length,) = struct.unpack_from("<I", data, pos)
            pos += 4
            yield _decode_record(data[pos:pos + length], source_paths)
            pos += length
