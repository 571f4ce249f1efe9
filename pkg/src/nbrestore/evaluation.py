"""Benchmark suites and reports.

A suite is declarative: dataset + degradation chain + attribute policy +
metric options + seed.  Per-image degradation seeds derive from (suite seed,
image index, step index), so a suite run is fully reproducible, and reports
carry no timestamps: same (model, suite) means identical report bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import tarfile
import urllib.request
import zipfile
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, rng
from .attributes import (
    AttributeVector,
    constant_map,
    encode_jpeg,
    encode_noise,
    encode_scale,
    load_attribute_map,
    validate_map,
)
from .degrade import DegradationChain, DegradationSpec, apply_chain, parse_chain, render_chain
from .errors import DatasetError, InvalidParameterError
from .imgio import clip01, load_image
from .metrics import crop_border, psnr, ssim, total_variation
from .model import ModelCheckpoint, forward
from .resample import resize

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

ATTRIBUTE_POLICIES = ("true", "zeros", "vector", "map")
SIZE_MISMATCH_RULES = ("resize_back",)


@dataclass(frozen=True)
class SuiteDefinition:
    name: str
    dataset: str
    chain: DegradationChain
    attribute_policy: str = "true"
    attribute_vector: "AttributeVector | None" = None
    attribute_map_path: "str | None" = None
    border_crop: int = 0
    size_mismatch: str = "resize_back"
    seed: int = 0
    min_mean_psnr: "float | None" = None

    def __post_init__(self):
        if self.attribute_policy not in ATTRIBUTE_POLICIES:
            raise InvalidParameterError(
                f"attribute policy {self.attribute_policy!r} not one of "
                f"{ATTRIBUTE_POLICIES}")
        if self.attribute_policy == "vector" and self.attribute_vector is None:
            raise InvalidParameterError("policy 'vector' needs attribute_vector")
        if self.attribute_policy == "map" and not self.attribute_map_path:
            raise InvalidParameterError("policy 'map' needs attribute_map_path")
        if self.size_mismatch not in SIZE_MISMATCH_RULES:
            raise InvalidParameterError(
                f"size-mismatch rule {self.size_mismatch!r} unknown")
        if not self.chain.steps:
            raise InvalidParameterError("suite chain is empty")

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "dataset": self.dataset,
            "chain": render_chain(self.chain),
            "attribute_policy": self.attribute_policy,
            "border_crop": self.border_crop,
            "size_mismatch": self.size_mismatch,
            "seed": self.seed,
        }
        if self.attribute_vector is not None:
            data["attribute_vector"] = list(self.attribute_vector.as_tuple())
        if self.attribute_map_path:
            data["attribute_map_path"] = self.attribute_map_path
        if self.min_mean_psnr is not None:
            data["min_mean_psnr"] = self.min_mean_psnr
        return data


def suite_from_dict(data: dict) -> SuiteDefinition:
    vec = data.get("attribute_vector")
    return SuiteDefinition(
        name=data["name"],
        dataset=data["dataset"],
        chain=parse_chain(data["chain"]),
        attribute_policy=data.get("attribute_policy", "true"),
        attribute_vector=AttributeVector(*vec) if vec is not None else None,
        attribute_map_path=data.get("attribute_map_path"),
        border_crop=int(data.get("border_crop", 0)),
        size_mismatch=data.get("size_mismatch", "resize_back"),
        seed=int(data.get("seed", 0)),
        min_mean_psnr=data.get("min_mean_psnr"),
    )


def load_suite(path: "str | Path") -> SuiteDefinition:
    return suite_from_dict(json.loads(Path(path).read_text()))


def list_builtin_suites() -> "list[str]":
    files = resources.files("nbrestore").joinpath("suites")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_builtin_suite(name: str, dataset: "str | None" = None) -> SuiteDefinition:
    ref = resources.files("nbrestore").joinpath("suites").joinpath(f"{name}.json")
    if not ref.is_file():
        raise DatasetError(
            f"no built-in suite {name!r}; available: {list_builtin_suites()}")
    suite = suite_from_dict(json.loads(ref.read_text()))
    if dataset is not None:
        suite = replace(suite, dataset=dataset)
    return suite


def image_chain(suite: SuiteDefinition, image_index: int) -> DegradationChain:
    """The chain actually applied to image #image_index (derived seeds)."""
    return DegradationChain(tuple(
        DegradationSpec(s.kind, s.param,
                        rng.mix(suite.seed, rng.TAG_EVAL, image_index, j))
        for j, s in enumerate(suite.chain.steps)
    ))


def true_attribute_vector(chain: DegradationChain) -> AttributeVector:
    """Every channel whose degradation appears in the chain, truly encoded."""
    noise = scale = jpeg = 0.0
    for step in chain.steps:
        if step.kind == "awgn":
            noise = encode_noise(step.param)
        elif step.kind == "scale":
            scale = encode_scale(step.param)
        elif step.kind == "jpeg":
            jpeg = encode_jpeg(step.param)
    return AttributeVector(noise, scale, jpeg)


def resolve_dataset(dataset: str, datasets_root: "str | Path | None" = None) -> Path:
    candidates = [Path(dataset)]
    if datasets_root is not None:
        candidates.append(Path(datasets_root) / dataset)
    for c in candidates:
        if c.is_dir():
            return c
    raise DatasetError(
        f"dataset {dataset!r} not found (tried {[str(c) for c in candidates]}). "
        "Point --datasets-root at a directory containing it, pass a local "
        "image folder instead, or download it with "
        "nbrestore.evaluation.fetch_dataset(name, mirror_url, datasets_root)."
    )


def _dataset_images(directory: Path) -> "list[Path]":
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not files:
        raise DatasetError(f"no images in dataset folder {directory}")
    return files


@dataclass
class EvalReport:
    suite: dict
    checkpoint: dict
    toolkit_version: str
    rows: "list[dict]"
    aggregate: dict
    failures: "list[dict]" = field(default_factory=list)

    def to_json(self) -> str:
        def default(x):
            raise TypeError(f"not serializable: {x!r}")
        data = {
            "suite": self.suite,
            "checkpoint": self.checkpoint,
            "toolkit_version": self.toolkit_version,
            "rows": [_encode_inf(r) for r in self.rows],
            "aggregate": _encode_inf(self.aggregate),
            "failures": self.failures,
        }
        return json.dumps(data, indent=2, sort_keys=True, default=default) + "\n"


def _encode_inf(row: dict) -> dict:
    return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
            for k, v in row.items()}


def _decode_inf(row: dict) -> dict:
    return {k: (math.inf if v == "inf" else v) for k, v in row.items()}


def load_report(path: "str | Path") -> EvalReport:
    data = json.loads(Path(path).read_text())
    return EvalReport(
        suite=data["suite"],
        checkpoint=data["checkpoint"],
        toolkit_version=data["toolkit_version"],
        rows=[_decode_inf(r) for r in data["rows"]],
        aggregate=_decode_inf(data["aggregate"]),
        failures=data.get("failures", []),
    )


def _checkpoint_summary(ckpt: ModelCheckpoint) -> dict:
    return {
        "config": vars(ckpt.config),
        "channel_order": list(ckpt.channel_order),
        "provenance": ckpt.provenance,
        "weights_sha256": ckpt.weights_hash(),
    }


def run_suite(ckpt: ModelCheckpoint, suite: SuiteDefinition,
              datasets_root: "str | Path | None" = None) -> EvalReport:
    """Degrade, restore, and score every image of the suite's dataset."""
    directory = resolve_dataset(suite.dataset, datasets_root)
    rows = []
    failures = []
    suite_map = None
    if suite.attribute_policy == "map":
        suite_map = load_attribute_map(suite.attribute_map_path)
    for index, path in enumerate(_dataset_images(directory)):
        try:
            clean = load_image(path, grayscale=True)
        except Exception as e:
            failures.append({"image": path.name, "error": str(e)})
            continue
        chain = image_chain(suite, index)
        degraded = apply_chain(clean, chain)
        h, w = degraded.shape
        if suite.attribute_policy == "true":
            attrs = constant_map(true_attribute_vector(chain), h, w)
        elif suite.attribute_policy == "zeros":
            attrs = constant_map(AttributeVector(), h, w)
        elif suite.attribute_policy == "vector":
            attrs = constant_map(suite.attribute_vector, h, w)
        else:
            attrs = validate_map(suite_map, h, w)
        restored, _ = forward(ckpt, degraded, attrs)
        if restored.shape != clean.shape:
            # size_mismatch == "resize_back" (the only rule)
            restored = clip01(resize(restored, *clean.shape))
        ref, out = clean, restored
        if suite.border_crop:
            ref = crop_border(ref, suite.border_crop)
            out = crop_border(out, suite.border_crop)
        rows.append({"image": path.name,
                     "psnr": psnr(ref, out),
                     "ssim": ssim(ref, out)})
    if not rows:
        raise DatasetError(
            f"suite {suite.name!r}: every image failed to evaluate")
    aggregate = {
        "psnr": float(np.mean([r["psnr"] for r in rows])),
        "ssim": float(np.mean([r["ssim"] for r in rows])),
    }
    return EvalReport(
        suite=suite.to_dict(),
        checkpoint=_checkpoint_summary(ckpt),
        toolkit_version=__version__,
        rows=rows,
        aggregate=aggregate,
        failures=failures,
    )


@dataclass(frozen=True)
class SweepPoint:
    value: float
    restored: np.ndarray
    residual: np.ndarray
    psnr_vs_reference: "float | None"
    total_variation: float


def attribute_sweep(ckpt: ModelCheckpoint, img: np.ndarray, channel: int,
                    values: "list[float]",
                    reference: "np.ndarray | None" = None) -> "list[SweepPoint]":
    """One forward pass per constant attribute value, in the given order."""
    if not values:
        raise InvalidParameterError("empty sweep value list")
    if channel not in (0, 1, 2):
        raise InvalidParameterError(f"channel must be 0, 1 or 2, got {channel}")
    points = []
    h, w = img.shape
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise InvalidParameterError(f"sweep value {v} outside [0,1]")
        components = [0.0, 0.0, 0.0]
        components[channel] = v
        restored, residual = forward(
            ckpt, img, constant_map(AttributeVector(*components), h, w))
        points.append(SweepPoint(
            value=v, restored=restored, residual=residual,
            psnr_vs_reference=None if reference is None else psnr(reference, restored),
            total_variation=total_variation(restored),
        ))
    return points


def render_table(report: EvalReport) -> str:
    """Aligned text table: one row per image plus the aggregate."""
    lines = [
        f"suite: {report.suite['name']}   dataset: {report.suite['dataset']}",
        f"chain: {report.suite['chain']}   attributes: "
        f"{report.suite['attribute_policy']}   size rule: "
        f"{report.suite['size_mismatch']}",
    ]
    name_w = max([len(r["image"]) for r in report.rows] + [len("aggregate")])
    lines.append(f"{'image'.ljust(name_w)}  {'PSNR':>8}  {'SSIM':>7}")
    def fmt(v: float) -> str:
        return "inf" if math.isinf(v) else f"{v:.2f}"
    for r in report.rows:
        lines.append(f"{r['image'].ljust(name_w)}  {fmt(r['psnr']):>8}  "
                     f"{r['ssim']:.4f}".rstrip())
    agg = report.aggregate
    lines.append(f"{'aggregate'.ljust(name_w)}  {fmt(agg['psnr']):>8}  "
                 f"{agg['ssim']:.4f}")
    if report.failures:
        lines.append(f"failures: {[f['image'] for f in report.failures]}")
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, out_dir: "str | Path",
                formats: "tuple[str, ...]" = ("json", "txt")) -> "list[Path]":
    if not report.rows:
        raise DatasetError("refusing to emit a report with no rows")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    base = report.suite["name"].replace("/", "_")
    if "json" in formats:
        path = out_dir / f"{base}.report.json"
        path.write_text(report.to_json())
        written.append(path)
    if "txt" in formats:
        path = out_dir / f"{base}.report.txt"
        path.write_text(render_table(report))
        written.append(path)
    return written


def fetch_dataset(name: str, url: str, datasets_root: "str | Path",
                  sha256: "str | None" = None) -> Path:
    """Download an archive from a user-supplied mirror and unpack it."""
    datasets_root = Path(datasets_root)
    datasets_root.mkdir(parents=True, exist_ok=True)
    target = datasets_root / name
    if target.is_dir():
        return target
    archive = datasets_root / f"{name}.download"
    urllib.request.urlretrieve(url, archive)
    if sha256 is not None:
        digest = hashlib.sha256(archive.read_bytes()).hexdigest()
        if digest != sha256:
            archive.unlink()
            raise DatasetError(
                f"{name}: checksum mismatch (got {digest}, want {sha256})")
    if zipfile.is_zipfile(archive):
        with zipfile.ZipFile(archive) as z:
            z.extractall(target)
    elif tarfile.is_tarfile(archive):
        with tarfile.open(archive) as t:
            t.extractall(target)
    else:
        raise DatasetError(f"{name}: downloaded file is not a zip or tar archive")
    archive.unlink()
    return target
