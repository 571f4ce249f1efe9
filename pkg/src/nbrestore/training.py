"""Two-stage MSE training over addressable samples.

Stage 1 trains only an early subset of layers (default 1..5) so the first
layer adapts to the attribute channels; stage 2 trains everything.  All data
randomness is indexed through the manifest, so a (model seed, manifest,
config) triple reproduces the loss sequence, and any epoch checkpoint plus
its optimizer sidecar resumes bit-identically.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import rng
from .dataset import DatasetManifest, generate_sample
from .degrade import apply_awgn
from .errors import InvalidParameterError, ShapeMismatchError, TrainingDivergedError
from .imgio import clip01
from .metrics import psnr
from .model import (
    ModelCheckpoint,
    save_checkpoint,
    to_module,
    weights_from_module,
)

_VAL_CROP = 160


@dataclass(frozen=True)
class TrainConfig:
    stage1_epochs: int = 10
    stage2_epochs: int = 80
    samples_per_epoch: int = 1_048_576
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    stage1_layers: "tuple[int, ...]" = (1, 2, 3, 4, 5)
    seed: int = 0
    checkpoint_every: int = 0  # epochs between checkpoints; 0 = stage ends only
    lr_decay_points: "tuple[float, ...]" = (0.5, 0.75)  # fractions of stage 2
    lr_decay_factor: float = 0.1
    val_images: int = 8
    val_sigma: float = 25.0 / 255.0
    num_threads: int = 0  # 0 = leave torch default

    def validate(self, n_layers: int) -> None:
        if self.stage1_epochs < 0 or self.stage2_epochs < 0:
            raise InvalidParameterError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise InvalidParameterError("batch size must be >= 1")
        if self.stage1_epochs > 0:
            if not self.stage1_layers:
                raise InvalidParameterError("stage-1 layer set is empty")
            if any(not 1 <= i <= n_layers for i in self.stage1_layers):
                raise InvalidParameterError(
                    f"stage-1 layers {self.stage1_layers} outside 1..{n_layers}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def desk_recipe(**overrides) -> TrainConfig:
    """The small-machine recipe: 5+20 epochs x 8192 samples, batch 32."""
    cfg = TrainConfig(stage1_epochs=5, stage2_epochs=20,
                      samples_per_epoch=8192, batch_size=32, seed=1234)
    return replace(cfg, **overrides) if overrides else cfg


def config_from_json(text: str) -> TrainConfig:
    data = json.loads(text)
    for key in ("stage1_layers", "lr_decay_points"):
        if key in data:
            data[key] = tuple(data[key])
    return TrainConfig(**data)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    stage: int
    loss: float             # mean batch loss over the epoch
    loss_final_batch: float  # last batch: where the loss ended up
    val_psnr: float
    lr: float
    wall_time: float


@dataclass
class TrainLog:
    records: "list[EpochRecord]" = field(default_factory=list)

    def losses(self) -> "list[float]":
        return [r.loss for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n"
                       for r in self.records)


def load_train_log(path: "str | Path") -> TrainLog:
    records = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            records.append(EpochRecord(**json.loads(line)))
    return TrainLog(records)


def loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of pixel-wise squared differences."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(diff * diff))


def _make_batch(manifest: DatasetManifest, start: int, count: int):
    p = manifest.patch_size
    x = np.empty((count, 4, p, p), dtype=np.float32)
    y = np.empty((count, 1, p, p), dtype=np.float32)
    for j in range(count):
        s = generate_sample(manifest, start + j)
        x[j, 0] = s.input_patch
        x[j, 1] = s.attribute.noise
        x[j, 2] = s.attribute.scale
        x[j, 3] = s.attribute.jpeg
        y[j, 0] = s.target_patch
    return x, y


def _batch_feed(manifest: DatasetManifest, epoch: int, samples_per_epoch: int,
                batch_size: int, prefetch: int = 3):
    """Yield epoch batches in order, generated by a background thread."""
    base = epoch * samples_per_epoch
    offsets = list(range(0, samples_per_epoch, batch_size))
    q: "queue.Queue" = queue.Queue(maxsize=prefetch)

    def producer():
        try:
            for off in offsets:
                count = min(batch_size, samples_per_epoch - off)
                q.put(("batch", _make_batch(manifest, base + off, count)))
            q.put(("done", None))
        except Exception as e:  # surface generation errors on the consumer
            q.put(("error", e))

    thread = threading.Thread(target=producer, daemon=True)
    thread.start()
    while True:
        kind, payload = q.get()
        if kind == "done":
            break
        if kind == "error":
            raise payload
        yield payload
    thread.join()


def _validation_set(manifest: DatasetManifest, cfg: TrainConfig):
    """Fixed held-out noisy/clean pairs for cheap progress tracking."""
    from .imgio import load_image

    val_sources = [s for s in manifest.sources if s.split == "val"]
    if not val_sources:
        return []
    pairs = []
    for i in range(cfg.val_images):
        src = val_sources[i % len(val_sources)]
        img = load_image(src.path, grayscale=True)
        h, w = img.shape
        ch, cw = min(h, _VAL_CROP), min(w, _VAL_CROP)
        y0, x0 = (h - ch) // 2, (w - cw) // 2
        clean = np.ascontiguousarray(img[y0:y0 + ch, x0:x0 + cw])
        noisy = apply_awgn(clean, cfg.val_sigma,
                           seed=rng.mix(manifest.master_seed, rng.TAG_EVAL, i))
        pairs.append((clean, noisy))
    return pairs


def _val_psnr(net: torch.nn.Module, pairs, sigma: float) -> float:
    if not pairs:
        return float("nan")
    from .attributes import encode_noise

    attr = encode_noise(sigma)
    values = []
    with torch.no_grad():
        for clean, noisy in pairs:
            x = np.empty((1, 4) + noisy.shape, dtype=np.float32)
            x[0, 0] = noisy
            x[0, 1] = attr
            x[0, 2] = 0.0
            x[0, 3] = 0.0
            t = torch.from_numpy(x).to(memory_format=torch.channels_last)
            residual = net(t)[0, 0].numpy()
            values.append(psnr(clean, clip01(noisy + residual)))
    return float(np.mean(values))


def _save_optimizer_state(optimizer: torch.optim.Adam, path: Path) -> None:
    arrays = {}
    meta = []
    for gi, group in enumerate(optimizer.param_groups):
        for pi, p in enumerate(group["params"]):
            state = optimizer.state.get(p)
            if not state:
                continue
            key = f"g{gi}p{pi}"
            arrays[f"{key}.exp_avg"] = state["exp_avg"].contiguous().numpy()
            arrays[f"{key}.exp_avg_sq"] = state["exp_avg_sq"].contiguous().numpy()
            meta.append({"key": key, "step": float(state["step"])})
    np.savez(path, _meta=json.dumps(meta), **arrays)


def _load_optimizer_state(optimizer: torch.optim.Adam, path: Path) -> None:
    data = np.load(path, allow_pickle=False)
    meta = {m["key"]: m["step"] for m in json.loads(str(data["_meta"]))}

    def like(p: torch.Tensor, arr: np.ndarray) -> torch.Tensor:
        # match the parameter's memory format (channels_last for conv weights)
        t = torch.empty_like(p, requires_grad=False)
        t.copy_(torch.from_numpy(arr))
        return t

    for gi, group in enumerate(optimizer.param_groups):
        for pi, p in enumerate(group["params"]):
            key = f"g{gi}p{pi}"
            if f"{key}.exp_avg" not in data:
                continue
            optimizer.state[p] = {
                "step": torch.tensor(float(meta[key])),
                "exp_avg": like(p, data[f"{key}.exp_avg"]),
                "exp_avg_sq": like(p, data[f"{key}.exp_avg_sq"]),
            }


def _stage_of(epoch: int, cfg: TrainConfig) -> int:
    return 1 if epoch < cfg.stage1_epochs else 2


def _stage2_lr(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for a stage-2 epoch (10x decay at the stated fractions)."""
    s2_epoch = epoch - cfg.stage1_epochs
    decays = sum(s2_epoch >= int(point * cfg.stage2_epochs)
                 for point in cfg.lr_decay_points if cfg.stage2_epochs > 0)
    return cfg.learning_rate * (cfg.lr_decay_factor ** decays)


def train(ckpt: ModelCheckpoint, manifest: DatasetManifest, cfg: TrainConfig,
          out_dir: "str | Path | None" = None,
          resume_from: "str | Path | None" = None,
          progress: bool = False) -> "tuple[ModelCheckpoint, TrainLog]":
    """Run the two-stage recipe; returns the trained checkpoint and log."""
    cfg.validate(ckpt.config.layers)
    if manifest.patch_size < ckpt.config.kernel_size:
        raise InvalidParameterError("patch smaller than the conv kernel")

    total_epochs = cfg.stage1_epochs + cfg.stage2_epochs
    log = TrainLog()
    if total_epochs == 0:
        return ckpt, log

    # samples are drawn with replacement per epoch: epoch e reads indices
    # [e*spe, (e+1)*spe), so widen the addressable range; the provenance
    # records the manifest as given
    manifest_hash = manifest.content_hash()
    total_needed = total_epochs * cfg.samples_per_epoch
    if manifest.sample_count < total_needed:
        manifest = replace(manifest, sample_count=total_needed)

    if cfg.num_threads > 0:
        torch.set_num_threads(cfg.num_threads)
    torch.manual_seed(cfg.seed)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    start_epoch = 0
    opt_state_path = None
    if resume_from is not None:
        from .model import load_checkpoint

        ckpt = load_checkpoint(resume_from)
        start_epoch = int(ckpt.provenance.get("epochs_completed", 0))
        candidate = Path(str(resume_from) + ".opt.npz")
        opt_state_path = candidate if candidate.exists() else None

    net = to_module(ckpt)
    net.train()
    val_pairs = _validation_set(manifest, cfg)

    optimizer: "torch.optim.Adam | None" = None
    optimizer_stage = 0
    last_ckpt_path: "str | None" = None

    def configure(stage: int, lr: float) -> torch.optim.Adam:
        for i, conv in enumerate(net.convs, start=1):
            trainable = stage == 2 or i in cfg.stage1_layers
            conv.weight.requires_grad_(trainable)
            conv.bias.requires_grad_(trainable)
        params = [p for p in net.parameters() if p.requires_grad]
        return torch.optim.Adam(params, lr=lr, betas=(cfg.beta1, cfg.beta2),
                                eps=cfg.adam_eps)

    def snapshot(tag: str, epochs_done: int, stage: int) -> str:
        trained = ModelCheckpoint(
            config=ckpt.config,
            weights=weights_from_module(net, ckpt.config),
            channel_order=ckpt.channel_order,
            provenance={
                **ckpt.provenance,
                "epochs_completed": epochs_done,
                "stage": stage,
                "manifest_hash": manifest_hash,
                "train_config": json.loads(cfg.to_json()),
            },
        )
        path = out_dir / f"{tag}.ckpt"
        save_checkpoint(trained, path)
        if optimizer is not None:
            _save_optimizer_state(optimizer, Path(str(path) + ".opt.npz"))
        return str(path)

    for epoch in range(start_epoch, total_epochs):
        stage = _stage_of(epoch, cfg)
        lr = cfg.learning_rate if stage == 1 else _stage2_lr(epoch, cfg)
        if optimizer is None or stage != optimizer_stage:
            optimizer = configure(stage, lr)
            optimizer_stage = stage
            if opt_state_path is not None:
                _load_optimizer_state(optimizer, opt_state_path)
                opt_state_path = None
        else:
            for group in optimizer.param_groups:
                group["lr"] = lr

        t0 = time.monotonic()
        losses = []
        for x_np, y_np in _batch_feed(manifest, epoch, cfg.samples_per_epoch,
                                      cfg.batch_size):
            x = torch.from_numpy(x_np).to(memory_format=torch.channels_last)
            y = torch.from_numpy(y_np).to(memory_format=torch.channels_last)
            optimizer.zero_grad(set_to_none=True)
            residual = net(x)
            batch_loss = ((x[:, :1] + residual - y) ** 2).mean()
            value = float(batch_loss.detach())
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch, last_ckpt_path)
            batch_loss.backward()
            optimizer.step()
            losses.append(value)

        record = EpochRecord(
            epoch=epoch, stage=stage, loss=float(np.mean(losses)),
            loss_final_batch=losses[-1],
            val_psnr=_val_psnr(net, val_pairs, cfg.val_sigma),
            lr=lr, wall_time=time.monotonic() - t0,
        )
        log.records.append(record)
        if progress:
            print(f"epoch {epoch:3d} stage {stage} "
                  f"loss {record.loss:.6f} val {record.val_psnr:.2f} dB "
                  f"({record.wall_time:.1f}s)", flush=True)
        if out_dir is not None:
            with open(out_dir / "train.log.jsonl", "a") as f:
                f.write(json.dumps(asdict(record), sort_keys=True) + "\n")
            end_of_stage1 = epoch + 1 == cfg.stage1_epochs
            cadence_hit = cfg.checkpoint_every > 0 and \
                (epoch + 1) % cfg.checkpoint_every == 0
            if end_of_stage1:
                last_ckpt_path = snapshot("stage1", epoch + 1, stage)
            elif cadence_hit:
                last_ckpt_path = snapshot(f"epoch{epoch + 1:03d}", epoch + 1,
                                          stage)

    trained = ModelCheckpoint(
        config=ckpt.config,
        weights=weights_from_module(net, ckpt.config),
        channel_order=ckpt.channel_order,
        provenance={
            **ckpt.provenance,
            "epochs_completed": total_epochs,
            "stage": 2 if cfg.stage2_epochs else 1,
            "manifest_hash": manifest_hash,
            "train_config": json.loads(cfg.to_json()),
            "final_loss": log.records[-1].loss if log.records else None,
        },
    )
    if out_dir is not None:
        save_checkpoint(trained, out_dir / "final.ckpt")
    return trained, log


def validate(ckpt: ModelCheckpoint, suites, datasets_root=None) -> dict:
    """Run evaluation suites against a checkpoint; {suite name: report}."""
    from .evaluation import run_suite

    return {s.name: run_suite(ckpt, s, datasets_root=datasets_root)
            for s in suites}
