"""Command-line entry point.

Subcommands: degrade, make-dataset, train, restore, evaluate, sweep, serve.
Every run prints a resolved-configuration banner (JSON) from which the run
can be reproduced.  Exit codes: 0 success, 1 usage error, 2 runtime error,
3 acceptance regression in `evaluate`.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attributes import (
    AttributeVector,
    constant_map,
    encode_jpeg,
    encode_noise,
    encode_scale,
    load_attribute_map,
    validate_map,
)
from .errors import NbrestoreError
from .imgio import load_image, save_image

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_REGRESSION = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _number(text: str) -> float:
    """Accept both '50/255' rational syntax and plain decimals."""
    if "/" in text:
        num, _, den = text.partition("/")
        return float(num) / float(den)
    return float(text)


def _banner(command: str, resolved: dict) -> None:
    print("resolved-config " + json.dumps(
        {"command": command, "toolkit_version": __version__, **resolved},
        sort_keys=True))


def _cmd_degrade(args) -> int:
    from .degrade import apply_chain, parse_chain, render_chain

    chain = parse_chain(args.chain, seed=args.seed)
    _banner("degrade", {
        "input": args.input, "output": args.output, "seed": args.seed,
        "chain": render_chain(chain),
        "step_seeds": [s.seed for s in chain.steps],
    })
    img = load_image(args.input, grayscale=not args.rgb)
    out = apply_chain(img, chain)
    save_image(out, args.output)
    sidecar = {
        "input": args.input,
        "chain": render_chain(chain),
        "seed": args.seed,
        "steps": [{"kind": s.kind, "param": s.param, "seed": s.seed}
                  for s in chain.steps],
        "output_size": list(out.shape[:2]),
    }
    Path(args.output + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return EXIT_OK


def _cmd_make_dataset(args) -> int:
    from .dataset import ingest_corpus, write_shards

    kinds = tuple(args.kinds.split(","))
    _banner("make-dataset", {
        "corpus": args.corpus, "out": args.out, "seed": args.seed,
        "split_ratio": args.split_ratio, "samples": args.samples,
        "patch_size": args.patch_size, "kinds": list(kinds),
        "shard_size": args.shard_size,
    })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = ingest_corpus(args.corpus, split_ratio=args.split_ratio,
                             seed=args.seed, sample_count=args.samples,
                             patch_size=args.patch_size, kinds=kinds,
                             manifest_path=out / "train_manifest.json")
    manifest.for_split("val").save(out / "val_manifest.json")
    print(f"manifest hash {manifest.content_hash()}")
    if args.shard_size:
        paths = write_shards(manifest, args.shard_size, out / "shards")
        print(f"wrote {len(paths)} shards")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .dataset import load_manifest
    from .model import ModelConfig, build_model, load_checkpoint
    from .training import TrainConfig, config_from_json, train

    manifest = load_manifest(args.manifest)
    if args.train_config:
        cfg = config_from_json(Path(args.train_config).read_text())
    else:
        cfg = TrainConfig()
    overrides = {}
    for name in ("stage1_epochs", "stage2_epochs", "samples_per_epoch",
                 "batch_size", "learning_rate", "beta1", "beta2", "adam_eps",
                 "lr_decay_factor", "seed", "checkpoint_every", "val_images",
                 "num_threads"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.stage1_layers is not None:
        overrides["stage1_layers"] = tuple(
            int(x) for x in args.stage1_layers.split(","))
    if args.lr_decay_points is not None:
        overrides["lr_decay_points"] = tuple(
            float(x) for x in args.lr_decay_points.split(",") if x)
    if args.val_sigma is not None:
        overrides["val_sigma"] = _number(args.val_sigma)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if args.resume:
        ckpt = load_checkpoint(args.resume)
    elif args.init_checkpoint:
        ckpt = load_checkpoint(args.init_checkpoint)
    else:
        ckpt = build_model(ModelConfig(layers=args.layers,
                                       features=args.features),
                           seed=args.model_seed)
    _banner("train", {
        "manifest": args.manifest, "manifest_hash": manifest.content_hash(),
        "out": args.out, "resume": args.resume,
        "model_config": dataclasses.asdict(ckpt.config),
        "train_config": json.loads(cfg.to_json()),
    })
    trained, log = train(ckpt, manifest, cfg, out_dir=args.out,
                         resume_from=args.resume, progress=True)
    if log.records:
        last = log.records[-1]
        print(f"final epoch {last.epoch}: loss {last.loss:.6f} "
              f"val {last.val_psnr:.2f} dB")
    print(f"checkpoint written to {Path(args.out) / 'final.ckpt'}")
    return EXIT_OK


def _attribute_map_for(args, img: np.ndarray) -> np.ndarray:
    scalar_flags = [args.noise_sigma, args.scale_factor, args.jpeg_quality,
                    args.noise_attr, args.scale_attr, args.jpeg_attr]
    has_scalars = any(v is not None for v in scalar_flags)
    if args.attr_map and has_scalars:
        raise NbrestoreError(
            "give either --attr-map or scalar attribute flags, not both")
    if not args.attr_map and not has_scalars:
        raise NbrestoreError(
            "an attribute source is required: --attr-map FILE, or scalar "
            "flags such as --noise-sigma 25/255 or --noise-attr 0.5")
    h, w = img.shape
    if args.attr_map:
        attrs = load_attribute_map(args.attr_map)
        if attrs.shape[:2] != (h, w):
            raise NbrestoreError(
                f"attribute map {args.attr_map} is "
                f"{attrs.shape[0]}x{attrs.shape[1]} but the image is {h}x{w}")
        return validate_map(attrs, h, w)
    noise = scale = jpeg = 0.0
    if args.noise_sigma is not None:
        noise = encode_noise(_number(args.noise_sigma))
    if args.scale_factor is not None:
        scale = encode_scale(_number(args.scale_factor))
    if args.jpeg_quality is not None:
        jpeg = encode_jpeg(_number(args.jpeg_quality))
    if args.noise_attr is not None:
        noise = args.noise_attr
    if args.scale_attr is not None:
        scale = args.scale_attr
    if args.jpeg_attr is not None:
        jpeg = args.jpeg_attr
    return constant_map(AttributeVector(noise, scale, jpeg), h, w)


def _cmd_restore(args) -> int:
    from .metrics import psnr, ssim
    from .model import forward, load_checkpoint

    ckpt = load_checkpoint(args.checkpoint)
    img = load_image(args.input, grayscale=True)
    attrs = _attribute_map_for(args, img)
    _banner("restore", {
        "input": args.input, "checkpoint": args.checkpoint,
        "output": args.output,
        "attributes": [float(attrs[..., c].mean()) for c in range(3)],
        "attr_map": args.attr_map,
    })
    restored, _residual = forward(ckpt, img, attrs)
    save_image(restored, args.output)
    if args.reference:
        ref = load_image(args.reference, grayscale=True)
        print(f"PSNR {psnr(ref, restored):.4f} dB  "
              f"SSIM {ssim(ref, restored):.4f}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .evaluation import (
        emit_report,
        load_builtin_suite,
        load_suite,
        render_table,
        run_suite,
    )
    from .model import load_checkpoint

    if not args.suites:
        print("error: at least one suite name or suite file is required",
              file=sys.stderr)
        return EXIT_USAGE
    ckpt = load_checkpoint(args.checkpoint)
    _banner("evaluate", {
        "checkpoint": args.checkpoint, "suites": args.suites,
        "datasets_root": args.datasets_root, "dataset": args.dataset,
        "out": args.out,
    })
    regressed = []
    for ref in args.suites:
        if Path(ref).is_file():
            suite = load_suite(ref)
            if args.dataset:
                suite = dataclasses.replace(suite, dataset=args.dataset)
        else:
            suite = load_builtin_suite(ref, dataset=args.dataset)
        report = run_suite(ckpt, suite, datasets_root=args.datasets_root)
        if args.out:
            emit_report(report, args.out)
        print(render_table(report))
        floor = suite.min_mean_psnr
        if floor is not None and report.aggregate["psnr"] < floor:
            regressed.append((suite.name, report.aggregate["psnr"], floor))
    for name, got, want in regressed:
        print(f"REGRESSION {name}: mean PSNR {got:.2f} dB < floor {want:.2f} dB",
              file=sys.stderr)
    return EXIT_REGRESSION if regressed else EXIT_OK


def _cmd_sweep(args) -> int:
    from .evaluation import attribute_sweep
    from .model import load_checkpoint

    channel = {"noise": 0, "scale": 1, "jpeg": 2}[args.channel]
    values = [float(v) for v in args.values.split(",")]
    _banner("sweep", {
        "input": args.input, "checkpoint": args.checkpoint,
        "channel": args.channel, "values": values, "out": args.out,
    })
    ckpt = load_checkpoint(args.checkpoint)
    img = load_image(args.input, grayscale=True)
    reference = load_image(args.reference) if args.reference else None
    points = attribute_sweep(ckpt, img, channel, values, reference=reference)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for p in points:
        name = f"sweep_{args.channel}_{p.value:.3f}.png"
        save_image(p.restored, out / name)
        entry = {"value": p.value, "file": name,
                 "total_variation": p.total_variation}
        if p.psnr_vs_reference is not None:
            entry["psnr_vs_reference"] = p.psnr_vs_reference
        index.append(entry)
        tv = f"tv {p.total_variation:.5f}"
        print(f"value {p.value:.3f}: {name} ({tv})")
    (out / "sweep_index.json").write_text(json.dumps(index, indent=2) + "\n")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    _banner("serve", {"checkpoint": args.checkpoint, "host": args.host,
                      "port": args.port, "max_pixels": args.max_pixels})
    app = create_app(args.checkpoint, max_pixels=args.max_pixels)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="nbrestore",
                     description="Non-blind image restoration toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="apply a degradation chain to an image")
    p.add_argument("--input", required=True)
    p.add_argument("--chain", required=True,
                   help="chain DSL, e.g. 'awgn:50/255|jpeg:30'")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rgb", action="store_true",
                   help="keep color instead of converting to luminance")
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("make-dataset", help="ingest a corpus into a manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-ratio", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=8192)
    p.add_argument("--patch-size", type=int, default=50)
    p.add_argument("--kinds", default="awgn,scale,jpeg")
    p.add_argument("--shard-size", type=int, default=0,
                   help="also write binary shards of this many samples")
    p.set_defaults(func=_cmd_make_dataset)

    p = sub.add_parser("train", help="run the two-stage training recipe")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-config", help="JSON TrainConfig file")
    p.add_argument("--layers", type=int, default=20)
    p.add_argument("--features", type=int, default=64)
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--init-checkpoint")
    p.add_argument("--resume")
    for name in ("stage1-epochs", "stage2-epochs", "samples-per-epoch",
                 "batch-size", "checkpoint-every", "val-images",
                 "num-threads", "seed"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--adam-eps", type=float, default=None)
    p.add_argument("--lr-decay-factor", type=float, default=None)
    p.add_argument("--lr-decay-points", default=None,
                   help="comma-separated fractions of stage 2, e.g. 0.5,0.75")
    p.add_argument("--val-sigma", default=None,
                   help="validation noise level, e.g. 25/255")
    p.add_argument("--stage1-layers", default=None,
                   help="comma-separated 1-based layer indices")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("restore", help="restore one image")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--reference", help="clean image; prints PSNR/SSIM")
    p.add_argument("--attr-map", help="16-bit attribute map PNG")
    p.add_argument("--noise-sigma", help="true sigma, e.g. 25/255")
    p.add_argument("--scale-factor", help="true scale factor 1..4")
    p.add_argument("--jpeg-quality", help="true JPEG quality 0..100")
    p.add_argument("--noise-attr", type=float, help="encoded value in [0,1]")
    p.add_argument("--scale-attr", type=float)
    p.add_argument("--jpeg-attr", type=float)
    p.set_defaults(func=_cmd_restore)

    p = sub.add_parser("evaluate", help="run benchmark suites")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="directory for report files")
    p.add_argument("--datasets-root")
    p.add_argument("--dataset", help="override the suite's dataset folder")
    p.add_argument("suites", nargs="*",
                   help="built-in suite names or suite JSON files")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="attribute sweep over one image")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--channel", choices=("noise", "scale", "jpeg"),
                   default="noise")
    p.add_argument("--values", default="0,0.25,0.5,0.75,1.0")
    p.add_argument("--out", required=True)
    p.add_argument("--reference")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve", help="HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8590)
    p.add_argument("--max-pixels", type=int, default=4_000_000)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except NbrestoreError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # unexpected runtime failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
