"""Train a restoration model on synthetic data.

The default is a quick toy run (a couple of minutes on CPU).  Pass --desk for
the full desk recipe (L=8, 32 features, AWGN-only, 5+20 epochs x 8192
samples; tens of minutes on a small CPU), which is the configuration the
acceptance suite measures.  The paper-scale recipe (L=20, 64 features,
10+80 epochs x 1,048,576 samples) is the same call with TrainConfig()
defaults and a real photographic corpus.
"""

import argparse
from pathlib import Path

from nbrestore.dataset import ingest_corpus
from nbrestore.model import ModelConfig, build_model
from nbrestore.synthetic import write_corpus
from nbrestore.training import TrainConfig, desk_recipe, train

OUT = Path(__file__).parent / "out" / "training"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--desk", action="store_true",
                        help="run the full desk recipe instead of the toy run")
    parser.add_argument("--corpus", help="directory of clean images "
                                         "(default: generated synthetic set)")
    args = parser.parse_args()

    corpus = Path(args.corpus) if args.corpus else OUT / "corpus"
    if not args.corpus:
        write_corpus(corpus, count=24, seed=2024, size=192)

    if args.desk:
        cfg = desk_recipe()
        model = ModelConfig(layers=8, features=32)
    else:
        cfg = TrainConfig(stage1_epochs=1, stage2_epochs=3,
                          samples_per_epoch=1024, batch_size=32,
                          stage1_layers=(1, 2, 3), seed=1234)
        model = ModelConfig(layers=5, features=16)

    manifest = ingest_corpus(corpus, split_ratio=0.9, seed=2024,
                             sample_count=cfg.samples_per_epoch,
                             kinds=("awgn",))
    ckpt = build_model(model, seed=77)
    print(f"training {model.layers}-layer/{model.features}-feature model, "
          f"{cfg.stage1_epochs}+{cfg.stage2_epochs} epochs x "
          f"{cfg.samples_per_epoch} samples")
    trained, log = train(ckpt, manifest, cfg, out_dir=OUT / "run",
                         progress=True)
    print(f"\nfinal validation PSNR: {log.records[-1].val_psnr:.2f} dB")
    print(f"checkpoint: {OUT / 'run' / 'final.ckpt'}")


if __name__ == "__main__":
    main()
