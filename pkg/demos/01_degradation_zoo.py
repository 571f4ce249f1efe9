"""Walk through every degradation operator and a composite chain.

Writes the degraded images under demos/out/degradations/ and prints the PSNR
of each against the clean original, so you can see how destructive each
operator is at the paper's benchmark settings.
"""

from pathlib import Path

from nbrestore.degrade import (
    apply_awgn,
    apply_chain,
    apply_jpeg,
    apply_salt_pepper,
    apply_scale_degradation,
    apply_upscale_percent,
    parse_chain,
)
from nbrestore.imgio import save_image
from nbrestore.metrics import psnr
from nbrestore.synthetic import synthetic_image

OUT = Path(__file__).parent / "out" / "degradations"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    clean = synthetic_image(seed=7, index=0, size=192)
    save_image(clean, OUT / "clean.png")

    variants = {
        "awgn25": apply_awgn(clean, 25 / 255, seed=1),
        "awgn50": apply_awgn(clean, 50 / 255, seed=2),
        "scale2": apply_scale_degradation(clean, 2),
        "scale4": apply_scale_degradation(clean, 4),
        "jpeg10": apply_jpeg(clean, 10),
        "jpeg30": apply_jpeg(clean, 30),
        "snp05": apply_salt_pepper(clean, 0.05, seed=3),
    }
    # the four perturbation chains of the robustness benchmarks
    for chain_text in ("awgn:50/255|jpeg:30", "awgn:50/255|upscale_percent:1",
                       "jpeg:10|upscale_percent:1"):
        name = chain_text.replace("/", "_").replace("|", "+").replace(":", "")
        variants[name] = apply_chain(clean, parse_chain(chain_text, seed=4))

    up = apply_upscale_percent(clean, 1.0)
    print(f"upscale_percent:1 changes 192x192 -> {up.shape[0]}x{up.shape[1]}")

    for name, img in variants.items():
        save_image(img, OUT / f"{name}.png")
        if img.shape == clean.shape:
            print(f"{name:28s} PSNR vs clean: {psnr(clean, img):6.2f} dB")
        else:
            print(f"{name:28s} size changed to {img.shape[0]}x{img.shape[1]}")
    print(f"\nimages written to {OUT}")


if __name__ == "__main__":
    main()
