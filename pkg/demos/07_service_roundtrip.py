"""Drive the HTTP service end to end, in process.

Loads a checkpoint into the FastAPI app, posts a noisy image with a scalar
attribute triple, posts the same image with an equivalent uploaded 16-bit
attribute map, and confirms both give identical restored bytes.  Run the
standalone server with `nbrestore serve --checkpoint ... --port 8590`.
"""

import argparse
import json
from pathlib import Path

from fastapi.testclient import TestClient

from nbrestore.attributes import AttributeVector, constant_map, encode_map_png, encode_noise
from nbrestore.degrade import apply_awgn
from nbrestore.imgio import decode_image, encode_png, save_image
from nbrestore.service import create_app, parse_multipart_mixed
from nbrestore.synthetic import synthetic_image

OUT = Path(__file__).parent / "out" / "service"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--checkpoint", required=True)
    args = parser.parse_args()

    OUT.mkdir(parents=True, exist_ok=True)
    client = TestClient(create_app(args.checkpoint))
    print("health:", client.get("/v1/health").json())
    info = client.get("/v1/model/info").json()
    print(f"model: {info['config']['layers']} layers, "
          f"checkpoint {info['checkpoint_id'][:12]}...")

    clean = synthetic_image(seed=3, index=2, size=192)
    noisy = apply_awgn(clean, 25 / 255, seed=1)
    png = encode_png(noisy)
    attr = encode_noise(25 / 255)

    r = client.post(
        "/v1/restore",
        files={"image": ("noisy.png", png, "image/png"),
               "reference": ("clean.png", encode_png(clean), "image/png")},
        data={"meta": json.dumps({"attributes": {"noise": attr}})})
    r.raise_for_status()
    parts = parse_multipart_mixed(r.content)
    meta = json.loads(parts["meta"][1])
    print(f"restore with scalar triple: PSNR {meta['psnr']:.2f} dB, "
          f"SSIM {meta['ssim']:.4f}, {r.headers['x-restore-ms']} ms")
    save_image(decode_image(parts["restored"][1]), OUT / "restored.png")

    h, w = noisy.shape
    map_png = encode_map_png(constant_map(AttributeVector(noise=attr), h, w))
    r2 = client.post(
        "/v1/restore",
        files={"image": ("noisy.png", png, "image/png"),
               "attr_map": ("map.png", map_png, "image/png")},
        data={"meta": "{}"})
    r2.raise_for_status()
    same = parse_multipart_mixed(r2.content)["restored"][1] == parts["restored"][1]
    print(f"uploaded constant map gives identical restored bytes: {same}")
    print(f"outputs under {OUT}")


if __name__ == "__main__":
    main()
