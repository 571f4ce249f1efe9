"""Encode degradation parameters into attribute values and build maps.

Shows the three encoders at the paper's anchor points, a constant map, the
horizontal noise ramp used for region-wise control, and the 16-bit PNG
persistence round trip.
"""

from pathlib import Path

import numpy as np

from nbrestore.attributes import (
    constant_map,
    encode_jpeg,
    encode_noise,
    encode_scale,
    from_spec,
    gradient_map,
    load_attribute_map,
    save_attribute_map,
)
from nbrestore.degrade import DegradationSpec

OUT = Path(__file__).parent / "out" / "attributes"


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    print("encoder anchor points:")
    print(f"  noise: sigma=0 -> {encode_noise(0.0)}, "
          f"sigma=55/255 -> {encode_noise(55 / 255)}, "
          f"sigma=25/255 -> {encode_noise(25 / 255):.4f}")
    print(f"  scale: x1 -> {encode_scale(1)}, x4 -> {encode_scale(4)}, "
          f"x2 -> {encode_scale(2):.4f}")
    print(f"  jpeg:  q=100 -> {encode_jpeg(100)}, q=0 -> {encode_jpeg(0)}, "
          f"q=30 -> {encode_jpeg(30):.2f}")

    vec = from_spec(DegradationSpec("awgn", 50 / 255, seed=0))
    print(f"\ntrue attributes of awgn sigma=50/255: {vec.as_tuple()}")

    const = constant_map(vec, 64, 64)
    ramp = gradient_map(0, 0.0, 1.0, "horizontal", 64, 64)
    print(f"constant map planes mean: {[float(const[..., c].mean()) for c in range(3)]}")
    print(f"ramp first/last column: {ramp[0, 0, 0]:.3f} .. {ramp[0, -1, 0]:.3f}")

    path = OUT / "ramp.png"
    save_attribute_map(ramp, path)
    back = load_attribute_map(path)
    err = float(np.max(np.abs(back - ramp)))
    print(f"\n16-bit PNG round trip max error: {err:.2e} "
          f"(quantization bound {0.5 / 65535:.2e})")
    print(f"map + sidecar written to {path} / {path}.json")


if __name__ == "__main__":
    main()
