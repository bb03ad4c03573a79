#!/usr/bin/env python3
"""Regenerate the bundled handwritten-digit fixture.

Takes the first 1000 samples of scikit-learn's 8x8 digits dataset,
rescales the 0..16 pixel range to 0..255, and writes the standard IDX
image/label pair consumed by the benchmark harness.

Usage: python3 tools/make_digits_fixture.py
"""

import struct
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits

SAMPLES = 1000
OUT_DIR = Path(__file__).resolve().parent.parent / "crates" / "apts-bench" / "fixtures"

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def main() -> None:
    digits = load_digits()
    images = digits.images[:SAMPLES]  # (N, 8, 8), float values in 0..16
    labels = digits.target[:SAMPLES]  # (N,), ints in 0..9

    pixels = np.rint(images * (255.0 / 16.0)).astype(np.uint8)
    assert pixels.shape == (SAMPLES, 8, 8)
    assert labels.min() >= 0 and labels.max() <= 9

    OUT_DIR.mkdir(parents=True, exist_ok=True)

    image_path = OUT_DIR / "digits-images.idx"
    with image_path.open("wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, SAMPLES, 8, 8))
        f.write(pixels.tobytes())

    label_path = OUT_DIR / "digits-labels.idx"
    with label_path.open("wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, SAMPLES))
        f.write(labels.astype(np.uint8).tobytes())

    print(f"wrote {image_path} ({image_path.stat().st_size} bytes)")
    print(f"wrote {label_path} ({label_path.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
