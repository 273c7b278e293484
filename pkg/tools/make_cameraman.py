"""Regenerate the bundled 256x256 cameraman test image.

Development-time script: the shipped package never imports skimage.  The
512x512 8-bit original distributed with scikit-image is reduced to 256x256
by 2x2 block averaging (rounded to nearest integer) and stored as a binary
PGM under src/pidal/data/.

Usage::

    python3 tools/make_cameraman.py
"""

import pathlib

import numpy as np
import skimage.data

import pidal.imagekit as imagekit

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "pidal" / "data" / "cameraman.pgm"


def main():
    img = skimage.data.camera().astype(np.float64)
    assert img.shape == (512, 512)
    small = img.reshape(256, 2, 256, 2).mean(axis=(1, 3))
    small = np.rint(small).astype(np.int64)
    imagekit.write_pgm(OUT, small, binary=True)
    print(f"wrote {OUT} shape=(256, 256) min={small.min()} max={small.max()}")


if __name__ == "__main__":
    main()
