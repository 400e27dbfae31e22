#!/usr/bin/env python3
"""How compressed size routes inputs to exits.

Builds three families of 32x32 RGB images (flat, smooth gradient, noise),
measures their lossless-compression bit lengths, and shows how normalizing
against the in-distribution maximum maps each image to one of k exits.
"""

import numpy as np

from mood import (
    CodecId,
    ImageBuffer,
    compress_bit_length,
    compute_l_max,
    normalize_complexity,
    select_exit,
)

rng = np.random.default_rng(0)
k = 5


def flat(v):
    return ImageBuffer.from_array(np.full((32, 32, 3), v, dtype=np.uint8))


def ramp(lo, hi):
    col = np.linspace(lo, hi, 32).astype(np.uint8)
    return ImageBuffer.from_array(
        np.ascontiguousarray(np.broadcast_to(col[:, None, None], (32, 32, 3)))
    )


def woven(phase):
    # Busier but still structured: diagonal ramps, one phase per channel.
    y, x = np.mgrid[0:32, 0:32]
    base = x * 7.3 + y * 11.9
    chans = [(base * s + phase * (i + 1)) % 256
             for i, s in enumerate((1.0, 1.7, 2.3))]
    return ImageBuffer.from_array(np.stack(chans, axis=2).astype(np.uint8))


def noise():
    return ImageBuffer.from_array(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))


# The in-distribution world spans a spectrum: mostly flats and ramps, plus
# some busier woven patterns that define the upper end of the ID range.
id_images = ([flat(v) for v in range(0, 250, 25)]
             + [ramp(0, h) for h in (128, 200, 255)]
             + [woven(p) for p in (0, 20, 40)])
l_max = compute_l_max(id_images, CodecId.DEFLATE_PNG)
print(f"in-distribution l_max = {l_max} bits\n")

print(f"{'image':<12} {'bits':>7} {'normalized':>11} {'exit':>5}")
for name, img in [
    ("flat 0", flat(0)),
    ("flat 200", flat(200)),
    ("ramp 0-128", ramp(0, 128)),
    ("ramp 0-255", ramp(0, 255)),
    ("woven 30", woven(30)),
    ("noise", noise()),
    ("noise", noise()),
]:
    bits = compress_bit_length(img, CodecId.DEFLATE_PNG)
    normalized = normalize_complexity(bits, l_max)
    exit_index = select_exit(normalized, k)
    print(f"{name:<12} {bits:>7} {normalized:>11.3f} {exit_index:>5}")

print("\nFlat and ramp images stay in the cheap exits, the woven patterns fill")
print("the deeper ones, and noise overshoots the in-distribution maximum")
print("(normalized > 1), capping at the last exit.")
