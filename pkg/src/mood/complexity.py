"""Input-complexity estimation and complexity-based exit routing.

Complexity of an image is the bit length of a deterministic lossless
encoding of its pixels. Normalizing by the maximum complexity seen on
in-distribution data maps any input into a ratio, which in turn picks one
of k exits: cheap inputs route to shallow exits, busy ones to deep exits.

The DEFLATE/PNG codec here is fully parameter-pinned (fixed per-row filter
heuristic, fixed zlib settings) so the same pixels always produce the same
bit count, on any platform.
"""

from __future__ import annotations

import enum
import io
import math
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import CalibrationError, InputError, UnsupportedCodecError

__all__ = [
    "ImageBuffer",
    "CodecId",
    "ComplexityScore",
    "compress_bit_length",
    "normalize_complexity",
    "select_exit",
    "compute_l_max",
    "complexity_score",
    "jpeg2000_available",
]


@dataclass(frozen=True)
class ImageBuffer:
    """Raw 8-bit image: row-major, channel-interleaved pixel bytes."""

    height: int
    width: int
    channels: int
    pixels: bytes

    def __post_init__(self):
        if not (1 <= self.height <= 0xFFFF and 1 <= self.width <= 0xFFFF):
            raise InputError(
                f"height/width must be in [1, 65535], got {self.height}x{self.width}"
            )
        if self.channels not in (1, 3):
            raise InputError(f"channels must be 1 or 3, got {self.channels}")
        expected = self.height * self.width * self.channels
        if len(self.pixels) != expected:
            raise InputError(
                f"pixel buffer has {len(self.pixels)} bytes, expected {expected}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        """Build from a (H, W) or (H, W, C) uint8 array."""
        a = np.asarray(arr)
        if a.dtype != np.uint8:
            raise InputError(f"expected uint8 array, got {a.dtype}")
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise InputError(f"expected 2- or 3-dimensional array, got {a.ndim}")
        h, w, c = a.shape
        return cls(h, w, c, a.tobytes())

    def to_array(self) -> np.ndarray:
        """Pixels as a (H, W, C) uint8 array."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )


class CodecId(enum.Enum):
    """Deterministic lossless codecs usable for complexity estimation."""

    DEFLATE_PNG = "png"
    JPEG2000_LOSSLESS = "jpeg2000"

    @classmethod
    def parse(cls, name: str) -> "CodecId":
        for codec in cls:
            if codec.value == name:
                return codec
        raise InputError(f"unknown codec {name!r}; expected one of: "
                         + ", ".join(c.value for c in cls))


@dataclass(frozen=True)
class ComplexityScore:
    """Bit length of the compressed image plus its normalized form."""

    bits: int
    normalized: float


# ---------------------------------------------------------------------------
# Canonical PNG encoder.
#
# Emits a real, decodable PNG stream, but with every degree of freedom
# pinned: filter per row chosen by the minimum-sum-of-absolute-differences
# heuristic (ties -> lowest filter id), zlib at level 9 / window 15 /
# memLevel 8 / default strategy, one IDAT chunk. Grayscale stays grayscale.
# ---------------------------------------------------------------------------

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def _filter_candidates(rows: np.ndarray, bpp: int) -> np.ndarray:
    """All five PNG filter outputs, shape (5, n_rows, row_bytes), uint8."""
    h, rb = rows.shape
    cur = rows.astype(np.int16)
    left = np.zeros_like(cur)
    left[:, bpp:] = cur[:, :-bpp]
    up = np.zeros_like(cur)
    up[1:, :] = cur[:-1, :]
    upleft = np.zeros_like(cur)
    upleft[1:, bpp:] = cur[:-1, :-bpp]

    none = cur
    sub = cur - left
    upf = cur - up
    avg = cur - (left + up) // 2

    # Paeth predictor: nearest of left/up/upleft to left + up - upleft.
    p = left + up - upleft
    pa = np.abs(p - left)
    pb = np.abs(p - up)
    pc = np.abs(p - upleft)
    pred = np.where((pa <= pb) & (pa <= pc), left, np.where(pb <= pc, up, upleft))
    paeth = cur - pred

    return np.stack([none, sub, upf, avg, paeth]).astype(np.uint8)


def _encode_png(img: ImageBuffer) -> bytes:
    rows = img.to_array().reshape(img.height, img.width * img.channels)
    bpp = img.channels
    cands = _filter_candidates(rows, bpp)

    # Minimum sum of absolute differences, bytes read as signed.
    signed = cands.astype(np.int16)
    cost = np.minimum(signed, 256 - signed).sum(axis=2)
    chosen = np.argmin(cost, axis=0)  # ties -> lowest filter id

    h, rb = rows.shape
    filtered = np.empty((h, rb + 1), dtype=np.uint8)
    filtered[:, 0] = chosen
    filtered[:, 1:] = cands[chosen, np.arange(h)]

    compressor = zlib.compressobj(9, zlib.DEFLATED, 15, 8, zlib.Z_DEFAULT_STRATEGY)
    idat = compressor.compress(filtered.tobytes()) + compressor.flush()

    color_type = 0 if img.channels == 1 else 2
    ihdr = struct.pack(">IIBBBBB", img.width, img.height, 8, color_type, 0, 0, 0)
    return (
        _PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", idat)
        + _chunk(b"IEND", b"")
    )


def jpeg2000_available() -> bool:
    """Whether the optional JPEG2000 codec can be used in this build."""
    try:
        from PIL import features

        return bool(features.check_codec("jpg_2000"))
    except ImportError:
        return False


def _encode_jpeg2000(img: ImageBuffer) -> bytes:
    if not jpeg2000_available():
        raise UnsupportedCodecError(
            "JPEG2000 codec is not available in this build"
        )
    from PIL import Image

    arr = img.to_array()
    pil = Image.fromarray(arr[:, :, 0] if img.channels == 1 else arr,
                          "L" if img.channels == 1 else "RGB")
    buf = io.BytesIO()
    pil.save(buf, format="JPEG2000", irreversible=False)
    return buf.getvalue()


def encode(img: ImageBuffer, codec: CodecId) -> bytes:
    """Full encoded stream for `img` under `codec` (header bytes included)."""
    if codec is CodecId.DEFLATE_PNG:
        return _encode_png(img)
    if codec is CodecId.JPEG2000_LOSSLESS:
        return _encode_jpeg2000(img)
    raise InputError(f"unknown codec {codec!r}")


def compress_bit_length(img: ImageBuffer, codec: CodecId = CodecId.DEFLATE_PNG) -> int:
    """Bit length of the deterministic lossless encoding of `img`."""
    return 8 * len(encode(img, codec))


def normalize_complexity(bits: int, l_max: int) -> float:
    """Complexity ratio bits / l_max. May exceed 1 for out-of-distribution inputs."""
    if l_max <= 0:
        raise CalibrationError(
            f"l_max must be positive, got {l_max} (empty or degenerate calibration?)"
        )
    if bits < 0:
        raise InputError(f"bit length cannot be negative, got {bits}")
    return bits / l_max


def select_exit(normalized: float, k: int) -> int:
    """Map a normalized complexity to an exit index in {1..k}.

    ceil(normalized * k), capped at k; inputs below the first band
    (normalized == 0) are clamped up to exit 1.
    """
    if k < 1:
        raise InputError(f"exit count k must be >= 1, got {k}")
    if normalized < 0:
        raise InputError(f"normalized complexity must be >= 0, got {normalized}")
    return min(max(math.ceil(normalized * k), 1), k)


def compute_l_max(id_images: Iterable[ImageBuffer],
                  codec: CodecId = CodecId.DEFLATE_PNG) -> int:
    """Maximum compressed bit length over an in-distribution image set."""
    l_max = -1
    for img in id_images:
        l_max = max(l_max, compress_bit_length(img, codec))
    if l_max < 0:
        raise CalibrationError("cannot compute l_max from an empty image set")
    return l_max


def complexity_score(img: ImageBuffer, l_max: int,
                     codec: CodecId = CodecId.DEFLATE_PNG) -> ComplexityScore:
    """Bits and normalized complexity for one image."""
    bits = compress_bit_length(img, codec)
    return ComplexityScore(bits=bits, normalized=normalize_complexity(bits, l_max))
