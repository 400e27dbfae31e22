"""Minimal inference-only multi-exit classifier with analytic cost accounting.

A k-block affine+ReLU trunk with one affine classification head per block.
This is deliberately the smallest model family with the property the
detection pipeline needs: k classifiers at strictly increasing cumulative
cost, bit-exactly reproducible from a weight file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .complexity import ImageBuffer
from .errors import InputError, MagicError, SchemaError, TruncatedError
from .scoring import LogitsRecord

__all__ = [
    "ExitNetWeights",
    "ExitCostModel",
    "forward_all_exits",
    "analytic_cost_model",
    "write_weights",
    "read_weights",
]

_MAGIC = b"MOODNET1"


@dataclass(frozen=True)
class ExitNetWeights:
    """Trunk matrices W_i (d_i x d_{i-1}), biases b_i, and per-exit heads H_i, c_i."""

    dims: tuple[int, ...]
    num_classes: int
    trunk_weights: tuple[np.ndarray, ...]
    trunk_biases: tuple[np.ndarray, ...]
    head_weights: tuple[np.ndarray, ...]
    head_biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 2:
            raise InputError("need at least one block (dims must list d_0..d_k)")
        if any(d < 1 for d in dims):
            raise InputError(f"all layer widths must be >= 1, got {dims}")
        if self.num_classes < 1:
            raise InputError(f"num_classes must be >= 1, got {self.num_classes}")
        k, c = self.k, self.num_classes
        groups = {
            "trunk_weights": (self.trunk_weights, [(dims[i + 1], dims[i]) for i in range(k)]),
            "trunk_biases": (self.trunk_biases, [(dims[i + 1],) for i in range(k)]),
            "head_weights": (self.head_weights, [(c, dims[i + 1]) for i in range(k)]),
            "head_biases": (self.head_biases, [(c,)] * k),
        }
        for name, (arrays, shapes) in groups.items():
            if len(arrays) != k:
                raise InputError(f"{name} must have {k} entries, got {len(arrays)}")
            frozen = []
            for i, (arr, shape) in enumerate(zip(arrays, shapes)):
                a = np.array(arr, dtype=np.float64, copy=True)
                if a.shape != shape:
                    raise InputError(
                        f"{name}[{i}] has shape {a.shape}, expected {shape}"
                    )
                if not np.all(np.isfinite(a)):
                    raise InputError(f"{name}[{i}] contains non-finite values")
                a.flags.writeable = False
                frozen.append(a)
            object.__setattr__(self, name, tuple(frozen))

    @property
    def k(self) -> int:
        return len(self.dims) - 1

    @property
    def input_size(self) -> int:
        return self.dims[0]


@dataclass(frozen=True)
class ExitCostModel:
    """Cumulative inference cost (FLOPs) charged for stopping at each exit."""

    cumulative_flops: tuple[float, ...]

    def __post_init__(self):
        flops = tuple(float(f) for f in self.cumulative_flops)
        object.__setattr__(self, "cumulative_flops", flops)
        if len(flops) < 1:
            raise InputError("cost model needs at least one exit")
        if any(b <= a for a, b in zip(flops, flops[1:])):
            raise InputError(
                f"cumulative_flops must be strictly increasing, got {flops}"
            )

    @property
    def k(self) -> int:
        return len(self.cumulative_flops)

    def at(self, exit_index: int) -> float:
        """Cost of stopping at the 1-based exit `exit_index`."""
        if not 1 <= exit_index <= self.k:
            raise InputError(f"exit {exit_index} out of range 1..{self.k}")
        return self.cumulative_flops[exit_index - 1]


def forward_all_exits(weights: ExitNetWeights, img: ImageBuffer,
                      sample_id: str = "", label: int | None = None) -> LogitsRecord:
    """Run the trunk once and emit every exit's logits.

    Pixels are flattened row-major (channel-interleaved) and scaled to
    [0, 1] by dividing by 255.
    """
    x = np.frombuffer(img.pixels, dtype=np.uint8).astype(np.float64) / 255.0
    if x.size != weights.input_size:
        raise InputError(
            f"image flattens to {x.size} values, network expects {weights.input_size}"
        )
    logits = np.empty((weights.k, weights.num_classes))
    h = x
    for i in range(weights.k):
        h = np.maximum(weights.trunk_weights[i] @ h + weights.trunk_biases[i], 0.0)
        logits[i] = weights.head_weights[i] @ h + weights.head_biases[i]
    return LogitsRecord(sample_id=sample_id, logits=logits, label=label)


def analytic_cost_model(weights: ExitNetWeights) -> ExitCostModel:
    """Cumulative FLOPs per exit, counting 2 FLOPs per multiply-accumulate."""
    dims, c = weights.dims, weights.num_classes
    trunk = 0.0
    flops = []
    for i in range(weights.k):
        trunk += 2.0 * dims[i + 1] * dims[i]
        flops.append(trunk + 2.0 * c * dims[i + 1])
    return ExitCostModel(tuple(flops))


def write_weights(weights: ExitNetWeights, path) -> None:
    """Serialize to the MOODNET1 binary format (little-endian f64, row-major)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", weights.k, weights.num_classes))
        fh.write(struct.pack(f"<{len(weights.dims)}I", *weights.dims))
        for i in range(weights.k):
            for arr in (weights.trunk_weights[i], weights.trunk_biases[i],
                        weights.head_weights[i], weights.head_biases[i]):
                fh.write(arr.astype("<f8").tobytes(order="C"))


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedError(f"weight file ended while reading {what} "
                             f"({len(data)} of {n} bytes)")
    return data


def read_weights(path) -> ExitNetWeights:
    """Load a MOODNET1 weight file."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise MagicError(f"not a MOODNET1 file (magic {magic!r})")
        k, c = struct.unpack("<II", _read_exact(fh, 8, "k and num_classes"))
        if k < 1 or c < 1:
            raise SchemaError(f"invalid k={k} or num_classes={c}")
        dims = struct.unpack(f"<{k + 1}I", _read_exact(fh, 4 * (k + 1), "dims"))

        def read_block(shape, what):
            n = int(np.prod(shape))
            raw = _read_exact(fh, 8 * n, what)
            return np.frombuffer(raw, dtype="<f8").reshape(shape)

        tw, tb, hw, hb = [], [], [], []
        for i in range(k):
            tw.append(read_block((dims[i + 1], dims[i]), f"trunk matrix {i + 1}"))
            tb.append(read_block((dims[i + 1],), f"trunk bias {i + 1}"))
            hw.append(read_block((c, dims[i + 1]), f"head matrix {i + 1}"))
            hb.append(read_block((c,), f"head bias {i + 1}"))
        trailing = fh.read(1)
        if trailing:
            raise SchemaError("trailing bytes after declared weight payload")
    return ExitNetWeights(
        dims=dims,
        num_classes=c,
        trunk_weights=tuple(tw),
        trunk_biases=tuple(tb),
        head_weights=tuple(hw),
        head_biases=tuple(hb),
    )
