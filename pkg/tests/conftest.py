"""Shared generators for synthetic images, logits, and profiles."""

import numpy as np
import pytest

from mood import (
    CalibrationProfile,
    ExitNetWeights,
    ImageBuffer,
    LogitsRecord,
    ScoreFunctionId,
)


def constant_image(value: int, size: int = 32, channels: int = 3) -> ImageBuffer:
    return ImageBuffer.from_array(
        np.full((size, size, channels), value, dtype=np.uint8)
    )


def gradient_image(lo: int, hi: int, size: int = 32, axis: int = 0,
                   channels: int = 3) -> ImageBuffer:
    """Smooth single-direction ramp from lo to hi."""
    ramp = np.linspace(lo, hi, size).astype(np.uint8)
    if axis == 0:
        plane = np.broadcast_to(ramp[:, None], (size, size))
    else:
        plane = np.broadcast_to(ramp[None, :], (size, size))
    arr = np.broadcast_to(plane[:, :, None], (size, size, channels))
    return ImageBuffer.from_array(np.ascontiguousarray(arr))


def smooth_gradient_image(rng: np.random.Generator, size: int = 32) -> ImageBuffer:
    """Smooth color gradient: per-channel ramps over a randomly tilted plane.
    Reliably needs more bits than any constant, far fewer than noise."""
    y, x = np.mgrid[0:size, 0:size]
    alpha = rng.uniform(0.25, 0.75)
    plane = alpha * x / (size - 1) + (1 - alpha) * y / (size - 1)
    chans = []
    for _ in range(3):
        lo = rng.integers(0, 64)
        hi = rng.integers(lo + 128, 256)
        chans.append(lo + (hi - lo) * plane)
    return ImageBuffer.from_array(np.stack(chans, axis=2).astype(np.uint8))


def textured_gradient_image(phase: float, size: int = 32) -> ImageBuffer:
    """Diagonal ramp with per-channel phase offsets; compresses noticeably
    worse than a single-direction ramp but far better than noise."""
    y, x = np.mgrid[0:size, 0:size]
    base = x * 7.3 + y * 11.9
    chans = [(base * s + phase * (i + 1)) % 256 for i, s in enumerate((1.0, 1.7, 2.3))]
    return ImageBuffer.from_array(np.stack(chans, axis=2).astype(np.uint8))


def noise_image(rng: np.random.Generator, size: int = 32,
                channels: int = 3) -> ImageBuffer:
    return ImageBuffer.from_array(
        rng.integers(0, 256, size=(size, size, channels), dtype=np.uint8)
    )


def record_of(logits, sample_id: str = "s", label=None) -> LogitsRecord:
    return LogitsRecord(sample_id=sample_id, logits=np.asarray(logits, dtype=float),
                        label=label)


def profile_of(k: int = 5, num_classes: int = 2, energy_means=None,
               gamma: float = 0.0, l_max_bits: int = 1000,
               score_fn: ScoreFunctionId | None = None,
               target_tpr: float = 0.95) -> CalibrationProfile:
    if energy_means is None:
        energy_means = (0.0,) * k
    return CalibrationProfile(
        k=k,
        num_classes=num_classes,
        energy_means=tuple(energy_means),
        l_max_bits=l_max_bits,
        gamma=gamma,
        score_fn=score_fn or ScoreFunctionId.adjusted_energy(),
        target_tpr=target_tpr,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240901)


# ---------------------------------------------------------------------------
# End-to-end synthetic workload: images that separate by construction.
#
# The toy net measures two statistics of the normalized input: total
# variation over 128 sampled horizontal pixel pairs (high for noise, low
# for flat/gradient images) and mean brightness (dark vs bright classes).
# Every exit emits the same two logits, so any score function separates
# low-variation from high-variation inputs at any exit.
# ---------------------------------------------------------------------------

SEP_SIZE = 32
SEP_D0 = SEP_SIZE * SEP_SIZE * 3
_SEP_A = 8.0      # baseline logit level
_SEP_B = 0.5      # weight on total variation
_SEP_BETA = 8.0   # weight on the brightness class feature
_SEP_MEAN_SPLIT = 0.3


def _sep_pairs():
    """128 (p, q) flat pixel-index pairs: 4 horizontally adjacent red-channel
    pairs per row."""
    pairs = []
    for row in range(SEP_SIZE):
        for j in range(4):
            col = j * 7 + 1
            p = (row * SEP_SIZE + col) * 3
            pairs.append((p, p + 3))
    return pairs


def build_separating_net(k: int = 5) -> ExitNetWeights:
    pairs = _sep_pairs()
    n_units = 2 * len(pairs) + 1  # rectified +/- differences plus a mean unit
    w1 = np.zeros((n_units, SEP_D0))
    for j, (p, q) in enumerate(pairs):
        w1[2 * j, p] = 1.0
        w1[2 * j, q] = -1.0
        w1[2 * j + 1, p] = -1.0
        w1[2 * j + 1, q] = 1.0
    w1[-1, :] = 1.0 / SEP_D0  # mean brightness of the normalized input

    def head(width, tv_slice, mean_index):
        h = np.zeros((2, width))
        h[:, tv_slice] = -_SEP_B
        h[0, mean_index] = -_SEP_BETA
        h[1, mean_index] = _SEP_BETA
        c = np.array([_SEP_A + _SEP_MEAN_SPLIT * _SEP_BETA,
                      _SEP_A - _SEP_MEAN_SPLIT * _SEP_BETA])
        return h, c

    # Block 2 collapses to [total variation, mean]; later blocks pass through.
    w2 = np.zeros((2, n_units))
    w2[0, : n_units - 1] = 1.0
    w2[1, n_units - 1] = 1.0

    dims = [SEP_D0, n_units, 2] + [2] * (k - 2)
    trunk_w = [w1, w2] + [np.eye(2) for _ in range(k - 2)]
    trunk_b = [np.zeros(d) for d in dims[1:]]
    head1_w, head1_c = head(n_units, slice(0, n_units - 1), n_units - 1)
    head2_w, head2_c = head(2, slice(0, 1), 1)
    head_w = [head1_w] + [head2_w] * (k - 1)
    head_c = [head1_c] + [head2_c] * (k - 1)
    return ExitNetWeights(
        dims=tuple(dims),
        num_classes=2,
        trunk_weights=tuple(trunk_w),
        trunk_biases=tuple(trunk_b),
        head_weights=tuple(head_w),
        head_biases=tuple(head_c),
    )


def brightness_label(img: ImageBuffer) -> int:
    """Class the separating net predicts: 0 dark, 1 bright."""
    return 0 if img.to_array().mean() / 255.0 < _SEP_MEAN_SPLIT else 1


def make_id_images(n: int, seed: int = 1) -> list[ImageBuffer]:
    """Low-complexity in-distribution mix: constants, smooth ramps, and a
    minority of busier diagonal ramps that stretch the complexity maximum."""
    rng = np.random.default_rng(seed)
    images = []
    for i in range(n):
        kind = i % 10
        if kind < 6:
            images.append(constant_image(int(rng.integers(0, 101))))
        elif kind < 9:
            lo = int(rng.integers(0, 64))
            hi = int(rng.integers(lo + 128, 256))
            images.append(gradient_image(lo, hi, axis=int(rng.integers(0, 2))))
        else:
            images.append(textured_gradient_image(float(rng.uniform(0, 60))))
    return images


def make_ood_images(n: int, seed: int = 2) -> list[ImageBuffer]:
    """High-complexity out-of-distribution inputs: per-pixel uniform noise."""
    rng = np.random.default_rng(seed)
    return [noise_image(rng) for _ in range(n)]
