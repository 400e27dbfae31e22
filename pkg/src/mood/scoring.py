"""Per-exit OOD scores and calibration.

Scores follow the convention "higher means more in-distribution". The
negative energy -E(x) = logsumexp(logits) tracks log-likelihood up to an
exit-dependent constant; subtracting the in-distribution mean of -E at the
same exit (the adjusted energy) removes that constant, making scores
comparable across exits so one global threshold works for all of them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .complexity import (
    CodecId,
    ImageBuffer,
    compress_bit_length,
    normalize_complexity,
    select_exit,
)
from .errors import CalibrationError, InputError

__all__ = [
    "LogitsRecord",
    "ScoreFunctionId",
    "CalibrationProfile",
    "energy",
    "msp",
    "odin_t",
    "adjusted_energy",
    "score",
    "calibrate_energy_means",
    "calibrate_threshold",
    "calibrate_profile",
]


@dataclass(frozen=True)
class LogitsRecord:
    """One sample's logits at every exit: a (k, C) float matrix."""

    sample_id: str
    logits: np.ndarray
    label: int | None = None

    def __post_init__(self):
        arr = np.array(self.logits, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(
                f"logits must be a (k, C) matrix with k, C >= 1, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InputError(f"logits for sample {self.sample_id!r} contain non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "logits", arr)
        if self.label is not None and not (0 <= self.label < arr.shape[1]):
            raise InputError(
                f"label {self.label} out of range for {arr.shape[1]} classes"
            )

    @property
    def k(self) -> int:
        return self.logits.shape[0]

    @property
    def num_classes(self) -> int:
        return self.logits.shape[1]

    def logits_at(self, exit_index: int) -> np.ndarray:
        """Logit vector of the 1-based exit `exit_index`."""
        if not 1 <= exit_index <= self.k:
            raise InputError(f"exit {exit_index} out of range 1..{self.k}")
        return self.logits[exit_index - 1]


_SCORE_KINDS = ("msp", "odin", "energy", "adjusted-energy")


@dataclass(frozen=True)
class ScoreFunctionId:
    """Which per-exit scoring function to use (temperature for odin only)."""

    kind: str
    temperature: float | None = None

    def __post_init__(self):
        if self.kind not in _SCORE_KINDS:
            raise InputError(
                f"unknown score function {self.kind!r}; expected one of {_SCORE_KINDS}"
            )
        if self.kind == "odin":
            if self.temperature is None or not (self.temperature > 0):
                raise InputError("odin requires a positive temperature")
        elif self.temperature is not None:
            raise InputError(f"score function {self.kind!r} takes no temperature")

    @classmethod
    def msp(cls) -> "ScoreFunctionId":
        return cls("msp")

    @classmethod
    def odin(cls, temperature: float = 1000.0) -> "ScoreFunctionId":
        return cls("odin", float(temperature))

    @classmethod
    def energy(cls) -> "ScoreFunctionId":
        return cls("energy")

    @classmethod
    def adjusted_energy(cls) -> "ScoreFunctionId":
        return cls("adjusted-energy")

    @classmethod
    def parse(cls, name: str, temperature: float = 1000.0) -> "ScoreFunctionId":
        if name == "odin":
            return cls.odin(temperature)
        return cls(name)


@dataclass(frozen=True)
class CalibrationProfile:
    """Frozen calibration state shared by every detection strategy.

    Immutable once built; safe to share across threads.
    """

    k: int
    num_classes: int
    energy_means: tuple[float, ...]
    l_max_bits: int
    gamma: float
    codec: CodecId = CodecId.DEFLATE_PNG
    score_fn: ScoreFunctionId = field(default_factory=ScoreFunctionId.adjusted_energy)
    target_tpr: float = 0.95
    created_from: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if self.num_classes < 1:
            raise InputError(f"num_classes must be >= 1, got {self.num_classes}")
        object.__setattr__(self, "energy_means", tuple(float(m) for m in self.energy_means))
        if len(self.energy_means) != self.k:
            raise InputError(
                f"energy_means has length {len(self.energy_means)}, expected k={self.k}"
            )
        if not 0 < self.target_tpr < 1:
            raise InputError(f"target_tpr must be in (0, 1), got {self.target_tpr}")
        if self.created_from < 1:
            raise InputError("profile must be calibrated from at least one sample")


def energy(logits_at_exit) -> float:
    """Energy E = -log sum_j exp(logit_j), via the max-shifted logsumexp."""
    v = np.asarray(logits_at_exit, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InputError(f"expected a non-empty logit vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError("logits contain non-finite values")
    m = v.max()
    return float(-(m + np.log(np.exp(v - m).sum())))


def msp(logits_at_exit) -> float:
    """Maximum softmax probability, computed with the max-shift."""
    v = np.asarray(logits_at_exit, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InputError(f"expected a non-empty logit vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError("logits contain non-finite values")
    shifted = v - v.max()
    return float(np.exp(shifted).max() / np.exp(shifted).sum())


def odin_t(logits_at_exit, temperature: float) -> float:
    """Maximum softmax probability of temperature-divided logits."""
    if not temperature > 0:
        raise InputError(f"temperature must be positive, got {temperature}")
    v = np.asarray(logits_at_exit, dtype=np.float64)
    return msp(v / temperature)


def calibrate_energy_means(id_records: Iterable[LogitsRecord]) -> np.ndarray:
    """Mean negative energy per exit over an in-distribution calibration set.

    Every record contributes at every exit (no routing involved), so the
    estimate is deterministic and uses the full set at each exit.
    """
    records = list(id_records)
    if not records:
        raise CalibrationError("cannot calibrate energy means from an empty set")
    shape = records[0].logits.shape
    for r in records:
        if r.logits.shape != shape:
            raise InputError(
                f"record {r.sample_id!r} has shape {r.logits.shape}, "
                f"expected {shape}"
            )
    stacked = np.stack([r.logits for r in records])  # (n, k, C)
    shift = stacked.max(axis=2, keepdims=True)
    neg_energy = shift[:, :, 0] + np.log(np.exp(stacked - shift).sum(axis=2))
    return neg_energy.mean(axis=0)


def adjusted_energy(record: LogitsRecord, exit_index: int,
                    profile: CalibrationProfile) -> float:
    """Negative energy at an exit minus that exit's in-distribution mean."""
    if record.k != profile.k:
        raise InputError(
            f"record has {record.k} exits, profile expects {profile.k}"
        )
    if not 1 <= exit_index <= profile.k:
        raise InputError(f"exit {exit_index} out of range 1..{profile.k}")
    return -energy(record.logits_at(exit_index)) - profile.energy_means[exit_index - 1]


def score(record: LogitsRecord, exit_index: int,
          profile: CalibrationProfile) -> float:
    """Dispatch to the profile's score function; higher means more in-distribution."""
    fn = profile.score_fn
    if fn.kind == "msp":
        return msp(record.logits_at(exit_index))
    if fn.kind == "odin":
        return odin_t(record.logits_at(exit_index), fn.temperature)
    if fn.kind == "energy":
        return -energy(record.logits_at(exit_index))
    return adjusted_energy(record, exit_index, profile)


def calibrate_threshold(routed_scores: Sequence[float], target_tpr: float = 0.95) -> float:
    """Threshold gamma such that at least `target_tpr` of the scores are >= gamma.

    Takes the order statistic at zero-based index floor((1 - target_tpr) * N)
    of the ascending sort. Duplicate values can only push the achieved rate
    above the target, never below.
    """
    if not 0 < target_tpr < 1:
        raise InputError(f"target_tpr must be in (0, 1), got {target_tpr}")
    scores = np.asarray(routed_scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise CalibrationError("cannot calibrate a threshold from an empty score list")
    if not np.all(np.isfinite(scores)):
        raise InputError("scores contain non-finite values")
    m = int(np.floor((1.0 - target_tpr) * scores.size))
    return float(np.sort(scores, kind="stable")[m])


def calibrate_profile(
    id_records: Sequence[LogitsRecord],
    id_images: Mapping[str, ImageBuffer],
    codec: CodecId = CodecId.DEFLATE_PNG,
    score_fn: ScoreFunctionId | None = None,
    target_tpr: float = 0.95,
) -> CalibrationProfile:
    """Full calibration pass over an in-distribution set.

    Computes per-exit energy means over all records, l_max over the paired
    images, and the global threshold over complexity-routed scores (each
    sample scored at the exit it would take at deployment time). Logits and
    images must cover exactly the same sample ids.
    """
    if score_fn is None:
        score_fn = ScoreFunctionId.adjusted_energy()
    records = list(id_records)
    if not records:
        raise CalibrationError("calibration requires at least one sample")
    record_ids = {r.sample_id for r in records}
    image_ids = set(id_images)
    if record_ids != image_ids:
        missing = sorted(record_ids - image_ids)[:3]
        extra = sorted(image_ids - record_ids)[:3]
        raise InputError(
            f"logits/images id mismatch (missing images for {missing}, "
            f"images without logits {extra})"
        )

    means = calibrate_energy_means(records)
    bits_by_id = {
        r.sample_id: compress_bit_length(id_images[r.sample_id], codec)
        for r in records
    }
    l_max = max(bits_by_id.values())
    if l_max <= 0:
        raise CalibrationError("all calibration images compressed to zero bits")

    draft = CalibrationProfile(
        k=records[0].k,
        num_classes=records[0].num_classes,
        energy_means=tuple(means),
        l_max_bits=l_max,
        gamma=0.0,
        codec=codec,
        score_fn=score_fn,
        target_tpr=target_tpr,
        created_from=len(records),
    )
    routed = []
    for r in records:
        normalized = normalize_complexity(bits_by_id[r.sample_id], l_max)
        routed.append(score(r, select_exit(normalized, draft.k), draft))
    gamma = calibrate_threshold(routed, target_tpr)
    return dataclasses.replace(draft, gamma=gamma)
