"""Exit strategies producing per-sample detection outcomes.

Four ways to pick the exit whose detector judges a sample:

* complexity-routed ("mood"): the exit is a pure function of the image's
  compressed size, never of the logits;
* greedy: walk exits shallow to deep and reject at the first exit whose
  adjusted energy falls at or below that exit's own threshold;
* randomized: uniform exit choice from a pinned deterministic generator;
* constant: always the same exit (the classic fixed-depth baseline).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .complexity import ImageBuffer, compress_bit_length, normalize_complexity, select_exit
from .errors import CalibrationError, InputError
from .exitnet import ExitCostModel
from .scoring import (
    CalibrationProfile,
    LogitsRecord,
    adjusted_energy,
    calibrate_threshold,
    score,
)

__all__ = [
    "DECISION_IN",
    "DECISION_OUT",
    "DetectionOutcome",
    "MoodStrategy",
    "GreedyStrategy",
    "RandomizedStrategy",
    "ConstantStrategy",
    "parse_strategy",
    "SplitMix64",
    "mood_detect",
    "greedy_detect",
    "calibrate_greedy_gammas",
    "randomized_detect",
    "constant_detect",
]

DECISION_IN = "in"
DECISION_OUT = "out"


@dataclass(frozen=True)
class DetectionOutcome:
    """One sample's decision, the exit that made it, and the cost charged."""

    sample_id: str
    decision: str
    exit_used: int
    score: float
    predicted_class: int | None
    charged_flops: float

    def __post_init__(self):
        if self.decision not in (DECISION_IN, DECISION_OUT):
            raise InputError(f"decision must be 'in' or 'out', got {self.decision!r}")
        if (self.predicted_class is not None) != (self.decision == DECISION_IN):
            raise InputError("predicted_class must be present iff decision is 'in'")


@dataclass(frozen=True)
class MoodStrategy:
    pass


@dataclass(frozen=True)
class GreedyStrategy:
    # None means "calibrate per-exit thresholds from the evaluation's ID set".
    per_exit_gammas: tuple[float, ...] | None = None


@dataclass(frozen=True)
class RandomizedStrategy:
    seed: int = 0


@dataclass(frozen=True)
class ConstantStrategy:
    exit_index: int = 1


Strategy = MoodStrategy | GreedyStrategy | RandomizedStrategy | ConstantStrategy


def parse_strategy(text: str) -> Strategy:
    """Parse `mood`, `greedy`, `random:<seed>`, or `constant:<i>`."""
    if text == "mood":
        return MoodStrategy()
    if text == "greedy":
        return GreedyStrategy()
    if text.startswith("random:"):
        try:
            return RandomizedStrategy(seed=int(text.split(":", 1)[1]))
        except ValueError:
            raise InputError(f"bad randomized seed in {text!r}") from None
    if text.startswith("constant:"):
        try:
            return ConstantStrategy(exit_index=int(text.split(":", 1)[1]))
        except ValueError:
            raise InputError(f"bad constant exit in {text!r}") from None
    raise InputError(
        f"unknown strategy {text!r}; expected mood | greedy | random:<seed> | constant:<i>"
    )


_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Pinned 64-bit generator so every implementation draws identical exits.

    State advances by the golden-ratio constant; output is finalized with
    the 30/27/31 xor-shift, multiply mix. Exits come from the multiply-shift
    map (x * k) >> 64, which is rejection-free and bias-bounded.
    """

    GAMMA = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + self.GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * self.MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * self.MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_exit(self, k: int) -> int:
        """Uniform draw from {1..k}."""
        if k < 1:
            raise InputError(f"exit count k must be >= 1, got {k}")
        return ((self.next_uint64() * k) >> 64) + 1


def _classify(record: LogitsRecord, exit_index: int) -> int:
    # np.argmax returns the lowest index on ties.
    return int(np.argmax(record.logits_at(exit_index)))


def _check_shapes(record: LogitsRecord, profile: CalibrationProfile,
                  costs: ExitCostModel) -> None:
    if record.k != profile.k:
        raise InputError(f"record has {record.k} exits, profile expects {profile.k}")
    if record.num_classes != profile.num_classes:
        raise InputError(
            f"record has {record.num_classes} classes, profile expects {profile.num_classes}"
        )
    if costs.k != profile.k:
        raise InputError(f"cost model covers {costs.k} exits, profile expects {profile.k}")


def _threshold_outcome(record: LogitsRecord, exit_index: int,
                       profile: CalibrationProfile, costs: ExitCostModel) -> DetectionOutcome:
    s = score(record, exit_index, profile)
    if s >= profile.gamma:
        return DetectionOutcome(
            sample_id=record.sample_id,
            decision=DECISION_IN,
            exit_used=exit_index,
            score=s,
            predicted_class=_classify(record, exit_index),
            charged_flops=costs.at(exit_index),
        )
    return DetectionOutcome(
        sample_id=record.sample_id,
        decision=DECISION_OUT,
        exit_used=exit_index,
        score=s,
        predicted_class=None,
        charged_flops=costs.at(exit_index),
    )


def mood_detect(record: LogitsRecord, img: ImageBuffer,
                profile: CalibrationProfile, costs: ExitCostModel) -> DetectionOutcome:
    """Complexity-routed detection: route by compressed size, then threshold.

    The boundary is inclusive: score == gamma is in-distribution.
    """
    _check_shapes(record, profile, costs)
    bits = compress_bit_length(img, profile.codec)
    normalized = normalize_complexity(bits, profile.l_max_bits)
    exit_index = select_exit(normalized, profile.k)
    return _threshold_outcome(record, exit_index, profile, costs)


def greedy_detect(record: LogitsRecord, profile: CalibrationProfile,
                  per_exit_gammas: Sequence[float],
                  costs: ExitCostModel) -> DetectionOutcome:
    """Cascade detection: reject at the first exit whose adjusted energy is
    at or below that exit's threshold; survivors are in-distribution and
    classified at the final exit."""
    _check_shapes(record, profile, costs)
    gammas = tuple(float(g) for g in per_exit_gammas)
    if len(gammas) != profile.k:
        raise InputError(
            f"need {profile.k} per-exit thresholds, got {len(gammas)}"
        )
    for i in range(1, profile.k + 1):
        a = adjusted_energy(record, i, profile)
        if a <= gammas[i - 1]:
            return DetectionOutcome(
                sample_id=record.sample_id,
                decision=DECISION_OUT,
                exit_used=i,
                score=a,
                predicted_class=None,
                charged_flops=costs.at(i),
            )
    k = profile.k
    return DetectionOutcome(
        sample_id=record.sample_id,
        decision=DECISION_IN,
        exit_used=k,
        score=adjusted_energy(record, k, profile),
        predicted_class=_classify(record, k),
        charged_flops=costs.at(k),
    )


def calibrate_greedy_gammas(id_records: Sequence[LogitsRecord],
                            profile: CalibrationProfile) -> tuple[float, ...]:
    """Per-exit thresholds, each the same order statistic used for the global
    gamma but over that exit's adjusted energies."""
    records = list(id_records)
    if not records:
        raise CalibrationError("cannot calibrate greedy thresholds from an empty set")
    gammas = []
    for i in range(1, profile.k + 1):
        scores = [adjusted_energy(r, i, profile) for r in records]
        gammas.append(calibrate_threshold(scores, profile.target_tpr))
    return tuple(gammas)


def randomized_detect(record: LogitsRecord, profile: CalibrationProfile,
                      rng: SplitMix64, costs: ExitCostModel) -> DetectionOutcome:
    """Detection at an exit drawn uniformly from the pinned generator."""
    _check_shapes(record, profile, costs)
    return _threshold_outcome(record, rng.next_exit(profile.k), profile, costs)


def constant_detect(record: LogitsRecord, profile: CalibrationProfile,
                    exit_index: int, costs: ExitCostModel) -> DetectionOutcome:
    """Detection at a fixed exit (exit k reproduces the final-exit baseline)."""
    _check_shapes(record, profile, costs)
    if not 1 <= exit_index <= profile.k:
        raise InputError(f"exit {exit_index} out of range 1..{profile.k}")
    return _threshold_outcome(record, exit_index, profile, costs)
