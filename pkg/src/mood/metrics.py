"""Detection metrics and report aggregation.

Positive class is in-distribution throughout: higher score means more ID.
AUROC is the Mann-Whitney statistic (ties count one half), computed by
rank-sum in O(n log n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .detector import DECISION_IN, DetectionOutcome
from .errors import InputError
from .exitnet import ExitCostModel
from .scoring import calibrate_threshold

__all__ = [
    "EvalReport",
    "DEFAULT_FIVE_EXIT_COSTS",
    "auroc",
    "fpr_at_tpr",
    "id_accuracy",
    "mean_flops",
    "exit_histogram",
    "build_report",
    "report_rows_to_csv",
    "report_rows_to_table",
]

# Reference cumulative cost vector for a five-exit image classifier, in
# FLOPs. Used as the default when no cost model file is supplied and k == 5.
DEFAULT_FIVE_EXIT_COSTS = ExitCostModel(
    (26_700_000.0, 51_600_000.0, 68_900_000.0, 88_400_000.0, 105_100_000.0)
)


@dataclass(frozen=True)
class EvalReport:
    """Aggregate metrics for one strategy over one ID/OOD dataset pair."""

    auroc: float
    fpr_at_tpr: float
    id_accuracy: float | None
    mean_flops: float
    exit_histogram: tuple[int, ...]
    n_id: int
    n_ood: int


def _validate_scores(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty score list")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def auroc(id_scores: Sequence[float], ood_scores: Sequence[float]) -> float:
    """Probability a random ID score exceeds a random OOD score (ties = 0.5)."""
    id_arr = _validate_scores(id_scores, "id_scores")
    ood_arr = _validate_scores(ood_scores, "ood_scores")
    n_id, n_ood = id_arr.size, ood_arr.size
    ranks = rankdata(np.concatenate([id_arr, ood_arr]), method="average")
    u = ranks[:n_id].sum() - n_id * (n_id + 1) / 2.0
    return float(u / (n_id * n_ood))


def fpr_at_tpr(id_scores: Sequence[float], ood_scores: Sequence[float],
               target_tpr: float = 0.95) -> float:
    """Fraction of OOD scores at or above the threshold that keeps
    `target_tpr` of the ID scores in-distribution."""
    id_arr = _validate_scores(id_scores, "id_scores")
    ood_arr = _validate_scores(ood_scores, "ood_scores")
    gamma = calibrate_threshold(id_arr, target_tpr)
    return float(np.count_nonzero(ood_arr >= gamma) / ood_arr.size)


def id_accuracy(outcomes: Sequence[DetectionOutcome],
                labels: Mapping[str, int],
                over_accepted_only: bool = False) -> float:
    """Classification accuracy on the ID stream.

    By default, samples rejected as OOD count as errors (deployment
    semantics: a rejected ID sample is never classified). With
    `over_accepted_only`, accuracy is taken among accepted samples only.
    """
    if not outcomes:
        raise InputError("cannot compute accuracy over an empty outcome list")
    correct = 0
    accepted = 0
    for o in outcomes:
        if o.sample_id not in labels:
            raise InputError(f"no label for sample {o.sample_id!r}")
        if o.decision == DECISION_IN:
            accepted += 1
            if o.predicted_class == labels[o.sample_id]:
                correct += 1
    if over_accepted_only:
        if accepted == 0:
            return 0.0
        return correct / accepted
    return correct / len(outcomes)


def mean_flops(outcomes: Sequence[DetectionOutcome], costs: ExitCostModel) -> float:
    """Arithmetic mean of the charged FLOPs over a workload."""
    if not outcomes:
        raise InputError("cannot average FLOPs over an empty outcome list")
    total = 0.0
    for o in outcomes:
        if o.charged_flops != costs.at(o.exit_used):
            raise InputError(
                f"sample {o.sample_id!r} charged {o.charged_flops} FLOPs but the "
                f"cost model says exit {o.exit_used} costs {costs.at(o.exit_used)}"
            )
        total += o.charged_flops
    return total / len(outcomes)


def exit_histogram(outcomes: Sequence[DetectionOutcome], k: int) -> tuple[int, ...]:
    """Count of samples that stopped at each exit 1..k."""
    if k < 1:
        raise InputError(f"exit count k must be >= 1, got {k}")
    counts = [0] * k
    for o in outcomes:
        if not 1 <= o.exit_used <= k:
            raise InputError(f"outcome exit {o.exit_used} out of range 1..{k}")
        counts[o.exit_used - 1] += 1
    return tuple(counts)


def build_report(id_outcomes: Sequence[DetectionOutcome],
                 ood_outcomes: Sequence[DetectionOutcome],
                 id_scores: Sequence[float],
                 ood_scores: Sequence[float],
                 costs: ExitCostModel,
                 target_tpr: float = 0.95,
                 id_labels: Mapping[str, int] | None = None,
                 accuracy_over_accepted_only: bool = False) -> EvalReport:
    """Aggregate one evaluation run into a report row.

    Mean FLOPs and the exit histogram cover the whole workload (ID and OOD
    combined); accuracy is reported only when ID labels are available.
    """
    combined = list(id_outcomes) + list(ood_outcomes)
    acc = None
    if id_labels is not None:
        acc = id_accuracy(id_outcomes, id_labels, accuracy_over_accepted_only)
    return EvalReport(
        auroc=auroc(id_scores, ood_scores),
        fpr_at_tpr=fpr_at_tpr(id_scores, ood_scores, target_tpr),
        id_accuracy=acc,
        mean_flops=mean_flops(combined, costs),
        exit_histogram=exit_histogram(combined, costs.k),
        n_id=len(id_outcomes),
        n_ood=len(ood_outcomes),
    )


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _report_cells(strategy: str, dataset: str, report: EvalReport) -> list[str]:
    total = sum(report.exit_histogram)
    freqs = [(c / total if total else 0.0) for c in report.exit_histogram]
    return (
        [strategy, dataset, _fmt(report.auroc), _fmt(report.fpr_at_tpr),
         _fmt(report.id_accuracy), _fmt(report.mean_flops)]
        + [_fmt(f) for f in freqs]
    )


def _header_cells(k: int) -> list[str]:
    return (["strategy", "dataset", "auroc", "fpr95", "id_acc", "mean_flops"]
            + [f"exit_{i}" for i in range(1, k + 1)])


def report_rows_to_csv(rows: Sequence[tuple[str, str, EvalReport]]) -> str:
    """CSV with one row per (strategy, dataset) pair."""
    if not rows:
        raise InputError("no report rows to render")
    k = len(rows[0][2].exit_histogram)
    lines = [",".join(_header_cells(k))]
    for strategy, dataset, report in rows:
        lines.append(",".join(_report_cells(strategy, dataset, report)))
    return "\n".join(lines) + "\n"


def report_rows_to_table(rows: Sequence[tuple[str, str, EvalReport]]) -> str:
    """Aligned plain-text table of the same rows as the CSV."""
    if not rows:
        raise InputError("no report rows to render")
    k = len(rows[0][2].exit_histogram)
    table = [_header_cells(k)]
    for strategy, dataset, report in rows:
        table.append(_report_cells(strategy, dataset, report))
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
