"""Detection-quality metrics: ROC curves, event-window rates, thresholds.

Scores follow the package-wide convention that larger means more
anomalous and that a bin or record fires only when its score is
strictly greater than the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "RocCurve",
    "roc_auc",
    "EventWindowConfig",
    "EventEvalResult",
    "event_tpr_fpr",
    "threshold_for_fpr",
]


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep of (false positive rate, true positive rate)."""

    fpr: np.ndarray
    tpr: np.ndarray
    auroc: float

    def points(self) -> list[tuple[float, float]]:
        return [(float(f), float(t)) for f, t in zip(self.fpr, self.tpr)]


def roc_auc(scores, labels) -> RocCurve:
    """ROC curve and area for binary labels (truthy = anomalous).

    The sweep visits each distinct score once, from high to low, so
    tied scores move along the curve as a single step; the area is the
    trapezoidal integral, which credits ties with half weight exactly
    like the rank-based estimator.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.ndim != 1 or s.shape != y.shape:
        raise DataError("scores and labels must be equal-length vectors")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs at least one anomalous and one normal label")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # indices closing each group of equal scores
    last_of_group = np.nonzero(np.diff(s_sorted))[0]
    bounds = np.concatenate([last_of_group, [s.size - 1]])
    tp = np.cumsum(y_sorted)[bounds]
    fp = np.cumsum(~y_sorted)[bounds]
    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    area = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1])) / 2.0)
    return RocCurve(fpr=fpr, tpr=tpr, auroc=area)


@dataclass(frozen=True)
class EventWindowConfig:
    """How far around an event index a detection still counts.

    window: half-width in bins; a hit anywhere in [index - window,
    index + window] detects the event. excluded: inclusive (start, end)
    spans removed from the false-positive denominator, e.g. maintenance.
    """

    window: int = 5
    excluded: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        if self.window < 0:
            raise DataError("window must be non-negative")
        for start, end in self.excluded:
            if end < start:
                raise DataError(f"excluded span ({start}, {end}) is reversed")


@dataclass(frozen=True)
class EventEvalResult:
    tpr: float
    fpr: float
    detected: int
    n_events: int
    n_normal_bins: int
    n_false_bins: int
    vacuous_tpr: bool
    vacuous_fpr: bool


def _event_index(event) -> int:
    return int(getattr(event, "index", event))


def event_tpr_fpr(scores, threshold: float, events, cfg: EventWindowConfig | None = None) -> EventEvalResult:
    """Event-level TPR and bin-level FPR for a scored time series.

    An event is detected when any bin inside its window fires. The FPR
    denominator contains only bins outside every event window and every
    excluded span. Zero events yield TPR 1.0 with vacuous_tpr set, and
    an empty normal region yields FPR 0.0 with vacuous_fpr set.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DataError("scores must be a non-empty vector")
    cfg = cfg or EventWindowConfig()
    fired = s > threshold

    indices = [_event_index(e) for e in events]
    for idx in indices:
        if not 0 <= idx < s.size:
            raise DataError(f"event index {idx} outside the score range")

    in_window = np.zeros(s.size, dtype=bool)
    detected = 0
    for idx in indices:
        lo = max(0, idx - cfg.window)
        hi = min(s.size - 1, idx + cfg.window)
        in_window[lo : hi + 1] = True
        if fired[lo : hi + 1].any():
            detected += 1
    for start, end in cfg.excluded:
        lo = max(0, start)
        hi = min(s.size - 1, end)
        if lo <= hi:
            in_window[lo : hi + 1] = True

    normal = ~in_window
    n_normal = int(normal.sum())
    n_false = int((fired & normal).sum())

    vacuous_tpr = len(indices) == 0
    vacuous_fpr = n_normal == 0
    tpr = 1.0 if vacuous_tpr else detected / len(indices)
    fpr = 0.0 if vacuous_fpr else n_false / n_normal
    return EventEvalResult(
        tpr=tpr,
        fpr=fpr,
        detected=detected,
        n_events=len(indices),
        n_normal_bins=n_normal,
        n_false_bins=n_false,
        vacuous_tpr=vacuous_tpr,
        vacuous_fpr=vacuous_fpr,
    )


def threshold_for_fpr(scores, target_fpr: float) -> float:
    """Smallest usable threshold whose exceedance fraction is <= target.

    With n scores sorted ascending and k = floor(target * n): k of the
    scores are allowed to fire, so the threshold is the (n - k)-th order
    statistic (1-based). k = 0 returns one ulp above the maximum so that
    nothing fires even under a >= comparison downstream; k >= n returns
    -inf so that every bin fires.
    """
    s = np.sort(np.asarray(scores, dtype=float))
    if s.ndim != 1 or s.size == 0:
        raise DataError("scores must be a non-empty vector")
    if not 0.0 <= target_fpr <= 1.0:
        raise DataError("target_fpr must lie in [0, 1]")
    n = s.size
    k = int(np.floor(target_fpr * n))
    if k <= 0:
        return float(np.nextafter(s[-1], np.inf))
    if k >= n:
        return float("-inf")
    return float(s[n - k - 1])
