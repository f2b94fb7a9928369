"""ROC threshold selection, abstention decisions and the margin diagnostic.

Scores are first oriented so that larger always means "more
in-distribution".  In-distribution samples are the positive class, and a
sample is retained when its oriented score is strictly above the cut.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidInputError, ParseError
from .evidence import MetricKind, Orientation

THRESHOLD_KEYS = ("metric", "cut", "n_id", "n_ood", "tpr", "fpr")


def orient(raw_score, metric):
    """Flip uncertainty-style scores so larger means more confident."""
    metric = MetricKind.parse(metric)
    raw = np.asarray(raw_score, dtype=np.float64)
    out = raw if metric.orientation is Orientation.HIGHER_MEANS_CONFIDENT else -raw
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CalibratedThreshold:
    metric: MetricKind
    cut: float
    n_id: int
    n_ood: int
    tpr: float
    fpr: float

    @property
    def youden(self):
        return self.tpr - self.fpr

    def to_dict(self):
        return {
            "metric": self.metric.value,
            "cut": _encode_float(self.cut),
            "n_id": self.n_id,
            "n_ood": self.n_ood,
            "tpr": self.tpr,
            "fpr": self.fpr,
        }

    @classmethod
    def from_dict(cls, d, path=None):
        missing = [k for k in THRESHOLD_KEYS if k not in d]
        if missing:
            raise ParseError(f"threshold is missing keys {missing}", path=path)
        try:
            return cls(
                metric=MetricKind.parse(d["metric"]),
                cut=_decode_float(d["cut"]),
                n_id=int(d["n_id"]),
                n_ood=int(d["n_ood"]),
                tpr=float(d["tpr"]),
                fpr=float(d["fpr"]),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad threshold field: {exc}", path=path) from exc


def _encode_float(v):
    # Strict JSON has no infinities; sentinel cuts are written as strings.
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return v


def _decode_float(v):
    if isinstance(v, str):
        if v in ("+inf", "-inf"):
            return float(v)
        raise ValueError(f"unexpected string {v!r}")
    return float(v)


def save_threshold(thr, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(thr.to_dict(), fh, indent=2, allow_nan=False)
        fh.write("\n")


def load_threshold(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read threshold: {exc.strerror}", path=path) from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, offset=exc.pos, line=exc.lineno) from exc
    if not isinstance(d, dict):
        raise ParseError("threshold must be a JSON object", path=path)
    return CalibratedThreshold.from_dict(d, path=path)


def _check_scores(scores, name):
    arr = np.asarray(scores, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise InvalidInputError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


def candidate_cuts(id_scores, ood_scores):
    """Sentinels plus midpoints between adjacent distinct pooled scores.

    Returns:
        (cuts, margins): margins give each cut's distance to the nearest
        pooled score (infinite for the sentinels).
    """
    pooled = np.unique(np.concatenate([id_scores, ood_scores]))
    lo, hi = pooled[:-1], pooled[1:]
    with np.errstate(over="ignore"):
        mids = (lo + hi) / 2.0
    # The sum overflows only near the float maximum.
    mids = np.where(np.isfinite(mids), mids, lo / 2.0 + hi / 2.0)
    # Adjacent floats can round the midpoint up onto hi.
    mids = np.where(mids >= hi, lo, mids)
    cuts = np.concatenate([[-np.inf], mids, [np.inf]])
    margins = np.concatenate([[np.inf], (hi - lo) / 2.0, [np.inf]])
    return cuts, margins


def fit_threshold(id_scores, ood_scores, metric=MetricKind.DIFFERENTIAL_ENTROPY):
    """Cut maximizing TPR - FPR over oriented validation scores.

    Ties are broken toward the widest gap between pooled scores, and then
    toward the lowest cut.

    Raises:
        InvalidInputError: on empty or non-finite input.
    """
    ids = _check_scores(id_scores, "id_scores")
    oods = _check_scores(ood_scores, "ood_scores")
    cuts, margins = candidate_cuts(ids, oods)
    ids_sorted = np.sort(ids)
    oods_sorted = np.sort(oods)
    tp = ids.size - np.searchsorted(ids_sorted, cuts, side="right")
    fp = oods.size - np.searchsorted(oods_sorted, cuts, side="right")
    # Compare in integers: J * n_id * n_ood.
    score = tp.astype(np.int64) * oods.size - fp.astype(np.int64) * ids.size
    best = score == score.max()
    widest = margins[best].max()
    idx = np.flatnonzero(best & (margins == widest))[0]
    return CalibratedThreshold(
        metric=MetricKind.parse(metric),
        cut=float(cuts[idx]),
        n_id=int(ids.size),
        n_ood=int(oods.size),
        tpr=float(tp[idx] / ids.size),
        fpr=float(fp[idx] / oods.size),
    )


@dataclass(frozen=True)
class AbstentionDecision:
    """retained is True exactly when margin > 0; fields may be arrays."""

    retained: object
    margin: object


def _check_metric(metric, thr):
    metric = MetricKind.parse(metric)
    if metric is not thr.metric:
        raise ConfigError(f"threshold was fitted on {thr.metric.value}, not {metric.value}")
    return metric


def decide(raw_score, metric, thr):
    """Retain or abstain on raw (unoriented) scores."""
    metric = _check_metric(metric, thr)
    margin = np.asarray(orient(raw_score, metric)) - thr.cut
    retained = margin > 0
    if margin.ndim == 0:
        return AbstentionDecision(retained=bool(retained), margin=float(margin))
    return AbstentionDecision(retained=retained, margin=margin)


def delta_summary(raw_scores, metric, thr):
    """Mean oriented score minus the cut over every sample."""
    metric = _check_metric(metric, thr)
    arr = np.asarray(raw_scores, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise InvalidInputError("scores must be nonempty")
    return float(np.mean(orient(arr, metric) - thr.cut))


def coverage(raw_scores, metric, thr):
    """Fraction of samples retained."""
    return float(np.mean(decide(np.asarray(raw_scores).reshape(-1), metric, thr).retained))
