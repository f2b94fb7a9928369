"""Conflict scoring over multi-view evidence and evidence decay.

An evidence set is an array of shape (..., T, K): T Dirichlet parameter
vectors, one per view of the same input.  All functions broadcast over
the leading batch axes so that a whole cohort can be adjusted at once.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .evidence import EvidentialSummary, summarize

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class ConflictParams:
    """Hyperparameters of the conflict adjustment.

    Attributes:
        beta: sharpness of the inter-class penalty.
        lam: weight of the asymmetry penalty, in [0, 1].  The combined
            score is monotone in both components only for lam <= 0.5.
        delta: decay sensitivity; 0 disables the decay.
        eps: stabilizer in the coefficient-of-variation denominator.
    """

    beta: float = 1.5
    lam: float = 0.5
    delta: float = 1.0
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError(f"beta must be > 0, got {self.beta}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.delta >= 0:
            raise InvalidInputError(f"delta must be >= 0, got {self.delta}")
        if not self.eps > 0:
            raise InvalidInputError(f"eps must be > 0, got {self.eps}")


@dataclass(frozen=True)
class ConflictBreakdown:
    c_intra: np.ndarray
    c_inter: np.ndarray
    c_total: np.ndarray


@dataclass(frozen=True)
class AdjustedPrediction:
    """Aggregated and decayed parameters plus their summary."""

    alpha_bar: np.ndarray
    alpha_tilde: np.ndarray
    summary: EvidentialSummary
    conflict: ConflictBreakdown


def check_evidence_set(rows, min_views=2):
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim < 2:
        raise InvalidInputError("evidence set must have shape (..., T, K)")
    t, k = arr.shape[-2:]
    if t < min_views:
        raise InvalidInputError(f"evidence set needs at least {min_views} views, got {t}")
    if k < 2:
        raise InvalidInputError("evidence set needs at least two classes")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise InvalidInputError("evidence set entries must be finite and positive")
    return arr


def c_intra(rows, eps=DEFAULT_EPS):
    """Mean over classes of the coefficient of variation across views.

    Uses the population standard deviation.  The result is clipped to 1:
    for T >= 3 a population coefficient of variation can reach sqrt(T-1),
    which would push the combined score above its upper bound.
    """
    a = check_evidence_set(rows)
    # Deviations from the first view keep identical views at exactly zero.
    d = a - a[..., :1, :]
    d_mean = d.mean(axis=-2)
    var = ((d - d_mean[..., None, :]) ** 2).mean(axis=-2)
    mu = a[..., 0, :] + d_mean
    ratio = np.sqrt(var) / (mu + eps)
    return np.minimum(ratio.mean(axis=-1), 1.0)


def _pair_pressure(a):
    """Per-view sum over k < j of ((min/max) * (min/S) * 2)^2."""
    k = a.shape[-1]
    s = a.sum(axis=-1)[..., None, None]
    lo = np.minimum(a[..., :, None], a[..., None, :])
    hi = np.maximum(a[..., :, None], a[..., None, :])
    term = (lo / hi) * (lo / s) * 2.0
    upper = np.triu(np.ones((k, k), dtype=bool), 1)
    return np.where(upper, term * term, 0.0).sum(axis=(-2, -1))


def _c_inter_views(rows, beta):
    """Inter-class conflict for any T >= 1 (single-view case is test-only)."""
    a = check_evidence_set(rows, min_views=1)
    # -expm1 keeps tiny conflicts strictly positive instead of rounding to 0.
    per_view = -np.expm1(-beta * _pair_pressure(a))
    return per_view.mean(axis=-1)


def c_inter(rows, beta=1.5):
    """Mean over views of 1 - exp(-beta * pairwise support pressure)."""
    if not beta > 0:
        raise InvalidInputError("beta must be > 0")
    check_evidence_set(rows)
    return _c_inter_views(rows, beta)


def combine(inter, intra, lam):
    """Inclusion-exclusion union of the two conflicts minus an asymmetry penalty."""
    inter = np.asarray(inter, dtype=np.float64)
    intra = np.asarray(intra, dtype=np.float64)
    if np.any((inter <= 0.0) | (inter > 1.0)) or np.any(~np.isfinite(inter)):
        raise InvalidInputError("c_inter must lie in (0, 1]")
    if np.any((intra < 0.0) | (intra > 1.0)) or np.any(~np.isfinite(intra)):
        raise InvalidInputError("c_intra must lie in [0, 1]")
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError("lambda must lie in [0, 1]")
    out = inter + intra - inter * intra - lam * (inter - intra) ** 2
    return float(out) if out.ndim == 0 else out


def aggregate(rows):
    """Mean Dirichlet parameters over views."""
    return check_evidence_set(rows).mean(axis=-2)


def conflict(rows, params=ConflictParams()):
    intra = c_intra(rows, params.eps)
    inter = c_inter(rows, params.beta)
    total = combine(inter, intra, params.lam)
    return ConflictBreakdown(c_intra=intra, c_inter=inter, c_total=np.asarray(total))


def adjust(rows, params=ConflictParams()):
    """Aggregate views, score their conflict, and decay the evidence.

    alpha_tilde = alpha_bar * exp(-delta * C); the summary is recomputed
    from alpha_tilde.
    """
    breakdown = conflict(rows, params)
    alpha_bar = aggregate(rows)
    factor = np.exp(-params.delta * breakdown.c_total)
    alpha_tilde = alpha_bar * np.asarray(factor)[..., None]
    return AdjustedPrediction(
        alpha_bar=alpha_bar,
        alpha_tilde=alpha_tilde,
        summary=summarize(alpha_tilde),
        conflict=breakdown,
    )
