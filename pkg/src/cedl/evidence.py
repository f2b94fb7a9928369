"""Dirichlet evidence arithmetic and the three uncertainty scores.

Concentration vectors ("alpha") are plain float64 arrays whose last axis
holds the K class concentrations; every function broadcasts over any
leading batch axes.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidInputError
from .special import digamma, log_gamma


class Orientation(enum.Enum):
    HIGHER_MEANS_UNCERTAIN = "higher-means-uncertain"
    HIGHER_MEANS_CONFIDENT = "higher-means-confident"


class MetricKind(enum.Enum):
    """Scoring metric used for ID/OOD abstention thresholds."""

    DIFFERENTIAL_ENTROPY = "diff-entropy"
    TOTAL_EVIDENCE = "total-evidence"
    MUTUAL_INFORMATION = "mutual-info"

    @property
    def orientation(self):
        if self is MetricKind.TOTAL_EVIDENCE:
            return Orientation.HIGHER_MEANS_CONFIDENT
        return Orientation.HIGHER_MEANS_UNCERTAIN

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown metric {value!r} (expected one of {names})") from None


def check_alpha(alpha):
    """Validate and return alpha as a float64 array with K >= 2 on the last axis."""
    arr = np.asarray(alpha, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise InvalidInputError("alpha needs at least two classes on its last axis")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("alpha contains non-finite values")
    if np.any(arr <= 0.0):
        raise InvalidInputError("alpha entries must be strictly positive")
    return arr


@dataclass(frozen=True)
class EvidentialSummary:
    """Strength, belief masses, uncertainty mass and expected probabilities."""

    strength: np.ndarray
    belief: np.ndarray
    uncertainty: np.ndarray
    expected_prob: np.ndarray


def summarize(alpha):
    """Subjective-logic summary of one or many Dirichlet parameter vectors.

    b_k = (alpha_k - 1) / S, u = K / S and E[p_k] = alpha_k / S with
    S = sum_k alpha_k.  Decayed parameters may be below 1, in which case
    b_k is negative; no clamping is applied.
    """
    a = check_alpha(alpha)
    k = a.shape[-1]
    s = a.sum(axis=-1, keepdims=True)
    return EvidentialSummary(
        strength=s[..., 0],
        belief=(a - 1.0) / s,
        uncertainty=k / s[..., 0],
        expected_prob=a / s,
    )


def total_evidence(alpha):
    """Dirichlet strength S = sum_k alpha_k (higher means more confident)."""
    return check_alpha(alpha).sum(axis=-1)


def differential_entropy(alpha):
    """Entropy of Dir(alpha): ln B(alpha) - sum_k (alpha_k - 1)(psi(alpha_k) - psi(S))."""
    a = check_alpha(alpha)
    s = a.sum(axis=-1)
    return (
        log_gamma(a).sum(axis=-1)
        - log_gamma(s)
        - ((a - 1.0) * (digamma(a) - np.asarray(digamma(s))[..., None])).sum(axis=-1)
    )


def mutual_information(alpha):
    """Epistemic part of the predictive entropy of Dir(alpha).

    Predictive entropy H[E p] minus expected entropy E[H(p)], in closed form.
    """
    a = check_alpha(alpha)
    s = a.sum(axis=-1, keepdims=True)
    m = a / s
    inner = np.log(m) - digamma(a + 1.0) + digamma(s + 1.0)
    return -(m * inner).sum(axis=-1)


_METRICS = {
    MetricKind.DIFFERENTIAL_ENTROPY: differential_entropy,
    MetricKind.TOTAL_EVIDENCE: total_evidence,
    MetricKind.MUTUAL_INFORMATION: mutual_information,
}


def score(alpha, kind):
    """Raw value of the chosen metric; orientation is handled by calibration."""
    kind = MetricKind.parse(kind)
    return _METRICS[kind](alpha)
