"""White-box gradient attacks and salt-and-pepper corruption.

Gradient attacks differentiate the evidential loss (KL weight 0) with
respect to the input.  MAXIMIZE_LOSS ascends it for a true label and
disrupts in-distribution predictions; MAXIMIZE_CONFIDENCE descends it for
the model's own argmax, which inflates evidence and disguises
out-of-distribution inputs as in-distribution.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


class AttackKind(enum.Enum):
    FGSM = "fgsm"
    L2PGD = "l2pgd"
    SALT_PEPPER = "saltpepper"


class Objective(enum.Enum):
    MAXIMIZE_LOSS = "max-loss"
    MAXIMIZE_CONFIDENCE = "max-confidence"


@dataclass(frozen=True)
class AttackSpec:
    """Attack configuration.

    epsilon is the L-infinity step for FGSM, the L2 radius for L2PGD and
    the corrupted-pixel fraction for salt-and-pepper.  step_size defaults
    to 2.5 * epsilon / steps.
    """

    kind: AttackKind = AttackKind.L2PGD
    epsilon: float = 1.0
    steps: int = 10
    step_size: float = None
    objective: Objective = Objective.MAXIMIZE_CONFIDENCE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "objective", Objective(self.objective))
        if self.epsilon < 0:
            raise InvalidInputError("epsilon must be non-negative")
        if self.kind is AttackKind.L2PGD and self.steps < 1:
            raise InvalidInputError("L2PGD needs at least one step")
        if self.kind is AttackKind.SALT_PEPPER and self.epsilon > 1:
            raise InvalidInputError("salt-and-pepper fraction must lie in [0, 1]")
        if self.step_size is None:
            object.__setattr__(self, "step_size", 2.5 * self.epsilon / max(self.steps, 1))

    @property
    def direction(self):
        return 1.0 if self.objective is Objective.MAXIMIZE_LOSS else -1.0


def _batch(x, net):
    """Reshape one input or a stack of inputs to (N, D)."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.size % net.input_dim:
        raise InvalidInputError(f"input size {x.size} incompatible with {net.input_dim} features")
    return x.reshape(-1, net.input_dim)


def _labels(y_ref, n):
    y = np.atleast_1d(np.asarray(y_ref)).astype(int)
    if y.shape != (n,):
        raise InvalidInputError(f"need {n} reference labels, got shape {y.shape}")
    return y


def fgsm(net, x, y_ref, spec):
    """One signed-gradient step of size epsilon, clamped to [0, 1]."""
    x2 = _batch(x, net)
    y = _labels(y_ref, x2.shape[0])
    if spec.epsilon == 0:
        return np.array(x, dtype=np.float64, copy=True)
    g = net.input_gradient(x2, y, kl_weight=0.0)
    adv = np.clip(x2 + spec.direction * spec.epsilon * np.sign(g), 0.0, 1.0)
    return _within_linf(adv, x2, spec.epsilon).reshape(np.shape(x))


def _within_linf(adv, x, eps):
    # x + eps can round so that (x + eps) - x exceeds eps by an ulp.
    adv = adv.copy()
    over = np.abs(adv - x) > eps
    while over.any():
        adv[over] = np.nextafter(adv[over], x[over])
        over = np.abs(adv - x) > eps
    return adv


def project_l2(x_adv, x, radius):
    """Project each row of x_adv onto the L2 ball of the given radius around x."""
    d = x_adv - x
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    scale = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
    return x + d * scale


def l2pgd(net, x, y_ref, spec, trace=None):
    """Projected gradient steps along the normalized input gradient.

    Each iterate is projected onto the L2 ball of radius epsilon around x
    and then clamped to [0, 1]; clamping onto the box cannot increase the
    distance to x because x itself lies in the box.

    Args:
        trace: optional list that receives a copy of every iterate.
    """
    if spec.steps < 1:
        raise InvalidInputError("L2PGD needs at least one step")
    x2 = _batch(x, net)
    y = _labels(y_ref, x2.shape[0])
    if spec.epsilon == 0:
        return np.array(x, dtype=np.float64, copy=True)
    adv = x2.copy()
    for _ in range(spec.steps):
        g = net.input_gradient(adv, y, kl_weight=0.0)
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        unit = np.where(norms > 0, g / np.where(norms > 0, norms, 1.0), 0.0)
        adv = adv + spec.direction * spec.step_size * unit
        adv = np.clip(project_l2(adv, x2, spec.epsilon), 0.0, 1.0)
        if trace is not None:
            trace.append(adv.reshape(np.shape(x)).copy())
    return adv.reshape(np.shape(x))


def salt_pepper(x, spec, rng):
    """Set round(epsilon * pixels) distinct pixels of each image to 0 or 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return _salt_pepper_one(x, spec.epsilon, rng)
    return np.stack([_salt_pepper_one(img, spec.epsilon, rng) for img in x])


def _salt_pepper_one(img, fraction, rng):
    out = img.copy()
    flat = out.reshape(-1)
    count = int(round(fraction * flat.size))
    if count:
        idx = rng.choice(flat.size, size=count, replace=False)
        flat[idx] = rng.integers(0, 2, size=count).astype(np.float64)
    return out


def attack(net, x, y_ref, spec, rng=None):
    """Dispatch on spec.kind.  rng is only used by salt-and-pepper."""
    if spec.kind is AttackKind.FGSM:
        return fgsm(net, x, y_ref, spec)
    if spec.kind is AttackKind.L2PGD:
        return l2pgd(net, x, y_ref, spec)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    return salt_pepper(x, spec, rng)
