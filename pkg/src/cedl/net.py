"""A small evidential classifier trained from scratch with numpy.

The network is an MLP with ReLU hidden layers, inverted dropout after
every hidden layer, and a softplus evidence head: alpha = softplus(z) + 1.
Gradients are derived analytically, including the digamma/trigamma terms
of the KL regularizer, so training and input-gradient attacks need no
autodiff framework.
"""

import base64
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError, ShapeError
from .evidence import check_alpha
from .special import digamma, log_gamma, trigamma

WEIGHTS_FORMAT = "cedl-weights"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    """Architecture of an EvidentialNet.

    layer_sizes runs input dim, hidden dims..., K.
    """

    layer_sizes: tuple
    dropout_rate: float = 0.25
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise InvalidInputError("need an input size, at least one hidden layer, and K")
        if any(s < 1 for s in sizes):
            raise InvalidInputError("layer sizes must be positive")
        if sizes[-1] < 2:
            raise InvalidInputError("output size K must be at least 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError("dropout_rate must lie in [0, 1)")

    @property
    def num_classes(self):
        return self.layer_sizes[-1]


def softplus(z):
    return np.logaddexp(0.0, z)


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def one_hot(labels, k):
    labels = np.asarray(labels)
    if labels.ndim != 1 or np.any(labels < 0) or np.any(labels >= k):
        raise InvalidInputError(f"labels must be integers in [0, {k})")
    out = np.zeros((labels.shape[0], k))
    out[np.arange(labels.shape[0]), labels.astype(int)] = 1.0
    return out


def _check_one_hot(y, k):
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != k:
        raise InvalidInputError(f"label has {y.shape[-1]} entries, expected {k}")
    if not (np.all((y == 0.0) | (y == 1.0)) and np.all(y.sum(axis=-1) == 1.0)):
        raise InvalidInputError("label must be one-hot")
    return y


def kl_to_uniform(alpha):
    """KL(Dir(alpha) || Dir(1, ..., 1))."""
    a = check_alpha(alpha)
    s = a.sum(axis=-1)
    k = a.shape[-1]
    return (
        log_gamma(s)
        - math.lgamma(k)
        - log_gamma(a).sum(axis=-1)
        + ((a - 1.0) * (digamma(a) - np.asarray(digamma(s))[..., None])).sum(axis=-1)
    )


def kl_to_uniform_grad(alpha):
    """d KL / d alpha_j = (alpha_j - 1) psi'(alpha_j) - (S - K) psi'(S).

    The digamma terms from the log-gamma derivatives cancel against the
    first-order terms of the expectation, leaving only trigammas.
    """
    a = np.asarray(alpha, dtype=np.float64)
    s = a.sum(axis=-1, keepdims=True)
    k = a.shape[-1]
    return (a - 1.0) * trigamma(a) - (s - k) * np.asarray(trigamma(s))


def _misleading(alpha, y):
    return y + (1.0 - y) * alpha


def edl_loss(alpha, y, kl_weight=0.0, kl_on_misleading=True):
    """Per-sample evidential loss: squared error + variance + weighted KL.

    Args:
        alpha: (..., K) Dirichlet parameters.
        y: (..., K) one-hot labels.
        kl_weight: annealing coefficient in [0, 1].
        kl_on_misleading: regularize y + (1 - y) * alpha (evidence for
            wrong classes only) rather than alpha itself.
    """
    a = check_alpha(alpha)
    y = _check_one_hot(y, a.shape[-1])
    s = a.sum(axis=-1, keepdims=True)
    m = a / s
    loss = ((y - m) ** 2 + m * (1.0 - m) / (s + 1.0)).sum(axis=-1)
    if kl_weight:
        target = _misleading(a, y) if kl_on_misleading else a
        loss = loss + kl_weight * kl_to_uniform(target)
    return loss


def edl_loss_grad(alpha, y, kl_weight=0.0, kl_on_misleading=True):
    """Gradient of edl_loss with respect to alpha, same shape as alpha."""
    a = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    s = a.sum(axis=-1, keepdims=True)
    m = a / s
    # Partial derivatives with S held fixed, then the chain through m = alpha / S.
    g = -2.0 * (y - m) + (1.0 - 2.0 * m) / (s + 1.0)
    var_sum = (m * (1.0 - m)).sum(axis=-1, keepdims=True)
    grad = (g - (g * m).sum(axis=-1, keepdims=True)) / s - var_sum / (s + 1.0) ** 2
    if kl_weight:
        if kl_on_misleading:
            grad = grad + kl_weight * (1.0 - y) * kl_to_uniform_grad(_misleading(a, y))
        else:
            grad = grad + kl_weight * kl_to_uniform_grad(a)
    return grad


@dataclass
class _Cache:
    inputs: list
    pre: list
    masks: list
    logits: np.ndarray


class EvidentialNet:
    """MLP with a non-negative evidence head.

    weights[l] has shape (layer_sizes[l], layer_sizes[l + 1]).
    """

    def __init__(self, config, weights=None, biases=None):
        self.config = config
        sizes = config.layer_sizes
        if weights is None:
            rng = np.random.default_rng(config.seed)
            weights = [
                rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
                for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
            ]
            biases = [np.zeros(n) for n in sizes[1:]]
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise InvalidInputError(f"layer {i} parameters do not match layer_sizes")

    @property
    def num_classes(self):
        return self.config.num_classes

    @property
    def input_dim(self):
        return self.config.layer_sizes[0]

    def params(self):
        """Flat list [W0, b0, W1, b1, ...] of the live parameter arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self, dropout_rate=None):
        cfg = self.config
        if dropout_rate is not None:
            cfg = NetConfig(cfg.layer_sizes, dropout_rate, cfg.seed)
        return EvidentialNet(cfg, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = x.reshape(1, -1) if single else x.reshape(x.shape[0], -1)
        if x2.shape[1] != self.input_dim:
            raise InvalidInputError(f"input has {x2.shape[1]} features, expected {self.input_dim}")
        return x2, single

    def sample_masks(self, n, rng):
        """Inverted-dropout masks for a batch of n inputs."""
        rate = self.config.dropout_rate
        if rate == 0.0:
            return [np.ones((n, size)) for size in self.config.layer_sizes[1:-1]]
        keep = 1.0 - rate
        return [
            (rng.random((n, size)) >= rate) / keep
            for size in self.config.layer_sizes[1:-1]
        ]

    def _run(self, x, masks):
        inputs, pre = [], []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            if i == last:
                return _Cache(inputs, pre, masks, z)
            pre.append(z)
            h = np.maximum(z, 0.0)
            if masks is not None:
                h = h * masks[i]

    def forward(self, x, dropout_active=False, rng=None, masks=None):
        """Dirichlet parameters for one input (D,) or a batch (N, D).

        With dropout_active, masks are drawn from rng unless given
        explicitly (one (N, width) array per hidden layer).
        """
        x2, single = self._as_batch(x)
        if not dropout_active:
            masks = None
        elif masks is None:
            if rng is None:
                raise InvalidInputError("dropout_active requires an explicit generator")
            masks = self.sample_masks(x2.shape[0], rng)
        alpha = softplus(self._run(x2, masks).logits) + 1.0
        return alpha[0] if single else alpha

    def hidden_activations(self, x, dropout_active=False, rng=None):
        """Post-dropout activations of every hidden layer."""
        x2, _ = self._as_batch(x)
        masks = self.sample_masks(x2.shape[0], rng) if dropout_active else None
        cache = self._run(x2, masks)
        return cache.inputs[1:]

    def loss(self, x, labels, kl_weight=0.0, kl_on_misleading=True, masks=None):
        """Mean evidential loss over a batch with integer labels."""
        x2, _ = self._as_batch(x)
        y = one_hot(np.atleast_1d(labels), self.num_classes)
        alpha = softplus(self._run(x2, masks).logits) + 1.0
        return float(edl_loss(alpha, y, kl_weight, kl_on_misleading).mean())

    def _backward(self, x2, y, kl_weight, kl_on_misleading, masks):
        cache = self._run(x2, masks)
        z = cache.logits
        alpha = softplus(z) + 1.0
        n = x2.shape[0]
        loss = float(edl_loss(alpha, y, kl_weight, kl_on_misleading).mean())
        dz = edl_loss_grad(alpha, y, kl_weight, kl_on_misleading) * sigmoid(z) / n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = cache.inputs[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            dh = dz @ self.weights[i].T
            if i == 0:
                return loss, grads_w, grads_b, dh
            if masks is not None:
                dh = dh * masks[i - 1]
            dz = dh * (cache.pre[i - 1] > 0.0)

    def backward(self, x, labels, kl_weight=0.0, kl_on_misleading=True, masks=None):
        """Loss and exact gradients of the batch-mean loss.

        Returns:
            (loss, grads) where grads is the flat list [dW0, db0, dW1, ...]
            aligned with params().
        """
        x2, _ = self._as_batch(x)
        y = one_hot(np.atleast_1d(labels), self.num_classes)
        loss, gw, gb, _ = self._backward(x2, y, kl_weight, kl_on_misleading, masks)
        grads = []
        for w, b in zip(gw, gb):
            grads.extend((w, b))
        return loss, grads

    def input_gradient(self, x, labels, kl_weight=0.0):
        """Gradient of each sample's own loss with respect to its input.

        Dropout is off.  The result has the shape of x.
        """
        x = np.asarray(x, dtype=np.float64)
        x2, _ = self._as_batch(x)
        y = one_hot(np.atleast_1d(labels), self.num_classes)
        _, _, _, dh = self._backward(x2, y, kl_weight, True, None)
        # _backward differentiates the batch mean; undo the 1/N.
        return (dh * x2.shape[0]).reshape(x.shape)

    def predict(self, x):
        return np.argmax(self.forward(x), axis=-1)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    anneal_epochs: int = 10
    plateau_patience: int = 5
    lr_floor: float = 1e-8
    lr_decay_factor: float = 0.5
    plateau_tol: float = 1e-6
    kl_on_misleading: bool = True
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


def kl_schedule(epoch, anneal_epochs):
    """KL weight for a 1-indexed epoch: linear ramp reaching 1 at anneal_epochs."""
    if anneal_epochs <= 0:
        return 1.0
    return min(1.0, epoch / anneal_epochs)


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    def append(self, epoch, train_loss, val_loss, lr, kl_weight):
        self.rows.append(
            {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss,
             "lr": lr, "kl_weight": kl_weight}
        )

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_csv(self, path):
        fields = ["epoch", "train_loss", "val_loss", "lr", "kl_weight"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(net, x, labels, cfg=None, rng=None, x_val=None, y_val=None):
    """Minibatch Adam with KL annealing and reduce-on-plateau.

    The plateau monitor uses the validation loss when a validation set is
    given, otherwise the epoch's mean training loss.  Parameters are
    updated in place.

    Returns:
        TrainingLog with one row per epoch.
    """
    cfg = cfg or TrainConfig()
    if len(x) == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    labels = np.asarray(labels)
    if labels.shape[0] != x.shape[0]:
        raise InvalidInputError("inputs and labels differ in length")
    if rng is None:
        rng = np.random.default_rng(net.config.seed)
    have_val = x_val is not None and len(x_val) > 0
    if have_val:
        x_val = np.asarray(x_val, dtype=np.float64).reshape(len(x_val), -1)

    params = net.params()
    opt = Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    log = TrainingLog()
    best = math.inf
    wait = 0
    n = x.shape[0]
    use_dropout = net.config.dropout_rate > 0.0
    for epoch in range(1, cfg.epochs + 1):
        klw = kl_schedule(epoch, cfg.anneal_epochs)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            masks = net.sample_masks(len(idx), rng) if use_dropout else None
            loss, grads = net.backward(x[idx], labels[idx], klw, cfg.kl_on_misleading, masks)
            opt.step(params, grads)
            total += loss * len(idx)
        train_loss = total / n
        val_loss = net.loss(x_val, y_val, klw, cfg.kl_on_misleading) if have_val else None
        log.append(epoch, train_loss, val_loss, opt.lr, klw)

        monitored = val_loss if have_val else train_loss
        if monitored < best - cfg.plateau_tol:
            best = monitored
            wait = 0
        else:
            wait += 1
            if wait >= cfg.plateau_patience:
                opt.lr = max(opt.lr * cfg.lr_decay_factor, cfg.lr_floor)
                wait = 0
    return log


def _encode(arr):
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def save_weights(net, path):
    """Write a JSON header plus base64 little-endian float64 parameter blobs."""
    cfg = net.config
    doc = {
        "format": WEIGHTS_FORMAT,
        "version": WEIGHTS_VERSION,
        "layer_sizes": list(cfg.layer_sizes),
        "dropout_rate": cfg.dropout_rate,
        "seed": cfg.seed,
        "layers": [{"W": _encode(w), "b": _encode(b)} for w, b in zip(net.weights, net.biases)],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _decode(blob, expected, path, what):
    try:
        raw = base64.b64decode(blob, validate=True)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{what}: invalid base64 ({exc})", path=path) from None
    if len(raw) % 8:
        raise ParseError(f"{what}: payload of {len(raw)} bytes is not a float64 array", path=path)
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if arr.size != expected:
        raise ShapeError(f"{what}: header implies {expected} values, payload has {arr.size}", path=path)
    return arr


def load_weights(path):
    """Inverse of save_weights; the round trip is bit-exact."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, offset=exc.pos, line=exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("format") != WEIGHTS_FORMAT:
        raise ParseError("not a weights file (missing format tag)", path=path)
    if doc.get("version") != WEIGHTS_VERSION:
        raise ParseError(f"unsupported weights version {doc.get('version')!r}", path=path)
    try:
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        cfg = NetConfig(sizes, float(doc["dropout_rate"]), int(doc["seed"]))
        layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed header: {exc}", path=path) from None
    if len(layers) != len(sizes) - 1:
        raise ShapeError(
            f"header declares {len(sizes) - 1} layers, file has {len(layers)}", path=path
        )
    weights, biases = [], []
    for i, layer in enumerate(layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        weights.append(_decode(layer["W"], fan_in * fan_out, path, f"layer {i} W").reshape(fan_in, fan_out))
        biases.append(_decode(layer["b"], fan_out, path, f"layer {i} b"))
    return EvidentialNet(cfg, weights, biases)
