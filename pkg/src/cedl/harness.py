"""Train, calibrate and evaluate EDL, EDL++ and C-EDL on synthetic cohorts.

One Experiment owns the cohorts and the trained network for a seed.
Evidence sets, attacked inputs and the calibration epsilon are cached,
so several methods, metrics and hyperparameter sweeps can be evaluated
against the same trained model cheaply.

Per-input work runs in fixed-size chunks, optionally on a thread pool.
Chunk boundaries and per-input random streams do not depend on the
number of workers, so reports are bit-identical for any worker count.
"""

import csv
import dataclasses
import json
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackKind, AttackSpec, Objective, attack
from .calibration import decide, delta_summary, fit_threshold, orient
from .conflict import ConflictParams, adjust, aggregate
from .datagen import FamilyKind, SyntheticFamily, generate, split
from .errors import ConfigError, InvalidInputError, ParseError
from .evidence import MetricKind, score
from .net import EvidentialNet, NetConfig, TrainConfig, train
from .views import TransformSpec, ViewMode, input_rng, make_views_batch, metamorphic_views

CHUNK = 64

CSV_COLUMNS = (
    "method", "metric", "attack", "epsilon", "id_acc", "id_cov", "ood_cov", "adv_cov",
    "delta_id", "delta_ood", "delta_adv", "seed", "wall_ms",
)

ABLATION_AXES = ("beta", "lambda", "delta", "T", "dropout", "transform")

COHORTS = ("id_train", "id_val", "id_test", "ood_val", "ood_test")


# --- methods ------------------------------------------------------------------

@dataclass(frozen=True)
class MethodKind:
    """base is "edl", "edlpp" or "cedl"; mode is None for plain EDL."""

    base: str
    mode: ViewMode = None

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        if text == "edl":
            return cls("edl")
        base, _, mode = str(text).partition("-")
        if base in ("edlpp", "cedl") and mode in ("meta", "mc"):
            return cls(base, ViewMode(mode))
        raise ConfigError(
            f"unknown method {text!r} (expected edl, edlpp-meta, edlpp-mc, cedl-meta or cedl-mc)"
        )

    @property
    def name(self):
        return "edl" if self.mode is None else f"{self.base}-{self.mode.value}"

    def __str__(self):
        return self.name


METHODS = tuple(MethodKind.parse(m) for m in ("edl", "edlpp-meta", "edlpp-mc", "cedl-meta", "cedl-mc"))


def _chunks(n, chunk=CHUNK):
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def _map_chunks(fn, n, workers=1):
    """Apply fn(lo, hi) to fixed chunks of range(n) and concatenate in order."""
    spans = _chunks(n)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: fn(*s), spans))
    else:
        parts = [fn(lo, hi) for lo, hi in spans]
    return np.concatenate(parts) if parts else None


def evidence_sets(images, spec, net, seed, workers=1):
    """(N, T, K) evidence sets, chunked; identical for any worker count."""
    images = np.asarray(images, dtype=np.float64)
    if images.shape[0] == 0:
        return np.zeros((0, spec.T, net.num_classes))
    return _map_chunks(
        lambda lo, hi: make_views_batch(images[lo:hi], spec, net, seed=seed, start_index=lo),
        images.shape[0], workers,
    )


def predict(method, net, x, spec=None, params=None, seed=0, workers=1):
    """Dirichlet parameters under a method, plus the conflict breakdown for C-EDL.

    Args:
        x: stack of grids (N, H, W).
        spec: view spec; its mode is overridden by the method's mode.
        seed: seeds the per-input view generators.

    Returns:
        (alpha, breakdown) where breakdown is None except for C-EDL.
    """
    method = MethodKind.parse(method)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise InvalidInputError("predict expects a stack of grids (N, H, W)")
    if method.mode is None:
        flat = x.reshape(x.shape[0], -1)
        return _map_chunks(lambda lo, hi: net.forward(flat[lo:hi]), x.shape[0], workers), None
    spec = (spec or TransformSpec()).with_(mode=method.mode)
    ev = evidence_sets(x, spec, net, seed, workers)
    return combine_views(method, ev, params)


def combine_views(method, ev, params=None):
    if method.base == "edlpp":
        return aggregate(ev), None
    adj = adjust(ev, params or ConflictParams())
    return adj.alpha_tilde, adj.conflict


# --- configuration ------------------------------------------------------------

def _default_eps_grid():
    return tuple(round(0.25 * i, 2) for i in range(1, 17))


@dataclass
class ExperimentConfig:
    """Everything that defines one seeded run.

    epsilon=None means "calibrate": the smallest value on eps_grid at
    which a loss-maximizing L2PGD attack lowers ID validation accuracy by
    at least efficacy_drop.
    """

    seed: int = 0
    method: str = "cedl-meta"
    metric: str = "diff-entropy"
    # data
    id_family: str = "bars"
    ood_family: str = "crosses"
    K: int = 4
    size: int = 16
    n_per_class: int = 700
    ood_per_class: int = 50
    split_fractions: tuple = (0.72, 0.14, 0.14)
    # network and training
    hidden: tuple = (16,)
    train_dropout: float = 0.25
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 3e-3
    anneal_epochs: int = 10
    n_augment: int = 3
    # views and conflict
    T: int = 5
    rotate_max_deg: float = 15.0
    shift_max_px: int = 2
    noise_sigma: float = 0.01
    dropout: float = 0.25
    beta: float = 1.5
    lam: float = 0.5
    delta: float = 1.0
    # attack
    attack: str = "l2pgd"
    epsilon: float = None
    steps: int = 10
    eps_grid: tuple = field(default_factory=_default_eps_grid)
    efficacy_drop: float = 0.2
    adv_cohort: str = "ood"
    calibrate_with: str = "method"
    workers: int = 1

    def __post_init__(self):
        for name in ("split_fractions", "hidden", "eps_grid"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        MethodKind.parse(self.method)
        MetricKind.parse(self.metric)
        for name in ("id_family", "ood_family"):
            try:
                FamilyKind(getattr(self, name))
            except ValueError:
                raise ConfigError(f"unknown {name} {getattr(self, name)!r}") from None
        if not FamilyKind(self.id_family).is_id:
            raise ConfigError("id_family must be an in-distribution family (bars or blobs)")
        try:
            AttackKind(self.attack)
        except ValueError:
            raise ConfigError(f"unknown attack {self.attack!r} (expected l2pgd, fgsm or saltpepper)") from None
        if self.adv_cohort not in ("ood", "both"):
            raise ConfigError("adv_cohort must be 'ood' or 'both'")
        if self.calibrate_with not in ("method", "edl"):
            raise ConfigError("calibrate_with must be 'method' or 'edl'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        try:
            self.conflict_params()
            self.view_spec(ViewMode.METAMORPHIC)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from None
        if not 0.0 <= self.dropout < 1.0 or not 0.0 <= self.train_dropout < 1.0:
            raise ConfigError("dropout rates must lie in [0, 1)")

    def conflict_params(self):
        return ConflictParams(beta=self.beta, lam=self.lam, delta=self.delta)

    def view_spec(self, mode):
        return TransformSpec(
            rotate_max_deg=self.rotate_max_deg, shift_max_px=self.shift_max_px,
            noise_sigma=self.noise_sigma, T=self.T, mode=mode, seed=self.seed,
        )

    def to_dict(self):
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(d)

    def with_(self, **changes):
        return dataclasses.replace(self, **changes)


# --- report -------------------------------------------------------------------

def _json_num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return v


def _num_from_json(v):
    if v is None:
        return math.nan
    if isinstance(v, str):
        return float(v)
    return float(v)


@dataclass
class CoverageReport:
    """Coverage, accuracy and margin diagnostics for one method on one run.

    id_acc is accuracy over retained ID test inputs (NaN if none are
    retained).  wall_ms is the mean per-input inference time, recorded
    only for timed runs and 0.0 otherwise.
    """

    method: str
    metric: str
    attack: str
    epsilon: float
    id_acc: float
    id_cov: float
    ood_cov: float
    adv_cov: float
    delta_id: float
    delta_ood: float
    delta_adv: float
    seed: int
    wall_ms: float = 0.0
    cut: float = 0.0
    n_id: int = 0
    n_ood: int = 0
    n_adv: int = 0
    config: dict = field(default_factory=dict)

    _FLOATS = ("epsilon", "id_acc", "id_cov", "ood_cov", "adv_cov", "delta_id", "delta_ood",
               "delta_adv", "wall_ms", "cut")

    def to_dict(self):
        d = dataclasses.asdict(self)
        for k in self._FLOATS:
            d[k] = _json_num(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        missing = [c for c in CSV_COLUMNS if c not in d]
        if missing:
            raise ParseError(f"report is missing fields {missing}")
        kw = {k: v for k, v in d.items() if k in names}
        for k in cls._FLOATS:
            if k in kw:
                kw[k] = _num_from_json(kw[k])
        return cls(**kw)

    def csv_row(self):
        d = dataclasses.asdict(self)
        return [_csv_cell(d[c]) for c in CSV_COLUMNS]


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(reports, fmt, path):
    """Write one report or a list of reports as CSV (long format) or JSON.

    Raises:
        OSError: with the path in its message if the file cannot be written.
    """
    if isinstance(reports, CoverageReport):
        reports = [reports]
        single = True
    else:
        reports = list(reports)
        single = False
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fmt == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for r in reports:
                    writer.writerow(r.csv_row())
            else:
                payload = reports[0].to_dict() if single else [r.to_dict() for r in reports]
                json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
                fh.write("\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", str(path)) from None


def load_reports(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read report: {exc.strerror}", path=path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, offset=exc.pos, line=exc.lineno) from None
    items = d if isinstance(d, list) else [d]
    try:
        return [CoverageReport.from_dict(x) for x in items]
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None


# --- experiment -----------------------------------------------------------------

def make_cohorts(cfg):
    """ID train/val/test splits plus OOD validation and test sets."""
    rng = np.random.default_rng([cfg.seed, 1])
    fam = SyntheticFamily(kind=cfg.id_family, K=cfg.K, size=cfg.size, seed=cfg.seed)
    ds = generate(fam, cfg.n_per_class, rng)
    id_train, id_val, id_test = split(ds, cfg.split_fractions, rng)
    ood = fam.with_(kind=cfg.ood_family)
    ood_val = generate(ood, cfg.ood_per_class, rng)
    ood_test = generate(ood, cfg.ood_per_class, rng)
    return {
        "id_train": id_train,
        "id_val": id_val,
        "id_test": id_test,
        "ood_val": dataclasses.replace(ood_val, split="val"),
        "ood_test": dataclasses.replace(ood_test, split="test"),
    }


def augment(images, labels, n_copies, spec, rng):
    """Originals followed by n_copies transformed copies of every image."""
    views = [images]
    for _ in range(n_copies):
        views.append(np.stack([metamorphic_views(img, spec.with_(T=2), rng)[0] for img in images]))
    return np.concatenate(views), np.tile(labels, n_copies + 1)


def train_net(cfg, data):
    """Train the base evidential network on augmented ID training data."""
    rng = np.random.default_rng([cfg.seed, 2])
    tr, va = data["id_train"], data["id_val"]
    x, y = augment(tr.images, tr.labels, cfg.n_augment, TransformSpec(seed=cfg.seed), rng)
    sizes = (cfg.size * cfg.size,) + tuple(cfg.hidden) + (cfg.K,)
    net = EvidentialNet(NetConfig(sizes, cfg.train_dropout, cfg.seed))
    tcfg = TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate, anneal_epochs=cfg.anneal_epochs,
    )
    log = train(net, x.reshape(x.shape[0], -1), y, tcfg, rng, va.flat(), va.labels)
    return net, log


def calibrate_epsilon(net, images, labels, grid, min_drop, steps=10, workers=1):
    """Smallest grid epsilon whose loss-maximizing L2PGD drops accuracy by min_drop.

    Returns:
        (epsilon, drop); the largest grid value if none is strong enough.
    """
    flat = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
    clean = np.mean(net.predict(flat) == labels)
    drop = 0.0
    for eps in grid:
        spec = AttackSpec(AttackKind.L2PGD, eps, steps, objective=Objective.MAXIMIZE_LOSS)
        adv = _map_chunks(lambda lo, hi: attack(net, flat[lo:hi], labels[lo:hi], spec), flat.shape[0], workers)
        drop = clean - np.mean(net.predict(adv) == labels)
        if drop >= min_drop:
            return float(eps), float(drop)
    return float(grid[-1]), float(drop)


def _cohort_seed(seed, cohort):
    return (int(seed) << 32) | zlib.crc32(cohort.encode("ascii"))


class Experiment:
    """Cohorts, a trained network and caches for one seeded configuration."""

    def __init__(self, cfg, net=None, data=None):
        self.cfg = cfg
        self.data = data if data is not None else make_cohorts(cfg)
        missing = [c for c in COHORTS if c not in self.data]
        if missing:
            raise ConfigError(f"missing cohorts: {', '.join(missing)}")
        self.train_log = None
        if net is None:
            net, self.train_log = train_net(cfg, self.data)
        self.net = net
        self._ev = {}
        self._adv = {}
        self._eps0 = None

    # cached pieces

    @property
    def epsilon0(self):
        """Calibration epsilon, derived from attack efficacy on ID validation data."""
        if self._eps0 is None:
            va = self.data["id_val"]
            self._eps0 = calibrate_epsilon(
                self.net, va.images, va.labels, self.cfg.eps_grid, self.cfg.efficacy_drop,
                self.cfg.steps, self.cfg.workers,
            )
        return self._eps0[0]

    def attack_spec(self, epsilon=None, kind=None):
        kind = AttackKind(kind or self.cfg.attack)
        eps = self.cfg.epsilon if epsilon is None else epsilon
        if eps is None:
            if kind is not AttackKind.L2PGD:
                raise ConfigError(f"{kind.value} needs an explicit epsilon")
            eps = self.epsilon0
        return AttackSpec(
            kind=kind, epsilon=eps, steps=self.cfg.steps,
            objective=Objective.MAXIMIZE_CONFIDENCE, seed=self.cfg.seed,
        )

    def attacked(self, spec):
        """Attacked copy of the OOD test cohort (plus attacked ID test if configured)."""
        key = (spec.kind, spec.epsilon, spec.steps, spec.objective)
        if key not in self._adv:
            ood = self.data["ood_test"].images
            imgs = self._attack_cohort(ood, spec, None, "ood_test")
            if self.cfg.adv_cohort == "both":
                idt = self.data["id_test"]
                id_spec = dataclasses.replace(spec, objective=Objective.MAXIMIZE_LOSS)
                imgs = np.concatenate([imgs, self._attack_cohort(idt.images, id_spec, idt.labels, "id_test")])
            self._adv[key] = imgs
        return self._adv[key]

    def _attack_cohort(self, images, spec, labels, cohort):
        n = images.shape[0]
        flat = images.reshape(n, -1)
        if labels is None:
            labels = self.net.predict(flat)
        if spec.kind is AttackKind.SALT_PEPPER:
            seed = _cohort_seed(spec.seed, cohort)
            out = np.stack([attack(self.net, images[i], None, spec, input_rng(seed, i)) for i in range(n)])
            return out
        out = _map_chunks(lambda lo, hi: attack(self.net, flat[lo:hi], labels[lo:hi], spec), n, self.cfg.workers)
        return out.reshape(images.shape)

    def _net_for(self, mode, dropout):
        if mode is ViewMode.MC_DROPOUT:
            return self.net.copy(dropout_rate=dropout)
        return self.net

    def _evidence(self, cohort, images, spec, dropout):
        key = (cohort, spec, dropout if spec.mode is ViewMode.MC_DROPOUT else None)
        if key not in self._ev:
            # Views of an attacked input reuse the clean input's generator.
            seed_name = "ood_test" if cohort.startswith("adv") else cohort
            net = self._net_for(spec.mode, dropout)
            self._ev[key] = evidence_sets(images, spec, net, _cohort_seed(spec.seed, seed_name), self.cfg.workers)
        return self._ev[key]

    def alphas(self, method, cohort, images, params=None, spec=None, dropout=None):
        method = MethodKind.parse(method)
        if method.mode is None:
            flat = images.reshape(images.shape[0], -1)
            return _map_chunks(lambda lo, hi: self.net.forward(flat[lo:hi]), flat.shape[0], self.cfg.workers)
        spec = (spec or self.cfg.view_spec(method.mode)).with_(mode=method.mode)
        dropout = self.cfg.dropout if dropout is None else dropout
        ev = self._evidence(cohort, images, spec, dropout)
        return combine_views(method, ev, params or self.cfg.conflict_params())[0]

    # evaluation

    def evaluate(self, method=None, metric=None, params=None, spec=None, dropout=None,
                 epsilon=None, attack_kind=None, timed=False, dump_path=None):
        """Calibrate on validation cohorts and score the test cohorts."""
        cfg = self.cfg
        method = MethodKind.parse(method or cfg.method)
        metric = MetricKind.parse(metric or cfg.metric)
        params = params or cfg.conflict_params()
        aspec = self.attack_spec(epsilon, attack_kind)
        adv_images = self.attacked(aspec)
        d = self.data

        def raw(m, cohort, images):
            return score(self.alphas(m, cohort, images, params, spec, dropout), metric)

        cal = method if cfg.calibrate_with == "method" else MethodKind.parse("edl")
        thr = fit_threshold(
            orient(raw(cal, "id_val", d["id_val"].images), metric),
            orient(raw(cal, "ood_val", d["ood_val"].images), metric),
            metric,
        )
        id_alpha = self.alphas(method, "id_test", d["id_test"].images, params, spec, dropout)
        s_id = score(id_alpha, metric)
        s_ood = raw(method, "ood_test", d["ood_test"].images)
        s_adv = raw(method, f"adv:{aspec.kind.value}:{aspec.epsilon!r}:{aspec.steps}", adv_images)

        dec_id = decide(s_id, metric, thr)
        correct = np.argmax(id_alpha, axis=-1) == d["id_test"].labels
        kept = dec_id.retained
        id_acc = float(np.mean(correct[kept])) if kept.any() else math.nan

        wall = self._time_inference(method, params, spec, dropout) if timed else 0.0
        if dump_path is not None:
            dump_decisions(dump_path, thr, metric, {
                "id_test": (s_id, d["id_test"].labels),
                "ood_test": (s_ood, None),
                "adv": (s_adv, None),
            })
        return CoverageReport(
            method=method.name,
            metric=metric.value,
            attack=aspec.kind.value,
            epsilon=float(aspec.epsilon),
            id_acc=id_acc,
            id_cov=float(np.mean(kept)),
            ood_cov=float(np.mean(decide(s_ood, metric, thr).retained)),
            adv_cov=float(np.mean(decide(s_adv, metric, thr).retained)),
            delta_id=delta_summary(s_id, metric, thr),
            delta_ood=delta_summary(s_ood, metric, thr),
            delta_adv=delta_summary(s_adv, metric, thr),
            seed=int(cfg.seed),
            wall_ms=float(wall),
            cut=thr.cut,
            n_id=int(s_id.size),
            n_ood=int(s_ood.size),
            n_adv=int(s_adv.size),
            config=self._echo(method, metric, params, spec, dropout, aspec),
        )

    def threshold(self, method=None, metric=None, params=None, spec=None, dropout=None):
        method = MethodKind.parse(method or self.cfg.method)
        metric = MetricKind.parse(metric or self.cfg.metric)
        d = self.data
        ids = score(self.alphas(method, "id_val", d["id_val"].images, params, spec, dropout), metric)
        oods = score(self.alphas(method, "ood_val", d["ood_val"].images, params, spec, dropout), metric)
        return fit_threshold(orient(ids, metric), orient(oods, metric), metric)

    def _time_inference(self, method, params, spec, dropout):
        """Mean per-input milliseconds to produce alphas for the ID test cohort, uncached."""
        images = self.data["id_test"].images
        spec = (spec or self.cfg.view_spec(method.mode or ViewMode.METAMORPHIC))
        net = self._net_for(method.mode, self.cfg.dropout if dropout is None else dropout)
        start = time.perf_counter()
        predict(method, net, images, spec, params, seed=0, workers=1)
        return 1e3 * (time.perf_counter() - start) / images.shape[0]

    def _echo(self, method, metric, params, spec, dropout, aspec):
        echo = self.cfg.to_dict()
        echo.update(method=method.name, metric=metric.value, beta=params.beta, lam=params.lam,
                    delta=params.delta, attack=aspec.kind.value, epsilon=aspec.epsilon)
        if spec is not None:
            echo.update(T=spec.T, rotate_max_deg=spec.rotate_max_deg,
                        shift_max_px=spec.shift_max_px, noise_sigma=spec.noise_sigma)
        if dropout is not None:
            echo["dropout"] = dropout
        return echo


def dump_decisions(path, thr, metric, cohorts):
    """Per-sample CSV: cohort, index, label, raw score, oriented score, margin, retained."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cohort", "index", "label", "score", "oriented", "margin", "retained"])
        for name, (scores, labels) in cohorts.items():
            oriented = orient(scores, metric)
            dec = decide(scores, metric, thr)
            for i in range(scores.size):
                label = "" if labels is None else int(labels[i])
                w.writerow([name, i, label, repr(float(scores[i])), repr(float(oriented[i])),
                            repr(float(dec.margin[i])), int(dec.retained[i])])


def run_experiment(cfg, net=None, data=None, dump_path=None):
    """Train (unless a network is given), calibrate and evaluate cfg.method."""
    return Experiment(cfg, net=net, data=data).evaluate(dump_path=dump_path)


def ablate(axis, values, cfg, experiment=None, method=None):
    """One timed report per value of a single hyperparameter, all else fixed.

    The network is trained once and shared.  The transform axis scales the
    rotation, shift and noise magnitudes together; dropout changes the
    inference-time MC dropout rate only.

    Raises:
        ConfigError: unknown axis or empty values.
    """
    if axis not in ABLATION_AXES:
        raise ConfigError(f"unknown ablation axis {axis!r} (expected one of {', '.join(ABLATION_AXES)})")
    values = list(values)
    if not values:
        raise ConfigError("ablation needs at least one value")
    exp = experiment or Experiment(cfg)
    base = exp.cfg
    reports = []
    for v in values:
        params = base.conflict_params()
        method_kind = MethodKind.parse(method or base.method)
        spec = base.view_spec(method_kind.mode or ViewMode.METAMORPHIC)
        dropout = None
        try:
            if axis == "beta":
                params = dataclasses.replace(params, beta=float(v))
            elif axis == "lambda":
                params = dataclasses.replace(params, lam=float(v))
            elif axis == "delta":
                params = dataclasses.replace(params, delta=float(v))
            elif axis == "T":
                spec = spec.with_(T=int(v))
            elif axis == "dropout":
                dropout = float(v)
                if not 0.0 <= dropout < 1.0:
                    raise InvalidInputError("dropout must lie in [0, 1)")
            else:
                s = float(v)
                spec = spec.with_(rotate_max_deg=base.rotate_max_deg * s,
                                  shift_max_px=int(round(base.shift_max_px * s)),
                                  noise_sigma=base.noise_sigma * s)
        except InvalidInputError as exc:
            raise ConfigError(f"bad {axis} value {v!r}: {exc}") from None
        reports.append(exp.evaluate(method_kind, params=params, spec=spec, dropout=dropout, timed=True))
    return reports


def sweep_epsilon(exp, methods, eps_values, metric=None, attack_kind=None):
    """Long-format reports, one per (method, epsilon)."""
    return [
        exp.evaluate(m, metric, epsilon=e, attack_kind=attack_kind)
        for m in methods for e in eps_values
    ]
