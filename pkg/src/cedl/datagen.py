"""Synthetic grid-image families, stratified splits and dataset files.

In-distribution families (Bars, Blobs) place their K classes at least
45 degrees apart around the grid center, so rotations of up to 15 degrees
and small shifts never change the label.  The out-of-distribution
families reuse the same ink budget in shapes no class produces.
"""

import enum
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError, ParseError, ShapeError

DATASET_MAGIC = b"CEDL-DATASET"
DATASET_VERSION = 1
_HEADER = struct.Struct("<12sI")
_DIMS = struct.Struct("<4I")

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


class FamilyKind(enum.Enum):
    BARS = "bars"
    BLOBS = "blobs"
    CROSSES_OOD = "crosses"
    RINGS_OOD = "rings"
    NEAR_OOD = "near"

    @property
    def is_id(self):
        return self in (FamilyKind.BARS, FamilyKind.BLOBS)


@dataclass(frozen=True)
class SyntheticFamily:
    """Rendering parameters for one family.

    Attributes:
        angle_jitter_deg: uniform orientation jitter per sample.
        offset_jitter: uniform sub-pixel displacement of the shape center.
        thickness: full stroke width in pixels, jittered by +-thickness_jitter.
        intensity: (low, high) range of the stroke's peak value.
        noise_sigma: additive pixel noise before clamping to [0, 1].
    """

    kind: FamilyKind = FamilyKind.BARS
    K: int = 4
    size: int = 16
    angle_jitter_deg: float = 4.0
    offset_jitter: float = 0.5
    thickness: float = 2.0
    thickness_jitter: float = 0.25
    intensity: tuple = (0.85, 1.0)
    noise_sigma: float = 0.03
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        object.__setattr__(self, "intensity", tuple(self.intensity))
        if self.K < 2:
            raise InvalidInputError("K must be at least 2")
        if self.size < 4:
            raise InvalidInputError("grid size must be at least 4")
        lo, hi = self.intensity
        if not 0.0 <= lo <= hi <= 1.0:
            raise InvalidInputError("intensity range must satisfy 0 <= low <= high <= 1")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class LabeledDataset:
    images: np.ndarray
    labels: np.ndarray
    K: int
    split: str = "train"

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 3:
            raise InvalidInputError("images must have shape (N, H, W)")
        if labels.shape != (images.shape[0],):
            raise InvalidInputError("need one label per image")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise InvalidInputError(f"labels must lie in [0, {self.K})")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.size

    @property
    def shape(self):
        return self.images.shape[1:]

    def flat(self):
        return self.images.reshape(len(self), -1)

    def subset(self, index, split=None):
        return LabeledDataset(self.images[index], self.labels[index], self.K, split or self.split)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.K)


def _coords(size):
    c = (size - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64), indexing="ij")
    # y-up frame so angles read counter-clockwise.
    return cols - c, c - rows


def _stroke(dist, half_width):
    """Anti-aliased ink: full inside the stroke, linear over one pixel."""
    return np.clip(half_width + 0.5 - dist, 0.0, 1.0)


def _segment(x, y, cx, cy, theta, half_len, half_width):
    ux, uy = np.cos(theta), np.sin(theta)
    dx, dy = x - cx, y - cy
    along = dx * ux + dy * uy
    across = np.abs(-dx * uy + dy * ux)
    beyond = np.maximum(np.abs(along) - half_len, 0.0)
    return _stroke(np.hypot(across, beyond), half_width)


def class_angles(K):
    """Orientations (radians) of the K bar classes over a half-turn."""
    return np.pi * np.arange(K) / K


def blob_centers(K, size):
    radius = size / 4.0
    phi = 2.0 * np.pi * np.arange(K) / K
    return radius * np.cos(phi), radius * np.sin(phi)


def _render(family, label, rng, x, y):
    size = family.size
    half_len = 0.4 * size
    width = family.thickness + rng.uniform(-family.thickness_jitter, family.thickness_jitter)
    hw = width / 2.0
    jitter = np.deg2rad(rng.uniform(-family.angle_jitter_deg, family.angle_jitter_deg))
    cx, cy = rng.uniform(-family.offset_jitter, family.offset_jitter, size=2)
    peak = rng.uniform(*family.intensity)
    K = family.K
    kind = family.kind
    if kind is FamilyKind.BARS:
        img = _segment(x, y, cx, cy, class_angles(K)[label] + jitter, half_len, hw)
    elif kind is FamilyKind.NEAR_OOD:
        theta = class_angles(K)[label] + np.pi / (2 * K)
        img = _segment(x, y, cx, cy, theta + jitter, half_len, hw)
    elif kind is FamilyKind.BLOBS:
        bx, by = blob_centers(K, size)
        sigma = size / 10.0
        d2 = (x - bx[label] - cx) ** 2 + (y - by[label] - cy) ** 2
        img = np.exp(-d2 / (2.0 * sigma * sigma))
    elif kind is FamilyKind.CROSSES_OOD:
        # A short diagonal X centered on the grid.
        arm = 0.25 * size
        img = np.maximum(
            _segment(x, y, cx, cy, np.pi / 4 + jitter, arm, hw),
            _segment(x, y, cx, cy, 3 * np.pi / 4 + jitter, arm, hw),
        )
    else:
        radius = 0.3 * size
        img = _stroke(np.abs(np.hypot(x - cx, y - cy) - radius), hw)
    img = peak * img
    if family.noise_sigma > 0:
        img = img + rng.normal(0.0, family.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate(family, n_per_class, rng=None):
    """Render n_per_class samples for each of the family's K labels.

    Out-of-distribution families have no real classes; their labels only
    index the variant and keep class counts balanced.  Samples are in
    label-major order.
    """
    if n_per_class < 1:
        raise InvalidInputError("n_per_class must be >= 1")
    if rng is None:
        rng = np.random.default_rng(family.seed)
    x, y = _coords(family.size)
    labels = np.repeat(np.arange(family.K), n_per_class)
    images = np.stack([_render(family, int(lab), rng, x, y) for lab in labels])
    return LabeledDataset(images, labels, family.K)


def prototypes(ds):
    """Per-class mean image, shape (K, H, W)."""
    return np.stack([ds.images[ds.labels == k].mean(axis=0) for k in range(ds.K)])


def class_spread(ds):
    """Per-class mean L2 distance of samples to their class centroid."""
    protos = prototypes(ds)
    out = np.empty(ds.K)
    for k in range(ds.K):
        diffs = ds.images[ds.labels == k] - protos[k]
        out[k] = np.linalg.norm(diffs.reshape(diffs.shape[0], -1), axis=1).mean()
    return out


def ood_separation(id_ds, ood_ds):
    """Ratio of the OOD centroid's nearest ID-prototype distance to the max ID spread."""
    protos = prototypes(id_ds).reshape(id_ds.K, -1)
    centroid = ood_ds.images.mean(axis=0).reshape(-1)
    nearest = np.linalg.norm(protos - centroid, axis=1).min()
    return float(nearest / class_spread(id_ds).max())


def split(ds, fractions=(0.8, 0.1, 0.1), rng=None, names=("train", "val", "test")):
    """Stratified split; each class is divided by largest remainders.

    Raises:
        InvalidInputError: if fractions do not sum to 1, or a class has
            fewer samples than there are parts.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.ndim != 1 or fractions.size < 1 or np.any(fractions < 0):
        raise InvalidInputError("fractions must be a non-negative sequence")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise InvalidInputError("fractions must sum to 1")
    if len(names) != fractions.size:
        raise InvalidInputError("need one name per fraction")
    if rng is None:
        rng = np.random.default_rng(0)
    parts = [[] for _ in fractions]
    for k in range(ds.K):
        idx = np.flatnonzero(ds.labels == k)
        if idx.size < fractions.size:
            raise InvalidInputError(f"class {k} has {idx.size} samples, fewer than {fractions.size} parts")
        idx = rng.permutation(idx)
        exact = fractions * idx.size
        counts = np.floor(exact).astype(int)
        short = idx.size - counts.sum()
        # Stable sort keeps earlier parts first among equal remainders.
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:short]] += 1
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for p in range(fractions.size):
            parts[p].append(idx[bounds[p]:bounds[p + 1]])
    out = []
    for p, name in enumerate(names):
        index = np.sort(np.concatenate(parts[p]))
        out.append(ds.subset(index, split=name))
    return tuple(out)


# --- native container -------------------------------------------------------

def save_dataset(ds, path):
    """Write the binary container (little-endian, bit-exact pixels)."""
    n = len(ds)
    h, w = ds.shape
    if ds.K > 0xFFFF:
        raise InvalidInputError("K does not fit in a u16 label")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION))
        fh.write(_DIMS.pack(n, h, w, ds.K))
        fh.write(ds.images.astype("<f8").tobytes())
        fh.write(ds.labels.astype("<u2").tobytes())


def load_dataset(path, split="train"):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read dataset: {exc.strerror}", path=path) from exc
    head = _HEADER.size + _DIMS.size
    if len(blob) < head:
        raise ParseError("truncated header", path=path, offset=len(blob))
    magic, version = _HEADER.unpack_from(blob, 0)
    if magic != DATASET_MAGIC:
        raise ParseError("not a dataset container (bad magic)", path=path, offset=0)
    if version != DATASET_VERSION:
        raise ParseError(f"unsupported container version {version}", path=path, offset=12)
    n, h, w, k = _DIMS.unpack_from(blob, _HEADER.size)
    pix_bytes = n * h * w * 8
    expected = head + pix_bytes + n * 2
    if len(blob) < expected:
        raise ShapeError(f"payload has {len(blob)} bytes, header implies {expected}", path=path, offset=len(blob))
    if len(blob) > expected:
        raise ShapeError(f"{len(blob) - expected} trailing bytes after payload", path=path, offset=expected)
    images = np.frombuffer(blob, dtype="<f8", count=n * h * w, offset=head).reshape(n, h, w)
    labels = np.frombuffer(blob, dtype="<u2", count=n, offset=head + pix_bytes)
    if n and labels.max() >= k:
        raise ParseError(f"label {labels.max()} out of range for K={k}", path=path, offset=head + pix_bytes)
    return LabeledDataset(images.astype(np.float64), labels.astype(np.int64), k, split)


# --- IDX ----------------------------------------------------------------------

def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read IDX file: {exc.strerror}", path=path) from exc


def _idx_header(blob, path, magic, ndim):
    if len(blob) < 4:
        raise ParseError("truncated magic", path=path, offset=len(blob))
    found = struct.unpack_from(">I", blob, 0)[0]
    if found != magic:
        raise ParseError(f"bad magic 0x{found:08x}, expected 0x{magic:08x}", path=path, offset=0)
    end = 4 + 4 * ndim
    if len(blob) < end:
        raise ParseError("truncated dimensions", path=path, offset=len(blob))
    dims = struct.unpack_from(f">{ndim}I", blob, 4)
    count = int(np.prod(dims))
    if len(blob) < end + count:
        raise ParseError(
            f"truncated payload: header declares {count} bytes, found {len(blob) - end}",
            path=path, offset=len(blob),
        )
    return dims, np.frombuffer(blob, dtype=np.uint8, count=count, offset=end)


def read_idx(images_path, labels_path, K=None, split="train"):
    """Read an IDX image/label pair; pixels are scaled by 1/255.

    Raises:
        ParseError: on bad magic, truncation, or a count mismatch.
    """
    img_blob = _read_bytes(images_path)
    dims, pix = _idx_header(img_blob, images_path, IDX_IMAGES, 3)
    lab_blob = _read_bytes(labels_path)
    (n_lab,), labels = _idx_header(lab_blob, labels_path, IDX_LABELS, 1)
    if n_lab != dims[0]:
        raise ParseError(f"{dims[0]} images but {n_lab} labels", path=labels_path, offset=4)
    labels = labels.astype(np.int64)
    if K is None:
        K = int(labels.max()) + 1 if labels.size else 2
    images = pix.reshape(dims).astype(np.float64) / 255.0
    return LabeledDataset(images, labels, max(K, 2), split)
