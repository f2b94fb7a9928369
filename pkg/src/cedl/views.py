"""Label-preserving views of grid inputs and the evidence sets they induce.

Images are float64 arrays of shape (H, W) with values in [0, 1].  Each
view of an input is an independent draw: rotate, then shift, then add
noise, all applied to the raw input.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError


class ViewMode(enum.Enum):
    METAMORPHIC = "meta"
    MC_DROPOUT = "mc"


@dataclass(frozen=True)
class TransformSpec:
    """How the T views of an input are produced."""

    rotate_max_deg: float = 15.0
    shift_max_px: int = 2
    noise_sigma: float = 0.01
    T: int = 5
    mode: ViewMode = ViewMode.METAMORPHIC
    seed: int = 0

    def __post_init__(self):
        if self.T < 2:
            raise InvalidInputError("T must be at least 2")
        if self.rotate_max_deg < 0 or self.shift_max_px < 0 or self.noise_sigma < 0:
            raise InvalidInputError("transform magnitudes must be non-negative")
        object.__setattr__(self, "mode", ViewMode(self.mode))

    def with_(self, **changes):
        return replace(self, **changes)


def check_grid(img):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"grid input must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise InvalidInputError("grid values must lie in [0, 1]")
    return arr


def _rotate_batch(imgs, angles_deg):
    """Rotate each (H, W) image counter-clockwise about the grid center.

    Bilinear interpolation with zero padding outside the grid.
    """
    imgs = np.asarray(imgs, dtype=np.float64)
    n, h, w = imgs.shape
    theta = np.deg2rad(np.asarray(angles_deg, dtype=np.float64))[:, None, None]
    cr, cc = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    # Output offsets in a y-up frame; sample the source by rotating back.
    xo = cols - cc
    yo = cr - rows
    cos, sin = np.cos(theta), np.sin(theta)
    xs = cos * xo + sin * yo
    ys = -sin * xo + cos * yo
    src_r = cr - ys
    src_c = cc + xs

    r0 = np.floor(src_r)
    c0 = np.floor(src_c)
    fr = src_r - r0
    fc = src_c - c0
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)

    padded = np.zeros((n, h + 2, w + 2))
    padded[:, 1:-1, 1:-1] = imgs
    batch = np.arange(n)[:, None, None]

    def tap(r, c):
        inside = (r >= -1) & (r <= h) & (c >= -1) & (c <= w)
        rr = np.clip(r, -1, h) + 1
        cc_ = np.clip(c, -1, w) + 1
        return np.where(inside, padded[batch, rr, cc_], 0.0)

    out = (
        (1.0 - fr) * (1.0 - fc) * tap(r0, c0)
        + (1.0 - fr) * fc * tap(r0, c0 + 1)
        + fr * (1.0 - fc) * tap(r0 + 1, c0)
        + fr * fc * tap(r0 + 1, c0 + 1)
    )
    return np.clip(out, 0.0, 1.0)


def rotate(img, angle_deg):
    """Rotate about the grid center (counter-clockwise for positive angles)."""
    arr = check_grid(img)
    if angle_deg == 0:
        return arr.copy()
    return _rotate_batch(arr[None], [angle_deg])[0]


def _shift_one(img, dy, dx):
    h, w = img.shape
    out = np.zeros_like(img)
    if abs(dy) >= h or abs(dx) >= w:
        return out
    src_r = slice(max(0, -dy), h - max(0, dy))
    dst_r = slice(max(0, dy), h - max(0, -dy))
    src_c = slice(max(0, -dx), w - max(0, dx))
    dst_c = slice(max(0, dx), w - max(0, -dx))
    out[dst_r, dst_c] = img[src_r, src_c]
    return out


def shift(img, dy, dx):
    """Integer translation; positive dy moves content down, positive dx right."""
    arr = check_grid(img)
    return _shift_one(arr, int(dy), int(dx))


def gaussian_noise(img, sigma, rng):
    """Add i.i.d. N(0, sigma^2) per pixel and clamp to [0, 1]."""
    arr = check_grid(img)
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    if sigma == 0:
        return arr.copy()
    return np.clip(arr + rng.normal(0.0, sigma, size=arr.shape), 0.0, 1.0)


def input_rng(seed, index):
    """Generator owned by one input, independent of evaluation order."""
    return np.random.default_rng([int(seed), int(index)])


def metamorphic_views(img, spec, rng):
    """T transformed copies of img, shape (T, H, W)."""
    arr = np.asarray(img, dtype=np.float64)
    t = spec.T
    angles = rng.uniform(-spec.rotate_max_deg, spec.rotate_max_deg, size=t)
    shifts = rng.integers(-spec.shift_max_px, spec.shift_max_px + 1, size=(t, 2))
    noise = rng.normal(0.0, 1.0, size=(t,) + arr.shape)
    if spec.rotate_max_deg > 0:
        views = _rotate_batch(np.broadcast_to(arr, (t,) + arr.shape), angles)
    else:
        views = np.repeat(arr[None], t, axis=0)
    views = np.stack([_shift_one(v, dy, dx) for v, (dy, dx) in zip(views, shifts)])
    if spec.noise_sigma > 0:
        views = np.clip(views + spec.noise_sigma * noise, 0.0, 1.0)
    return views


def make_views(img, spec, net, rng):
    """Evidence set (T, K) for one grid input.

    Metamorphic mode runs the deterministic network on T transformed
    views; MC-dropout mode runs T stochastic forwards of the raw input.
    """
    arr = check_grid(img)
    if arr.size != net.input_dim:
        raise InvalidInputError(f"input has {arr.size} pixels, network expects {net.input_dim}")
    if spec.mode is ViewMode.METAMORPHIC:
        views = metamorphic_views(arr, spec, rng)
        return net.forward(views.reshape(spec.T, -1))
    flat = np.broadcast_to(arr.reshape(1, -1), (spec.T, arr.size))
    return net.forward(flat, dropout_active=True, rng=rng)


def make_views_batch(images, spec, net, seed=None, start_index=0):
    """Evidence sets (N, T, K) for a stack of images.

    Input i uses the generator input_rng(seed, start_index + i), so any
    partition of the stack into chunks reproduces the same result.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3:
        raise InvalidInputError("expected a stack of 2-D grids, shape (N, H, W)")
    if images.size and (images.min() < 0.0 or images.max() > 1.0):
        raise InvalidInputError("grid values must lie in [0, 1]")
    seed = spec.seed if seed is None else seed
    n = images.shape[0]
    if n == 0:
        return np.zeros((0, spec.T, net.num_classes))
    if spec.mode is ViewMode.METAMORPHIC:
        views = np.stack([
            metamorphic_views(images[i], spec, input_rng(seed, start_index + i))
            for i in range(n)
        ])
        alpha = net.forward(views.reshape(n * spec.T, -1))
    else:
        flat = images.reshape(n, -1)
        masks = [
            net.sample_masks(spec.T, input_rng(seed, start_index + i)) for i in range(n)
        ]
        stacked = [np.concatenate([m[layer] for m in masks]) for layer in range(len(masks[0]))]
        x = np.repeat(flat, spec.T, axis=0)
        alpha = net.forward(x, dropout_active=True, masks=stacked)
    return alpha.reshape(n, spec.T, -1)
