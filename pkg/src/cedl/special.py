"""Log-gamma, digamma and trigamma for positive real arguments.

All three functions are vectorized over numpy arrays and evaluated in
float64.  Scalars in give Python floats out.
"""

import math

import numpy as np

from .errors import DomainError

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Taylor coefficients of lnGamma(1 + z): -gamma*z + sum_{k>=2} (-1)^k zeta(k) z^k / k.
# Used near x = 1 and x = 2 where lnGamma crosses zero and the Lanczos sum
# loses relative accuracy.
_EULER_GAMMA = 0.57721566490153286061
_ZETA = (
    1.6449340668482264365, 1.2020569031595942854, 1.0823232337111381915,
    1.0369277551433699263, 1.0173430619844491397, 1.0083492773819228268,
    1.0040773561979443394, 1.0020083928260822144, 1.0009945751278180853,
    1.0004941886041194646, 1.0002460865533080483, 1.0001227133475784891,
    1.0000612481350587048, 1.0000305882363070205, 1.0000152822594086519,
    1.0000076371976378998, 1.0000038172932649998, 1.0000019082127165539,
    1.0000009539620338728, 1.0000004769329867878, 1.0000002384505027277,
    1.0000001192199259653, 1.0000000596081890513, 1.0000000298035035147,
    1.0000000149015548284, 1.0000000074507117898, 1.0000000037253340248,
    1.0000000018626597235, 1.0000000009313274324,
)
_SERIES_RADIUS = 0.2

_DIGAMMA_SHIFT = 10.0
# Bernoulli-number terms B_2n / (2n) for the asymptotic digamma series.
_DIGAMMA_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
)
# B_2n for the trigamma series 1/x + 1/(2x^2) + sum B_2n / x^(2n+1).
_TRIGAMMA_ASYMPTOTIC = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)
_TRIGAMMA_SHIFT = 10.0


def _as_positive_array(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires finite arguments")
    if np.any(arr <= 0.0):
        raise DomainError(f"{name} is only defined here for x > 0")
    return arr


def _wrap(result, like):
    if np.ndim(like) == 0:
        return float(result)
    return result


def _lanczos(x):
    # x >= 0.5
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


# Same series as Horner coefficients, highest power first, ending at z^1.
_SERIES_POLY = tuple(
    [(1.0 if k % 2 == 0 else -1.0) * zeta / k
     for k, zeta in reversed(list(enumerate(_ZETA, start=2)))] + [-_EULER_GAMMA]
)


def _lngamma_1p(z):
    """lnGamma(1 + z) for |z| <= _SERIES_RADIUS by Taylor series."""
    acc = np.full_like(z, _SERIES_POLY[0])
    for c in _SERIES_POLY[1:]:
        acc = acc * z + c
    return acc * z


def log_gamma(x):
    """Natural log of the gamma function for x > 0.

    Raises:
        DomainError: if any x <= 0 or is not finite.
    """
    arr = _as_positive_array(x, "log_gamma")
    near1 = np.abs(arr - 1.0) <= _SERIES_RADIUS
    near2 = np.abs(arr - 2.0) <= _SERIES_RADIUS
    small = (arr < 0.5) & ~near1
    rest = ~(near1 | near2 | small)

    if rest.all():
        out = _lanczos(arr)
        return _wrap(out, x)
    out = np.empty_like(arr)
    if near1.any():
        out[near1] = _lngamma_1p(arr[near1] - 1.0)
    if near2.any():
        # lnGamma(2 + z) = lnGamma(1 + z) + log1p(z)
        z2 = arr[near2] - 2.0
        out[near2] = _lngamma_1p(z2) + np.log1p(z2)
    if small.any():
        # lnGamma(x) = lnGamma(x + 1) - ln x, with x + 1 in (1, 1.5)
        xs = arr[small]
        xs1 = xs + 1.0
        lg1 = np.where(np.abs(xs1 - 1.0) <= _SERIES_RADIUS,
                       _lngamma_1p(xs1 - 1.0), _lanczos(xs1))
        out[small] = lg1 - np.log(xs)
    if rest.any():
        out[rest] = _lanczos(arr[rest])
    return _wrap(out, x)


def digamma(x):
    """Digamma function psi(x) = d/dx lnGamma(x) for x > 0.

    Upward recurrence psi(x) = psi(x + 1) - 1/x until x >= 10, then the
    asymptotic expansion in 1/x^2.
    """
    arr = _as_positive_array(x, "digamma")
    xs = arr.copy()
    acc = np.zeros_like(xs)
    while True:
        low = xs < _DIGAMMA_SHIFT
        if not np.any(low):
            break
        acc = acc - np.where(low, 1.0 / xs, 0.0)
        xs = np.where(low, xs + 1.0, xs)
    inv2 = 1.0 / (xs * xs)
    series = np.zeros_like(xs)
    power = inv2
    for c in _DIGAMMA_ASYMPTOTIC:
        series = series + c * power
        power = power * inv2
    out = acc + np.log(xs) - 0.5 / xs - series
    return _wrap(out, x)


def trigamma(x):
    """Trigamma function psi'(x) for x > 0 (needed for KL gradients)."""
    arr = _as_positive_array(x, "trigamma")
    xs = arr.copy()
    acc = np.zeros_like(xs)
    while True:
        low = xs < _TRIGAMMA_SHIFT
        if not np.any(low):
            break
        acc = acc + np.where(low, 1.0 / (xs * xs), 0.0)
        xs = np.where(low, xs + 1.0, xs)
    inv = 1.0 / xs
    inv2 = inv * inv
    series = np.zeros_like(xs)
    power = inv2 * inv
    for c in _TRIGAMMA_ASYMPTOTIC:
        series = series + c * power
        power = power * inv2
    out = acc + inv + 0.5 * inv2 + series
    return _wrap(out, x)
