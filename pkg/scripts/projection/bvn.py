"""
Bivariate standard normal distribution: CDF, density and rectangle
probabilities with their derivatives.

The CDF follows the Drezner-Wesolowsky construction as refined by Genz:
Gauss-Legendre quadrature of the Plackett identity for moderate correlation
and an asymptotic expansion around |r| = 1 otherwise. Everything is
vectorised over numpy arrays; the correlation may be a scalar or an array
broadcastable against the limits.
"""

from typing import NamedTuple

import numpy as np
from scipy.stats import norm

TWOPI = 2.0 * np.pi

# 10-point Gauss-Legendre rule on [-1, 0], mirrored inside the integrand.
_NODES = np.array([
    -0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
    -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
    -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
    -0.07652652113349733,
])
_WEIGHTS = np.array([
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
    0.1527533871307259,
])

_HIGH_CORRELATION = 0.925


class RectangleGradient(NamedTuple):
    """Partial derivatives of a rectangle probability."""

    lo1: np.ndarray
    hi1: np.ndarray
    lo2: np.ndarray
    hi2: np.ndarray
    r: np.ndarray


def _upper_moderate(h: np.ndarray, k: np.ndarray, r: np.ndarray) -> np.ndarray:
    """P(X > h, Y > k) for |r| < 0.925."""
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = np.arcsin(r)[:, None]
    total = np.zeros_like(h)
    for sign in (1.0, -1.0):
        sn = np.sin(asr * (sign * _NODES + 1.0) / 2.0)
        expo = (sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn)
        total += np.sum(_WEIGHTS * np.exp(expo), axis=1)
    return total * asr[:, 0] / (2.0 * TWOPI) + norm.cdf(-h) * norm.cdf(-k)


def _upper_high(h: np.ndarray, k: np.ndarray, r: np.ndarray) -> np.ndarray:
    """P(X > h, Y > k) for |r| >= 0.925."""
    negative = r < 0
    k = np.where(negative, -k, k)
    hk = h * k
    bvn = np.zeros_like(h)

    inner = np.abs(r) < 1.0
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        as_ = (1.0 - r) * (1.0 + r)
        a = np.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        value = a * np.exp(-(bs / as_ + hk) / 2.0) * (
            1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
        )
        b = np.sqrt(bs)
        tail = (
            np.exp(-hk / 2.0) * np.sqrt(TWOPI) * norm.cdf(-b / a) * b
            * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
        )
        value = value - np.where(hk > -160.0, tail, 0.0)
        half = a / 2.0
        for x, w in zip(_NODES, _WEIGHTS):
            xs = (half * (x + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            value = value + half * w * (
                np.exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs
                - np.exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs))
            )
            xs = as_ * (1.0 - x) ** 2 / 4.0
            rs = np.sqrt(1.0 - xs)
            value = value + half * w * np.exp(-(bs / xs + hk) / 2.0) * (
                np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                - (1.0 + c * xs * (1.0 + d * xs))
            )
        value = -value / TWOPI
    bvn = np.where(inner, value, 0.0)
    bvn = np.where(r > 0, bvn + norm.cdf(-np.maximum(h, k)), bvn)
    bvn = np.where(
        negative,
        -bvn + np.maximum(0.0, norm.cdf(-h) - norm.cdf(-k)),
        bvn,
    )
    return bvn


def bvn_cdf(x, y, r) -> np.ndarray:
    """
    Bivariate standard normal CDF P(X < x, Y < y) with correlation r.

    Args:
        x: Upper limits in the first coordinate (may be infinite)
        y: Upper limits in the second coordinate (may be infinite)
        r: Correlation in [-1, 1]

    Returns:
        np.ndarray: CDF values with the broadcast shape of the inputs
    """
    x, y, r = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(r, dtype=float)
    )
    shape = x.shape
    x, y, r = x.ravel(), y.ravel(), r.ravel()
    out = np.empty(x.shape)

    finite = np.isfinite(x) & np.isfinite(y)
    out[~finite] = np.where(
        (x[~finite] == -np.inf) | (y[~finite] == -np.inf),
        0.0,
        np.where(x[~finite] == np.inf, norm.cdf(y[~finite]), norm.cdf(x[~finite])),
    )

    # P(X < x, Y < y) = P(X > -x, Y > -y)
    h, k, rr = -x[finite], -y[finite], r[finite]
    moderate = np.abs(rr) < _HIGH_CORRELATION
    value = np.empty(h.shape)
    if moderate.any():
        value[moderate] = _upper_moderate(h[moderate], k[moderate], rr[moderate])
    if (~moderate).any():
        value[~moderate] = _upper_high(h[~moderate], k[~moderate], rr[~moderate])
    out[finite] = value
    return np.clip(out, 0.0, 1.0).reshape(shape)


def bvn_pdf(x, y, r) -> np.ndarray:
    """Bivariate standard normal density; zero at infinite arguments."""
    x, y, r = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(r, dtype=float)
    )
    finite = np.isfinite(x) & np.isfinite(y)
    xs = np.where(finite, x, 0.0)
    ys = np.where(finite, y, 0.0)
    det = 1.0 - r * r
    quad = (xs * xs - 2.0 * r * xs * ys + ys * ys) / det
    dens = np.exp(-0.5 * quad) / (TWOPI * np.sqrt(det))
    return np.where(finite, dens, 0.0)


def bvn_cdf_dx(x, y, r) -> np.ndarray:
    """
    Partial derivative of the CDF with respect to its first limit.

    Uses dF/dx = phi(x) * Phi((y - r x) / sqrt(1 - r^2)).
    """
    x, y, r = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(r, dtype=float)
    )
    finite_x = np.isfinite(x)
    xs = np.where(finite_x, x, 0.0)
    with np.errstate(invalid='ignore'):
        z = (y - r * xs) / np.sqrt(1.0 - r * r)
    return np.where(finite_x, norm.pdf(xs) * norm.cdf(z), 0.0)


def rectangle_probability(lo1, hi1, lo2, hi2, r) -> np.ndarray:
    """
    P(lo1 <= X < hi1, lo2 <= Y < hi2); empty rectangles have probability 0.

    Args:
        lo1, hi1: Bounds of the first coordinate (may be infinite)
        lo2, hi2: Bounds of the second coordinate (may be infinite)
        r: Correlation

    Returns:
        np.ndarray: Rectangle probabilities
    """
    lo1 = np.asarray(lo1, dtype=float)
    lo2 = np.asarray(lo2, dtype=float)
    hi1 = np.maximum(np.asarray(hi1, dtype=float), lo1)
    hi2 = np.maximum(np.asarray(hi2, dtype=float), lo2)
    prob = (
        bvn_cdf(hi1, hi2, r) - bvn_cdf(lo1, hi2, r)
        - bvn_cdf(hi1, lo2, r) + bvn_cdf(lo1, lo2, r)
    )
    return np.clip(prob, 0.0, 1.0)


def rectangle_gradient(lo1, hi1, lo2, hi2, r) -> RectangleGradient:
    """
    Derivatives of ``rectangle_probability`` with respect to each bound and r.

    Empty rectangles have zero gradient.
    """
    lo1, hi1, lo2, hi2, r = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (lo1, hi1, lo2, hi2, r))
    )
    empty = (hi1 < lo1) | (hi2 < lo2)

    d_hi1 = bvn_cdf_dx(hi1, hi2, r) - bvn_cdf_dx(hi1, lo2, r)
    d_lo1 = -(bvn_cdf_dx(lo1, hi2, r) - bvn_cdf_dx(lo1, lo2, r))
    # dF/dy(x, y) = dF/dx(y, x) by symmetry
    d_hi2 = bvn_cdf_dx(hi2, hi1, r) - bvn_cdf_dx(hi2, lo1, r)
    d_lo2 = -(bvn_cdf_dx(lo2, hi1, r) - bvn_cdf_dx(lo2, lo1, r))
    d_r = (
        bvn_pdf(hi1, hi2, r) - bvn_pdf(lo1, hi2, r)
        - bvn_pdf(hi1, lo2, r) + bvn_pdf(lo1, lo2, r)
    )

    def _mask(values: np.ndarray) -> np.ndarray:
        return np.where(empty, 0.0, values)

    return RectangleGradient(_mask(d_lo1), _mask(d_hi1), _mask(d_lo2), _mask(d_hi2), _mask(d_r))
