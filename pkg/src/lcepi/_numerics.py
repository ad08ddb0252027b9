"""Low-level quadrature and finite-difference helpers on uniform grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Relative floor below which a grid value is treated as numerically zero in
# score-based integrands.
FLOOR_REL = 1e-15


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for ``n`` equispaced nodes.

    An even node count is handled with Simpson's 3/8 rule on the last four
    nodes, so the rule stays fourth order for any ``n >= 3``.
    """
    if n < 1:
        raise ValueError("need at least one node")
    w = np.zeros(n)
    if n == 1:
        return w
    if n == 2:
        w[:] = h / 2.0
        return w
    m = n if n % 2 == 1 else n - 3
    if m >= 3:
        w[:m:2] += 2.0
        w[1:m:2] += 4.0
        w[0] -= 1.0
        w[m - 1] -= 1.0
        w[:m] *= h / 3.0
    if m != n:
        w[n - 4 :] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


def integrate(values: np.ndarray, spacing) -> float:
    """Tensor-product Simpson integral of ``values`` with compensated summation."""
    values = np.asarray(values, dtype=float)
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (values.ndim,))
    weights = simpson_weights(values.shape[0], float(spacing[0]))
    for axis in range(1, values.ndim):
        wa = simpson_weights(values.shape[axis], float(spacing[axis]))
        weights = np.multiply.outer(weights, wa)
    terms = (weights * values).ravel()
    if not np.all(np.isfinite(terms)):
        return float(np.sum(terms))
    return math.fsum(terms)


def _pad(values: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0)] * values.ndim
    pad[axis] = (2, 2)
    return np.pad(values, pad)


def _shift(padded: np.ndarray, axis: int, k: int, n: int) -> np.ndarray:
    sl = [slice(None)] * padded.ndim
    sl[axis] = slice(2 + k, 2 + k + n)
    return padded[tuple(sl)]


def diff1(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Fourth-order central first derivative; zero extension beyond the grid."""
    n = values.shape[axis]
    p = _pad(values, axis)
    return (
        _shift(p, axis, -2, n)
        - 8.0 * _shift(p, axis, -1, n)
        + 8.0 * _shift(p, axis, 1, n)
        - _shift(p, axis, 2, n)
    ) / (12.0 * h)


def diff2(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Fourth-order central second derivative; zero extension beyond the grid."""
    n = values.shape[axis]
    p = _pad(values, axis)
    return (
        -_shift(p, axis, -2, n)
        + 16.0 * _shift(p, axis, -1, n)
        - 30.0 * values
        + 16.0 * _shift(p, axis, 1, n)
        - _shift(p, axis, 2, n)
    ) / (12.0 * h * h)


@dataclass(frozen=True)
class Estimate:
    """A quadrature value with its estimated absolute error."""

    value: float
    error: float
    converged: bool = True


def richardson(q_h: float, q_2h: float, q_4h: float | None = None, order: int = 4) -> Estimate:
    """Error estimate for ``q_h`` from coarser companions at 2h (and 4h).

    With three levels the observed contraction ratio replaces the nominal
    ``2**order``; a ratio below 2 (less than first order) marks the estimate
    as not converged.
    """
    if not math.isfinite(q_h):
        return Estimate(q_h, 0.0, True)
    floor = 1e-12 * abs(q_h) + 1e-15
    d1 = abs(q_h - q_2h)
    nominal = 2.0**order
    if q_4h is None:
        return Estimate(q_h, d1 / (nominal - 1.0) + floor, True)
    d2 = abs(q_2h - q_4h)
    # Both differences at rounding level: nothing left to extrapolate.
    if max(d1, d2) <= 1e-10 * abs(q_h) + 1e-14:
        return Estimate(q_h, max(d1, floor), True)
    ratio = d2 / d1 if d1 > 0 else math.inf
    # A contraction far above nominal means the 4h level is pre-asymptotic and
    # d1 may be small by coincidence; credit at most the nominal rate from 2h.
    if ratio > 2.0 * nominal:
        return Estimate(q_h, max(d1, d2 / nominal) + floor, False)
    if ratio >= 2.0:
        ratio = min(ratio, nominal)
        return Estimate(q_h, d1 / (ratio - 1.0) + floor, True)
    return Estimate(q_h, d1 / max(ratio - 1.0, 0.1) + floor, False)
