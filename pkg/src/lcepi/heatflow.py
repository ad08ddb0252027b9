"""Heat semigroup, convolution of grid densities, and flow diagnostics.

The solution of ``u_t = kappa * Laplace(u)`` with initial datum ``f`` is
``u(t) = f * M_{2 kappa t}``; it is realized by discrete convolution with the
sampled Gaussian kernel, separably along each axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from . import _numerics
from .densities import (
    AnalyticDensity,
    GridDensity,
    GridSpec,
    default_spacing,
    dilate,
    discretize,
    recenter,
)
from .errors import ContractError, ParameterDomainError, ResolutionError
from .functionals import FunctionalReport, analyze

__all__ = [
    "convolve",
    "heat_kernel",
    "heat_step",
    "HeatEvolution",
    "debruijn_residual",
    "mckean_residual",
    "rescaled_clt_distance",
    "l1_distance",
    "sup_distance",
]

# Kernel half-width in standard deviations.
KERNEL_WIDTH = 8.0
# Above this many multiply-adds a 1D convolution switches to FFT.
DIRECT_LIMIT = 2e8
SPACING_RTOL = 1e-9
# Relative positivity floor for FFT output: roundoff is ~1e-16 of the peak.
FFT_FLOOR = 1e-12


def _combine_edges(p, q):
    # Two power-law edges x^p, x^q convolve to x^(p+q+1); a smooth factor removes the edge.
    if p is None or q is None:
        return None
    return p + q + 1.0


def _edge_weighted(g: GridDensity) -> np.ndarray:
    """Samples with half weight on a true support edge carrying a jump.

    This makes the discrete convolution a trapezoid rule across the jump.
    """
    v = np.array(g.values)
    for axis, p in enumerate(g.edge_powers):
        if p is not None:
            sl = [slice(None)] * v.ndim
            sl[axis] = 0
            v[tuple(sl)] *= 0.5
    return v


def _edge_slope(v: np.ndarray, h: float) -> float:
    """Fourth-order one-sided derivative at the first node."""
    if v.size < 5:
        return 0.0
    return float(-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)


def _place(v: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: min(size, v.size)] = v[:size]
    return out


def _endpoint_correction(a: np.ndarray, pa, b: np.ndarray, pb, h: float, size: int) -> np.ndarray:
    """Euler-Maclaurin endpoint term of the trapezoid convolution across support edges.

    For ``k(x) = int f(y) g(x - y) dy`` with an edge of ``f`` at the lower
    limit and of ``g`` at the upper limit, the O(h^2) term is
    ``h^2/12 [f'(0) g(x) - f(0) g'(x) - f'(x) g(0) + f(x) g'(0)]``.
    """
    corr = np.zeros(size)
    for (u, pu), (w, pw) in (((a, pa), (b, pb)), ((b, pb), (a, pa))):
        if pu is None:
            continue
        fw = _place(w, size)
        dw = _place(_numerics.diff1(w, h) if pw is None else _one_sided_diff(w, h), size)
        corr += _edge_slope(u, h) * fw - u[0] * dw
    return corr * h * h / 12.0


def _one_sided_diff(w: np.ndarray, h: float) -> np.ndarray:
    d = _numerics.diff1(w, h)
    if w.size >= 5:
        d[0] = _edge_slope(w, h)
        d[1] = (-3.0 * w[0] - 10.0 * w[1] + 18.0 * w[2] - 6.0 * w[3] + w[4]) / (12.0 * h)
    return d


def _match_spacing(f: GridDensity, g: GridDensity) -> tuple[GridDensity, GridDensity]:
    hf, hg = np.array(f.spacing), np.array(g.spacing)
    if np.allclose(hf, hg, rtol=SPACING_RTOL, atol=0):
        return f, g
    ratio = hg / hf
    if np.allclose(ratio, np.round(ratio), rtol=1e-9) and np.all(np.round(ratio) >= 1):
        step = int(round(ratio[0]))
        if np.all(np.round(ratio) == step):
            return f.subsample(step), g
    ratio = hf / hg
    if np.allclose(ratio, np.round(ratio), rtol=1e-9) and np.all(np.round(ratio) >= 1):
        step = int(round(ratio[0]))
        if np.all(np.round(ratio) == step):
            return f, g.subsample(step)
    raise ContractError(f"spacing mismatch {f.spacing} vs {g.spacing} (not an integer ratio)")


def _conv1d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size * b.size <= DIRECT_LIMIT:
        return np.convolve(a, b)
    return np.clip(signal.fftconvolve(a, b), 0.0, None)


def _conv_axis(a: np.ndarray, pa, b: np.ndarray, pb, h: float) -> np.ndarray:
    """1D convolution of samples with support-edge exponents ``pa``, ``pb``."""
    vals = _conv1d(_halve_jump(a, pa), _halve_jump(b, pb)) * h
    if pa is not None or pb is not None:
        vals = vals + _endpoint_correction(a, pa, b, pb, h, vals.size)
    if pa is not None and pb is not None:
        # Zero-length integration interval at the combined edge.
        vals[0] = 0.0
    return vals


def _halve_jump(v: np.ndarray, p) -> np.ndarray:
    if p is None:
        return v
    v = np.array(v)
    v[0] *= 0.5
    return v


def convolve(f: GridDensity, g: GridDensity) -> GridDensity:
    """Density of ``X + Y`` for independent ``X ~ f``, ``Y ~ g``.

    Discrete linear convolution scaled by ``h^n``; the result lives on the
    Minkowski sum of the two boxes and is renormalized.  Spacings must agree
    or differ by an integer factor (the finer grid is then subsampled).
    Tensor-product inputs are convolved axis by axis; other 2D inputs by
    FFT, whose roundoff raises the positivity floor of the result.
    """
    if not isinstance(f, GridDensity) or not isinstance(g, GridDensity):
        raise ContractError("convolve expects GridDensity inputs; discretize first")
    if f.dim != g.dim:
        raise ContractError(f"dimension mismatch: {f.dim} vs {g.dim}")
    f, g = _match_spacing(f, g)
    h = f.spacing
    origin = tuple(o1 + o2 for o1, o2 in zip(f.origin, g.origin))
    edges = tuple(_combine_edges(p, q) for p, q in zip(f.edge_powers, g.edge_powers))
    label = f"({f.label})*({g.label})"
    if f.dim == 1:
        vals = _conv_axis(f.values, f.edge_powers[0], g.values, g.edge_powers[0], h[0])
        return GridDensity.normalized(origin, h, vals, edge_powers=edges, label=label)
    if f.factors is not None and g.factors is not None:
        parts = [
            _conv_axis(fa, pa, ga, pb, hh)
            for fa, pa, ga, pb, hh in zip(f.factors, f.edge_powers, g.factors, g.edge_powers, h)
        ]
        return GridDensity.from_factors(origin, h, parts, edge_powers=edges, label=label)
    a, b = _edge_weighted(f), _edge_weighted(g)
    vals = np.clip(signal.fftconvolve(a, b), 0.0, None) * float(np.prod(h))
    return GridDensity.normalized(origin, h, vals, edge_powers=edges, label=label,
                                  floor=max(FFT_FLOOR, f.floor, g.floor))


def heat_kernel(variance: float, h: float) -> tuple[float, np.ndarray]:
    """Sampled 1D Gaussian ``M_variance`` times ``h``; returns (first node, weights)."""
    sd = math.sqrt(variance)
    if sd < h:
        raise ResolutionError(f"heat kernel std {sd:.3g} is below the grid spacing {h:.3g}")
    m = int(math.ceil(KERNEL_WIDTH * sd / h))
    x = h * np.arange(-m, m + 1)
    w = np.exp(-x * x / (2.0 * variance))
    w /= w.sum()
    return -m * h, w


def _smooth_axis(v: np.ndarray, p, variance: float, h: float) -> tuple[float, np.ndarray]:
    lo, w = heat_kernel(variance, h)
    vals = _conv1d(_halve_jump(v, p), w)
    if p is not None:
        vals = vals + _endpoint_correction(v, p, w / h, None, h, vals.size)
    return lo, vals


def _smooth(g: GridDensity, variance: float, label: str) -> GridDensity:
    origin = list(g.origin)
    if g.dim == 1 or g.factors is not None:
        parts = g.factors if g.factors is not None else (g.values,)
        out = []
        for axis, (v, p, h) in enumerate(zip(parts, g.edge_powers, g.spacing)):
            lo, vals = _smooth_axis(v, p, variance, h)
            origin[axis] += lo
            out.append(vals)
        return GridDensity.from_factors(tuple(origin), g.spacing, out, label=label, floor=g.floor)
    vals = _edge_weighted(g)
    for axis in range(g.dim):
        lo, w = heat_kernel(variance, g.spacing[axis])
        vals = np.apply_along_axis(lambda r: np.convolve(r, w), axis, vals)
        origin[axis] += lo
    return GridDensity.normalized(tuple(origin), g.spacing, vals, label=label, floor=g.floor)


def _as_grid(f, spacing=None, grid_spec=None, check_resolution=True) -> GridDensity:
    if isinstance(f, GridDensity):
        if spacing is not None and not np.allclose(f.spacing, spacing, rtol=SPACING_RTOL):
            step = int(round(spacing / f.spacing[0]))
            if step < 1 or not math.isclose(step * f.spacing[0], spacing, rel_tol=1e-9):
                raise ContractError(f"cannot resample grid spacing {f.spacing} to {spacing}")
            return f.subsample(step)
        return f
    spec = GridSpec.coerce(grid_spec)
    if spacing is not None:
        spec = GridSpec(spacing=spacing, half_width=spec.half_width, quantile=spec.quantile)
    return discretize(f, spec, check_resolution=check_resolution)


def _check_kt(kappa, t):
    if not (kappa > 0 and math.isfinite(kappa)):
        raise ParameterDomainError(f"kappa must be positive, got {kappa}")
    if not t >= 0:
        raise ParameterDomainError(f"time must be nonnegative, got {t}")


def heat_step(f, kappa: float, t: float, spacing: float | None = None) -> GridDensity:
    """``u(t) = f * M_{2 kappa t}`` on a grid enlarged by ``8 sqrt(2 kappa t)`` per side.

    ``t = 0`` returns the discretization of ``f``.
    """
    _check_kt(kappa, t)
    g = _as_grid(f, spacing)
    if t == 0:
        return g
    return _smooth(g, 2.0 * kappa * t, label=f"{g.label}@t={t:g}")


@dataclass(frozen=True)
class HeatEvolution:
    """Heat flow of ``initial`` with diffusion constant ``kappa``.

    Snapshots are computed from the discretization at spacing ``h`` and,
    for the error estimates, independently from discretizations at ``2h``
    and ``4h``.
    """

    initial: object
    kappa: float
    spacing: float | None = None
    grid_spec: object = None

    def __post_init__(self):
        _check_kt(self.kappa, 0.0)
        h = self.spacing
        if h is None:
            h = (self.initial.spacing[0] if isinstance(self.initial, GridDensity)
                 else default_spacing(self.initial))
        object.__setattr__(self, "spacing", float(h))

    def grid(self, level: int = 0) -> GridDensity:
        """Initial datum sampled at spacing ``2**level * h``."""
        if isinstance(self.initial, GridDensity):
            return self.initial.subsample(2**level) if level else self.initial
        return _as_grid(self.initial, self.spacing * 2**level, self.grid_spec, level == 0)

    def at(self, t: float, level: int = 0) -> GridDensity:
        _check_kt(self.kappa, t)
        g = self.grid(level)
        if t == 0:
            return g
        return _smooth(g, 2.0 * self.kappa * t, label=f"{g.label}@t={t:g}")

    def __call__(self, t: float) -> GridDensity:
        return self.at(t)

    def report(self, t: float, analytic_at_zero: bool = True) -> FunctionalReport:
        """Functionals of ``u(t)`` with errors from the coarse companions."""
        if t == 0 and analytic_at_zero and isinstance(self.initial, AnalyticDensity):
            return analyze(self.initial, replace(GridSpec.coerce(self.grid_spec), spacing=self.spacing))
        return report_with_companions(lambda level: self.at(t, level))


def report_with_companions(build) -> FunctionalReport:
    """Analyze ``build(0)`` using ``build(1)``, ``build(2)`` as coarse companions.

    Levels that the grid cannot resolve are dropped from the estimate.
    """
    fine = build(0)
    companions = []
    for level in (1, 2):
        try:
            companions.append(build(level))
        except ResolutionError:
            break
    if not companions:
        return analyze(fine)
    return analyze(fine, companions=companions)


def _entropy_at(evo: HeatEvolution, t: float) -> float:
    return analyze(evo.at(t), companions=()).H


def debruijn_residual(f, kappa: float, t: float, dt: float, spacing: float | None = None) -> float:
    """``|(H(u(t+dt)) - H(u(t-dt))) / (2 dt) - kappa I(u(t))|``."""
    _check_kt(kappa, t)
    if not 0 < dt <= t:
        raise ParameterDomainError(f"need 0 < dt <= t, got dt={dt}, t={t}")
    evo = HeatEvolution(f, kappa, spacing)
    dH = (_entropy_at(evo, t + dt) - _entropy_at(evo, t - dt)) / (2.0 * dt)
    return abs(dH - kappa * analyze(evo.at(t), companions=()).I)


def mckean_residual(f, t: float, dt: float, spacing: float | None = None) -> float:
    """``|(I(u(t+dt)) - I(u(t-dt))) / (2 dt) + 2 J(u(t))|`` at unit diffusion."""
    _check_kt(1.0, t)
    if not 0 < dt <= t:
        raise ParameterDomainError(f"need 0 < dt <= t, got dt={dt}, t={t}")
    evo = HeatEvolution(f, 1.0, spacing)
    dI = (analyze(evo.at(t + dt), companions=()).I - analyze(evo.at(t - dt), companions=()).I) / (2.0 * dt)
    return abs(dI + 2.0 * analyze(evo.at(t), companions=()).J)


def l1_distance(g: GridDensity, target: AnalyticDensity) -> float:
    """``int |g - target|`` over the grid plus the target mass outside it."""
    inside = _numerics.integrate(np.abs(g.values - g.evaluate_like(target)), g.spacing)
    covered = 1.0
    for factor, (lo, hi) in zip(target.factors, g.extent):
        dist = factor.scipy()
        covered *= float(dist.cdf(hi) - dist.cdf(lo))
    return inside + max(0.0, 1.0 - covered)


def sup_distance(g: GridDensity, target: AnalyticDensity) -> float:
    return float(np.max(np.abs(g.values - g.evaluate_like(target))))


def rescaled_clt_distance(f, kappa: float, t: float, spacing: float | None = None) -> float:
    """L1 distance of the self-similar profile to ``M_kappa``.

    ``U(x, t) = (1+2t)^(n/2) u(x sqrt(1+2t), t)`` with ``u`` the heat flow of
    the recentred ``f`` at diffusion ``kappa``.
    """
    from .densities import make_gaussian

    _check_kt(kappa, t)
    if not t > 0:
        raise ParameterDomainError(f"time must be positive, got {t}")
    u = heat_step(recenter(f), kappa, t, spacing)
    U = dilate(u, math.sqrt(1.0 + 2.0 * t))
    return l1_distance(U, make_gaussian(kappa, u.dim))
