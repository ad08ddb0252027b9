"""Entropy, Fisher information, the production functional J, and scores.

Two evaluation paths share one quadrature rule (composite Simpson):

* analytic densities integrate ``Phi f``, ``|grad Phi|^2 f`` and
  ``|Hess Phi|^2 f`` with closed-form derivatives at the grid nodes;
* grid densities use fourth-order central differences of the samples and
  drop nodes below the relative positivity floor.

Every value carries a Richardson error estimate built from the same rule at
spacings ``2h`` and ``4h``.  Functionals that diverge because of a
power-law support edge are returned as ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _numerics
from ._numerics import Estimate, richardson
from .densities import AnalyticDensity, GridDensity, GridSpec, _axis_box, default_spacing
from .errors import ContractError, ResolutionError

__all__ = [
    "FunctionalReport",
    "ScoreSample",
    "analyze",
    "entropy",
    "fisher",
    "fisher_production",
    "entropy_power",
    "cross_h",
    "cross_h_report",
    "score_moments",
    "scores",
    "MASS_TOL",
]

MASS_TOL = 1e-8
# Nodes this close to a truncated (nonzero) grid boundary see the zero
# padding of the difference stencils and are excluded.
EDGE_GUARD = 2
# Fine-grid node count of the adaptively integrated support-edge interval.
EDGE_NODES = 32
# Grid-path nodes next to a true support edge whose integrand is extrapolated.
EDGE_PATCH = 4
# Richardson errors on grids are doubled: power-law edges defeat the observed-order estimate.
GRID_SAFETY = 2.0
# Multiple of machine epsilon in the rounding floor of differenced functionals.
ROUNDING_FACTOR = 4.0


@dataclass(frozen=True)
class FunctionalReport:
    """Functionals of one density with absolute quadrature-error estimates.

    ``mean_psi`` is the matrix of ``int d_i f d_j f / f``; its trace is ``I``.
    """

    H: float
    I: float
    J: float
    N: float
    dim: int
    quad_error: dict
    mean_psi: np.ndarray
    mean_psi_error: np.ndarray
    grid: dict
    path: str
    converged: bool = True
    dropped_mass: float = 0.0
    label: str = ""
    cross: float | None = None

    def to_dict(self) -> dict:
        out = {
            "H": self.H,
            "I": self.I,
            "J": self.J,
            "N": self.N,
            "quad_error": dict(self.quad_error),
            "grid": dict(self.grid),
            "mean_psi": np.asarray(self.mean_psi).tolist(),
            "path": self.path,
            "converged": self.converged,
        }
        if self.label:
            out["label"] = self.label
        if self.cross is not None:
            out["cross"] = self.cross
        return out

    def with_cross(self, value: float) -> "FunctionalReport":
        return FunctionalReport(**{**self.__dict__, "cross": value})


@dataclass(frozen=True)
class ScoreSample:
    """First-order score ``rho = grad f / f`` and second-order score
    ``Psi = -Hess log f`` at one point."""

    x: np.ndarray
    score: np.ndarray
    second_order: np.ndarray


# ---------------------------------------------------------------------------
# shared assembly


def _raw_to_estimates(levels: list[dict]) -> dict:
    """Apply Richardson per quantity over [h, 2h, 4h] evaluations."""
    out = {}
    for key in ("H", "I", "J"):
        vals = [lv[key] for lv in levels]
        out[key] = _rich(vals)
    mp = np.array([lv["mean_psi"] for lv in levels])
    n = mp.shape[1]
    est = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            est[i, j] = _rich(list(mp[:, i, j]))
    out["mean_psi"] = est
    return out


def _rich(vals) -> Estimate:
    if len(vals) == 1:
        return Estimate(vals[0], 1e-12 * abs(vals[0]) + 1e-15, False)
    if len(vals) == 2:
        return richardson(vals[0], vals[1])
    return richardson(vals[0], vals[1], vals[2])


def _assemble(levels, dim, grid_meta, path, dropped, label, rel_round=None) -> FunctionalReport:
    """``rel_round`` holds relative rounding floors per functional (grid path)."""
    est = _raw_to_estimates(levels)
    H, I, J = est["H"], est["I"], est["J"]
    n = dim
    mp = np.array([[e.value for e in row] for row in est["mean_psi"]], dtype=float)
    safety = GRID_SAFETY if path == "grid" else 1.0
    mpe = safety * np.array([[e.error for e in row] for row in est["mean_psi"]], dtype=float)
    quad = {
        "H": safety * H.error + dropped * (1.0 + abs(math.log(_numerics.FLOOR_REL))),
        "I": safety * I.error + dropped,
        "J": safety * J.error + dropped,
    }
    for key, rel in (rel_round or {}).items():
        val = {"H": H, "I": I, "J": J}[key].value
        if math.isfinite(val):
            quad[key] += rel * abs(val)
    N = math.exp(2.0 * H.value / n)
    return FunctionalReport(
        H=float(H.value), I=float(I.value), J=float(J.value), N=N, dim=n,
        quad_error=quad, mean_psi=mp, mean_psi_error=mpe, grid=grid_meta, path=path,
        converged=bool(H.converged and I.converged and J.converged),
        dropped_mass=float(dropped), label=label,
    )


# ---------------------------------------------------------------------------
# analytic path


def _factor_integrals(factor, x: np.ndarray, h: float, split: float | None) -> dict:
    """1D integrals of the factor's integrands on nodes ``x``.

    For a one-sided factor the interval from the edge to ``split`` is
    integrated adaptively (it holds the ``x^p log x`` and ``x^(p-2)``
    behaviour that defeats Simpson), the rest by Simpson on the nodes.
    """
    integrands = {
        "m": lambda t: factor.pdf(t),
        "h": lambda t: factor.potential(t) * factor.pdf(t),
        "i": lambda t: factor.gradient(t) ** 2 * factor.pdf(t),
        "j": lambda t: factor.hessian(t) ** 2 * factor.pdf(t),
        "s": lambda t: factor.gradient(t) * factor.pdf(t),
    }
    skip = set()
    if not _edge_ok(factor.edge_power, 1.0):
        skip.add("i")
    if not _edge_ok(factor.edge_power, 3.0):
        skip.add("j")
    start = 0
    if split is not None:
        start = int(round((split - x[0]) / h))
    xs = x[start:]
    f = factor.pdf(xs)
    pos = f > 0
    out = {}
    for key, fn in integrands.items():
        if key in skip:
            out[key] = math.inf
            continue
        with np.errstate(all="ignore"):
            arr = np.where(pos, fn(xs), 0.0)
        value = _numerics.integrate(arr, h)
        if start:
            head, _ = integrate.quad(
                lambda t: float(fn(t)), x[0], xs[0], epsabs=1e-15, epsrel=1e-13, limit=200
            )
            value += head
        out[key] = value
    return out


def _analytic_level(d: AnalyticDensity, axes, spacing, splits) -> dict:
    parts = [
        _factor_integrals(fac, x, h, sp)
        for fac, x, h, sp in zip(d.factors, axes, spacing, splits)
    ]
    n = d.dim
    H = sum(p["h"] / p["m"] + math.log(p["m"]) for p in parts)
    I_axis = [p["i"] / p["m"] for p in parts]
    J_axis = [p["j"] / p["m"] for p in parts]
    s_axis = [p["s"] / p["m"] for p in parts]
    mp = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            mp[i, j] = I_axis[i] if i == j else s_axis[i] * s_axis[j]
    return {"H": H, "I": float(sum(I_axis)), "J": float(sum(J_axis)), "mean_psi": mp}

def _edge_ok(p, threshold) -> bool:
    return p is None or p > threshold


def _analytic_axes(d: AnalyticDensity, grid_spec) -> tuple[list, tuple]:
    spec = GridSpec.coerce(grid_spec)
    h = float(spec.spacing) if spec.spacing is not None else default_spacing(d)
    std_min = float(np.min(d.std))
    if h > std_min / 10.0:
        raise ResolutionError(f"spacing {h} exceeds sigma_min/10 = {std_min / 10.0:.4g}")
    axes = []
    for factor in d.factors:
        lo, count, _ = _axis_box(factor, h, spec)
        # Odd node counts keep the coarse companions on pure Simpson rules.
        count += (count + 1) % 4 if count % 4 != 1 else 0
        axes.append(lo + h * np.arange(count))
    return axes, (h,) * d.dim


def _analyze_analytic(d: AnalyticDensity, grid_spec=None) -> FunctionalReport:
    axes, spacing = _analytic_axes(d, grid_spec)
    # The adaptive edge interval ends on a node of every level.
    splits = [
        float(a[EDGE_NODES]) if fac.one_sided and a[0] == fac.loc else None
        for fac, a in zip(d.factors, axes)
    ]
    levels = []
    for step in (1, 2, 4):
        levels.append(_analytic_level(
            d, [a[::step] for a in axes], tuple(h * step for h in spacing), splits
        ))
    meta = {
        "spacing": list(spacing),
        "extent": [[float(a[0]), float(a[-1])] for a in axes],
    }
    return _assemble(levels, d.dim, meta, "analytic", 0.0, d.label())


# ---------------------------------------------------------------------------
# grid path


def _guard_mask(g: GridDensity) -> np.ndarray:
    """Exclude nodes next to truncated boundaries (nonzero boundary values).

    A lower boundary on a true support edge is exempt: the zero padding of
    the stencils is then the correct extension.
    """
    v = g.values
    mask = np.ones(v.shape, dtype=bool)
    for axis in range(v.ndim):
        m = v.shape[axis]
        for side in (0, m - 1):
            if side == 0 and g.edge_powers[axis] is not None:
                continue
            boundary = np.take(v, side, axis=axis)
            if np.any(boundary > 0):
                sl = [slice(None)] * v.ndim
                sl[axis] = slice(0, EDGE_GUARD) if side == 0 else slice(m - EDGE_GUARD, m)
                mask[tuple(sl)] = False
    return mask


def _extrapolation_weights(m: int) -> np.ndarray:
    """Cubic Lagrange weights mapping nodes ``m..m+3`` to nodes ``0..m-1``."""
    w = np.zeros((m, 4))
    for j in range(m):
        t = j - m
        for k in range(4):
            others = [l for l in range(4) if l != k]
            w[j, k] = np.prod([(t - l) / (k - l) for l in others])
    return w


_EDGE_W = _extrapolation_weights(EDGE_PATCH)


def _patch_edges(arr: np.ndarray, edge_axes) -> np.ndarray:
    """Replace an integrand's first nodes on true support edges by extrapolation.

    Samples and stencils there are relatively inaccurate (the density is a
    tiny power of the distance to the edge), which the score integrands
    amplify; the integrands themselves are smooth up to the edge.
    """
    m = EDGE_PATCH
    for axis in edge_axes:
        if arr.shape[axis] < m + 4:
            continue
        a = np.moveaxis(arr, axis, 0).copy()
        a[:m] = np.tensordot(_EDGE_W, a[m:m + 4], axes=([1], [0]))
        arr = np.moveaxis(a, 0, axis)
    return arr


def _grid_level(values: np.ndarray, spacing, guard: np.ndarray, fisher_ok, prod_ok, floor,
                edge_axes=()):
    v = values
    n = v.ndim
    vmax = float(v.max())
    keep = (v >= floor * vmax) & guard
    dropped = _numerics.integrate(np.where(keep, 0.0, v), spacing)
    vk = np.where(keep, v, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        H = -_numerics.integrate(_patch_edges(np.where(keep, v * np.log(vk), 0.0), edge_axes), spacing)
        grads = [_numerics.diff1(v, spacing[i], axis=i) for i in range(n)]
        mp = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                val = _numerics.integrate(
                    _patch_edges(np.where(keep, grads[i] * grads[j] / vk, 0.0), edge_axes), spacing
                )
                mp[i, j] = mp[j, i] = val
        J = 0.0
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    fij = _numerics.diff2(v, spacing[i], axis=i)
                else:
                    fij = _numerics.diff1(grads[i], spacing[j], axis=j)
                psi = fij / vk - grads[i] * grads[j] / (vk * vk)
                term = _numerics.integrate(
                    _patch_edges(np.where(keep, psi * psi * v, 0.0), edge_axes), spacing
                )
                J += term if i == j else 2.0 * term
    I = float(np.trace(mp))
    if not fisher_ok:
        I = math.inf
        mp = mp.copy()
        np.fill_diagonal(mp, math.inf)
    if not prod_ok:
        J = math.inf
    return {"H": H, "I": I, "J": J, "mean_psi": mp}, dropped


def _analyze_grid(g: GridDensity, companions=None) -> FunctionalReport:
    if abs(g.mass - 1.0) > MASS_TOL:
        raise ContractError(f"density is not normalized (mass {g.mass:.12g})")
    fisher_ok, prod_ok = g.fisher_finite, g.production_finite
    grids = [g]
    if companions is None:
        for step in (2, 4):
            if min(g.shape) >= 5 * step:
                grids.append(g.subsample(step))
    else:
        grids.extend(companions)
    levels = []
    dropped0 = 0.0
    for k, gg in enumerate(grids):
        level, dropped = _grid_level(
            gg.values, gg.spacing, _guard_mask(gg), fisher_ok, prod_ok, gg.floor,
            [ax for ax, p in enumerate(gg.edge_powers) if p is not None],
        )
        levels.append(level)
        if k == 0:
            dropped0 = dropped
    meta = {"spacing": list(g.spacing), "extent": [list(e) for e in g.extent]}
    return _assemble(levels, g.dim, meta, "grid", dropped0, g.label, _rounding_floor(g))


def _rounding_floor(g: GridDensity) -> dict:
    """Differencing amplifies rounding by (scale/h) for I and (scale/h)**2 for J."""
    _, std = g.moments()
    r = float(np.max(std)) / min(g.spacing)
    eps = ROUNDING_FACTOR * np.finfo(float).eps
    return {"I": eps * r, "J": eps * r * r}


# ---------------------------------------------------------------------------
# public API


def analyze(d, grid_spec=None, companions=None) -> FunctionalReport:
    """All functionals of ``d`` in one pass.

    Parameters
    ----------
    d : AnalyticDensity or GridDensity
    grid_spec : GridSpec or dict, optional
        Quadrature grid for analytic densities.
    companions : sequence of GridDensity, optional
        The same density computed independently at spacings ``2h`` and
        ``4h`` (e.g. a convolution of coarser samples).  Without them the
        grid path subsamples ``d`` itself, which captures quadrature and
        differencing error but not upstream sampling error.
    """
    if isinstance(d, AnalyticDensity):
        return _analyze_analytic(d, grid_spec)
    if isinstance(d, GridDensity):
        return _analyze_grid(d, companions)
    raise ContractError(f"unsupported density type {type(d).__name__}")


def entropy(d, grid_spec=None) -> float:
    """Shannon entropy ``-int f log f`` in nats."""
    return analyze(d, grid_spec).H


def fisher(d, grid_spec=None) -> float:
    """Fisher information ``int |grad f|^2 / f``."""
    return analyze(d, grid_spec).I


def fisher_production(d, grid_spec=None) -> float:
    """``J = sum_ij int (d_ij log f)^2 f``."""
    return analyze(d, grid_spec).J


def entropy_power(d, grid_spec=None) -> float:
    """``N = exp(2H/n)``."""
    return analyze(d, grid_spec).N


def score_moments(d, grid_spec=None) -> dict:
    """``mean_psi[i][j] = int d_i f d_j f / f`` and ``mean_psi_sq = J``."""
    rep = analyze(d, grid_spec)
    return {"mean_psi": rep.mean_psi, "mean_psi_sq": rep.J}


def _as_report(d, grid_spec=None) -> FunctionalReport:
    return d if isinstance(d, FunctionalReport) else analyze(d, grid_spec)


def cross_h_report(f, g, grid_spec=None) -> Estimate:
    """Cross functional with its propagated error; accepts densities or reports."""
    rf, rg = _as_report(f, grid_spec), _as_report(g, grid_spec)
    if rf.dim != rg.dim:
        raise ContractError(f"dimension mismatch: {rf.dim} vs {rg.dim}")
    a, b = rf.mean_psi, rg.mean_psi
    value = float(np.sum(a * b))
    with np.errstate(invalid="ignore"):
        terms = np.where(np.isfinite(a * b), (np.abs(a) * rg.mean_psi_error) ** 2
                         + (np.abs(b) * rf.mean_psi_error) ** 2, 0.0)
    return Estimate(value, float(math.sqrt(np.sum(terms))))


def cross_h(f, g, grid_spec=None) -> float:
    """``H(f, g) = sum_ij <Psi_ij>_f <Psi_ij>_g``; in 1D equals ``I(f) I(g)``."""
    return cross_h_report(f, g, grid_spec).value


def scores(d, x) -> ScoreSample:
    """Scores at point ``x``; closed form for analytic densities, differences on grids."""
    if isinstance(d, AnalyticDensity):
        x = np.asarray(x, dtype=float)
        grad = np.atleast_1d(d.gradient(x))
        hess = np.atleast_2d(d.hessian(x))
        return ScoreSample(x, -grad, hess)
    if isinstance(d, GridDensity):
        idx = tuple(
            int(round((xi - o) / h)) for xi, o, h in zip(np.atleast_1d(x), d.origin, d.spacing)
        )
        v = d.values
        n = d.dim
        grads = [_numerics.diff1(v, d.spacing[i], axis=i) for i in range(n)]
        f0 = v[idx]
        if not f0 > 0:
            raise ContractError("scores are undefined where the density vanishes")
        rho = np.array([g[idx] / f0 for g in grads])
        psi = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                fij = (_numerics.diff2(v, d.spacing[i], axis=i) if i == j
                       else _numerics.diff1(grads[i], d.spacing[j], axis=j))
                psi[i, j] = -(fij[idx] / f0 - rho[i] * rho[j])
        psi = 0.5 * (psi + psi.T)
        xs = np.array([o + h * k for o, h, k in zip(d.origin, d.spacing, idx)])
        return ScoreSample(xs, rho, psi)
    raise ContractError(f"unsupported density type {type(d).__name__}")
