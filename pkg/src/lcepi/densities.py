"""Log-concave densities: closed-form families, grid samples, and transforms.

An :class:`AnalyticDensity` is ``f = exp(-Phi)`` with ``Phi`` convex and its
first two derivatives known in closed form.  Densities in dimension two are
products of one-dimensional factors (the isotropic Gaussian included), so the
Hessian of ``Phi`` is diagonal.  A :class:`GridDensity` is a normalized sample
on a uniform tensor grid and is what convolution and heat flow operate on.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats

from . import _numerics
from .errors import (
    ContractError,
    LogConcavityError,
    ParameterDomainError,
    ResolutionError,
    TruncationError,
)

__all__ = [
    "Family",
    "Factor",
    "AnalyticDensity",
    "GridDensity",
    "GridSpec",
    "LogConcavityVerdict",
    "make_gaussian",
    "make_family",
    "make_product",
    "discretize",
    "discretize_on",
    "dilate",
    "translate",
    "recenter",
    "check_log_concavity",
    "gaussian_mixture",
    "default_spacing",
]

MAX_DIM = 2
TRUNCATION_DEFICIT = 1e-10
LOG_CONCAVITY_TOL = 1e-9


class Family(str, enum.Enum):
    GAUSSIAN = "Gaussian"
    GAMMA = "Gamma"
    WEIBULL = "Weibull"
    GUMBEL = "Gumbel"
    LOGISTIC = "Logistic"
    PRODUCT = "Product"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, cls):
            return name
        for member in cls:
            if member.value.lower() == str(name).lower():
                return member
        raise ParameterDomainError(f"unknown family {name!r}")


# Parameter names and defaults of the standardized one-dimensional families.
_PARAMS = {
    Family.GAUSSIAN: {"sigma": 1.0},  # variance, as in M_sigma
    Family.GAMMA: {"shape": None, "rate": 1.0},
    Family.WEIBULL: {"shape": None, "scale": 1.0},
    Family.GUMBEL: {"scale": 1.0},
    Family.LOGISTIC: {"scale": 1.0},
}


def _check_dim(n) -> int:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_DIM:
        raise ParameterDomainError(f"dimension must be 1 or 2, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class Factor:
    """One-dimensional log-concave family member, located at ``loc``.

    For the one-sided families (Gamma, Weibull) the support is ``(loc, inf)``.
    """

    family: Family
    params: Mapping[str, float]
    loc: float = 0.0

    def __post_init__(self):
        fam = Family.parse(self.family)
        if fam is Family.PRODUCT:
            raise ParameterDomainError("a factor must be a one-dimensional family")
        spec = _PARAMS[fam]
        unknown = set(self.params) - set(spec)
        if unknown:
            raise ParameterDomainError(f"{fam.value}: unknown parameters {sorted(unknown)}")
        params = {}
        for name, default in spec.items():
            value = self.params.get(name, default)
            if value is None:
                raise ParameterDomainError(f"{fam.value}: parameter {name!r} is required")
            value = float(value)
            if not math.isfinite(value) or value <= 0:
                raise ParameterDomainError(f"{fam.value}: {name} must be positive, got {value}")
            params[name] = value
        if fam in (Family.GAMMA, Family.WEIBULL) and params["shape"] < 1.0:
            raise LogConcavityError(
                f"{fam.value} shape {params['shape']} < 1 is not log-concave"
            )
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "loc", float(self.loc))

    # -- closed forms -------------------------------------------------------

    def _z(self, x):
        fam, p = self.family, self.params
        x = np.asarray(x, dtype=float) - self.loc
        if fam is Family.GAMMA:
            return x * p["rate"]
        if fam is Family.GAUSSIAN:
            return x
        return x / p["scale"]

    def _inside(self, z):
        # Shape one keeps a finite, nonzero density at the edge itself.
        return z >= 0 if self.params["shape"] == 1.0 else z > 0

    def potential(self, x):
        fam, p = self.family, self.params
        z = self._z(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if fam is Family.GAUSSIAN:
                s = p["sigma"]
                return z * z / (2.0 * s) + 0.5 * math.log(2.0 * math.pi * s)
            if fam is Family.GAMMA:
                k = p["shape"]
                log_term = (k - 1.0) * np.log(z) if k != 1.0 else 0.0
                out = z - log_term + special.gammaln(k) - math.log(p["rate"])
                return np.where(self._inside(z), out, np.inf)
            if fam is Family.WEIBULL:
                k = p["shape"]
                log_term = (k - 1.0) * np.log(z) if k != 1.0 else 0.0
                out = np.power(np.abs(z), k) - log_term - math.log(k) + math.log(p["scale"])
                return np.where(self._inside(z), out, np.inf)
            if fam is Family.GUMBEL:
                return z + np.exp(-z) + math.log(p["scale"])
            # logistic: |z| + 2 log(1 + e^-|z|) is the overflow-safe symmetric form
            a = np.abs(z)
            return a + 2.0 * np.log1p(np.exp(-a)) + math.log(p["scale"])

    def gradient(self, x):
        fam, p = self.family, self.params
        z = self._z(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if fam is Family.GAUSSIAN:
                return z / p["sigma"]
            if fam is Family.GAMMA:
                k, b = p["shape"], p["rate"]
                inner = (k - 1.0) / z if k != 1.0 else 0.0
                return np.where(self._inside(z), b * (1.0 - inner), np.nan)
            if fam is Family.WEIBULL:
                k, lam = p["shape"], p["scale"]
                inner = (k - 1.0) / z if k != 1.0 else 0.0
                out = (k * np.power(np.abs(z), k - 1.0) - inner) / lam
                return np.where(self._inside(z), out, np.nan)
            if fam is Family.GUMBEL:
                return (1.0 - np.exp(-z)) / p["scale"]
            return np.tanh(z / 2.0) / p["scale"]

    def hessian(self, x):
        fam, p = self.family, self.params
        z = self._z(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if fam is Family.GAUSSIAN:
                return np.full_like(z, 1.0 / p["sigma"])
            if fam is Family.GAMMA:
                k, b = p["shape"], p["rate"]
                inner = (k - 1.0) / (z * z) if k != 1.0 else 0.0
                return np.where(self._inside(z), b * b * inner, np.nan)
            if fam is Family.WEIBULL:
                k, lam = p["shape"], p["scale"]
                inner = (k - 1.0) / (z * z) if k != 1.0 else 0.0
                out = (k * (k - 1.0) * np.power(np.abs(z), k - 2.0) + inner) / lam**2
                return np.where(self._inside(z), out, np.nan)
            if fam is Family.GUMBEL:
                return np.exp(-z) / p["scale"] ** 2
            return 0.5 / (np.cosh(z / 2.0) ** 2 * p["scale"] ** 2)

    def pdf(self, x):
        with np.errstate(over="ignore"):
            return np.exp(-self.potential(x))

    # -- moments, support, tails -------------------------------------------

    @property
    def one_sided(self) -> bool:
        return self.family in (Family.GAMMA, Family.WEIBULL)

    @property
    def support_lo(self) -> float:
        return self.loc if self.one_sided else -math.inf

    @property
    def edge_power(self) -> float | None:
        """Exponent p of the power law ``f ~ c (x - loc)^p`` at the support edge."""
        return self.params["shape"] - 1.0 if self.one_sided else None

    def scipy(self):
        fam, p = self.family, self.params
        if fam is Family.GAUSSIAN:
            return stats.norm(loc=self.loc, scale=math.sqrt(p["sigma"]))
        if fam is Family.GAMMA:
            return stats.gamma(a=p["shape"], loc=self.loc, scale=1.0 / p["rate"])
        if fam is Family.WEIBULL:
            return stats.weibull_min(c=p["shape"], loc=self.loc, scale=p["scale"])
        if fam is Family.GUMBEL:
            return stats.gumbel_r(loc=self.loc, scale=p["scale"])
        return stats.logistic(loc=self.loc, scale=p["scale"])

    @property
    def mean(self) -> float:
        return float(self.scipy().mean())

    @property
    def std(self) -> float:
        return float(self.scipy().std())

    def dilate(self, alpha: float) -> "Factor":
        fam, p = self.family, dict(self.params)
        if fam is Family.GAUSSIAN:
            p["sigma"] = p["sigma"] / alpha**2
        elif fam is Family.GAMMA:
            p["rate"] = p["rate"] * alpha
        else:
            p["scale"] = p["scale"] / alpha
        return Factor(fam, p, self.loc / alpha)

    def descriptor(self) -> dict:
        return {"family": self.family.value, "params": dict(self.params), "loc": self.loc}


def _edge_fisher_finite(p: float | None) -> bool:
    # p == 0 is a jump of the density on the line: infinite Fisher information.
    return p is None or p > 1.0


def _edge_production_finite(p: float | None) -> bool:
    return p is None or p > 3.0


@dataclass(frozen=True)
class AnalyticDensity:
    """Log-concave density ``exp(-Phi)`` with closed-form derivatives.

    Built by :func:`make_gaussian`, :func:`make_family` or
    :func:`make_product`; immutable.
    """

    family: Family
    factors: tuple[Factor, ...]
    name: str | None = None

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def params(self) -> dict:
        if self.family is Family.PRODUCT:
            return {"factors": [f.descriptor() for f in self.factors]}
        return dict(self.factors[0].params)

    @property
    def loc(self) -> np.ndarray:
        return np.array([f.loc for f in self.factors])

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            if x.ndim >= 1 and x.shape[-1:] == (1,) and x.ndim > 1:
                x = x[..., 0]
            return [x]
        if x.shape[-1] != self.dim:
            raise ContractError(f"points must have trailing dimension {self.dim}")
        return [x[..., i] for i in range(self.dim)]

    def potential(self, x):
        """Phi(x); ``x`` has shape ``(...,)`` in 1D and ``(..., n)`` otherwise."""
        parts = self._split(x)
        return sum(f.potential(xi) for f, xi in zip(self.factors, parts))

    def pdf(self, x):
        with np.errstate(over="ignore"):
            return np.exp(-self.potential(x))

    def gradient(self, x):
        parts = self._split(x)
        grads = [f.gradient(xi) for f, xi in zip(self.factors, parts)]
        if self.dim == 1:
            return grads[0]
        return np.stack(grads, axis=-1)

    def hessian(self, x):
        parts = self._split(x)
        diag = [f.hessian(xi) for f, xi in zip(self.factors, parts)]
        if self.dim == 1:
            return diag[0]
        shape = diag[0].shape + (self.dim, self.dim)
        out = np.zeros(shape)
        for i, d in enumerate(diag):
            out[..., i, i] = d
        return out

    @property
    def mean(self) -> np.ndarray:
        return np.array([f.mean for f in self.factors])

    @property
    def std(self) -> np.ndarray:
        return np.array([f.std for f in self.factors])

    @property
    def edge_powers(self) -> tuple:
        return tuple(f.edge_power for f in self.factors)

    @property
    def fisher_finite(self) -> bool:
        return all(_edge_fisher_finite(p) for p in self.edge_powers)

    @property
    def production_finite(self) -> bool:
        return all(_edge_production_finite(p) for p in self.edge_powers)

    def descriptor(self) -> dict:
        out = {"family": self.family.value, "dim": self.dim}
        if self.family is Family.PRODUCT:
            out["factors"] = [f.descriptor() for f in self.factors]
        else:
            out["params"] = dict(self.factors[0].params)
            out["loc"] = [f.loc for f in self.factors]
        if self.name:
            out["name"] = self.name
        return out

    def label(self) -> str:
        if self.name:
            return self.name
        if self.family is Family.PRODUCT:
            return "Product(" + ", ".join(f.family.value for f in self.factors) + ")"
        body = ",".join(f"{k}={v:g}" for k, v in self.factors[0].params.items())
        return f"{self.family.value}({body})" + (f"[n={self.dim}]" if self.dim > 1 else "")


def make_gaussian(sigma: float, n: int = 1, loc=None) -> AnalyticDensity:
    """Centred Gaussian ``M_sigma`` in dimension ``n`` with covariance ``sigma * I``."""
    n = _check_dim(n)
    try:
        sigma = float(sigma)
    except (TypeError, ValueError):
        raise ParameterDomainError(f"sigma must be a real number, got {sigma!r}") from None
    if not math.isfinite(sigma) or sigma <= 0:
        raise ParameterDomainError(f"sigma must be positive, got {sigma}")
    locs = np.zeros(n) if loc is None else np.broadcast_to(np.asarray(loc, float), (n,))
    factors = tuple(Factor(Family.GAUSSIAN, {"sigma": sigma}, float(m)) for m in locs)
    return AnalyticDensity(Family.GAUSSIAN, factors)


def make_family(family, params: Mapping[str, float] | None = None, n: int = 1, loc=None) -> AnalyticDensity:
    """Member of a named family; in 2D the product of two identical factors.

    ``params`` follow the family: Gaussian ``sigma`` (variance), Gamma
    ``shape``/``rate``, Weibull ``shape``/``scale``, Gumbel and Logistic
    ``scale``.  Products with distinct factors come from :func:`make_product`.
    """
    fam = Family.parse(family)
    n = _check_dim(n)
    params = dict(params or {})
    if fam is Family.PRODUCT:
        raise ParameterDomainError("use make_product for Product densities")
    if fam is Family.GAUSSIAN:
        return make_gaussian(params.get("sigma", 1.0), n, loc)
    locs = np.zeros(n) if loc is None else np.broadcast_to(np.asarray(loc, float), (n,))
    factors = tuple(Factor(fam, params, float(m)) for m in locs)
    return AnalyticDensity(fam, factors)


def make_product(factors: Sequence) -> AnalyticDensity:
    """Product density from one-dimensional factors (``Factor`` or 1D densities)."""
    out = []
    for f in factors:
        if isinstance(f, AnalyticDensity):
            out.extend(f.factors)
        elif isinstance(f, Factor):
            out.append(f)
        else:
            raise ContractError(f"cannot build a product factor from {f!r}")
    _check_dim(len(out))
    return AnalyticDensity(Family.PRODUCT, tuple(out))


# ---------------------------------------------------------------------------
# Grid densities


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density sampled on a uniform tensor grid, normalized to unit mass.

    ``edge_powers`` records, per axis, the exponent of a power-law support
    edge at the lower grid boundary (``None`` for full support); it tracks
    exactly which score functionals diverge.  In 2D, ``factors`` holds the
    per-axis 1D samples when the density is a tensor product, which keeps
    convolution and heat flow separable.  ``floor`` is the relative value
    below which samples count as zero in score integrands.
    """

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    values: np.ndarray
    edge_powers: tuple = ()
    label: str = "grid"
    factors: tuple | None = None
    floor: float = _numerics.FLOOR_REL

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        n = values.ndim
        _check_dim(n)
        origin = tuple(float(o) for o in np.broadcast_to(np.asarray(self.origin, float), (n,)))
        spacing = tuple(float(h) for h in np.broadcast_to(np.asarray(self.spacing, float), (n,)))
        if any(not (h > 0 and math.isfinite(h)) for h in spacing):
            raise ContractError(f"spacing must be positive, got {spacing}")
        if not np.all(np.isfinite(values)):
            raise ContractError("grid values must be finite")
        if np.any(values < 0):
            raise ContractError("grid values must be nonnegative")
        values.setflags(write=False)
        edges = tuple(self.edge_powers) if self.edge_powers else (None,) * n
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "edge_powers", edges)

    @classmethod
    def normalized(cls, origin, spacing, values, **kw) -> "GridDensity":
        """Build and rescale to unit Simpson mass."""
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        mass = _numerics.integrate(values, spacing)
        if not mass > 0:
            raise ContractError("grid values carry no mass")
        return cls(origin, spacing, values / mass, **kw)

    @classmethod
    def from_factors(cls, origin, spacing, factors, **kw) -> "GridDensity":
        """Tensor product of per-axis 1D samples, each normalized to unit mass."""
        spacing = tuple(np.broadcast_to(np.asarray(spacing, float), (len(factors),)))
        normed = []
        for v, h in zip(factors, spacing):
            v = np.clip(np.asarray(v, dtype=float), 0.0, None)
            mass = _numerics.integrate(v, h)
            if not mass > 0:
                raise ContractError("grid values carry no mass")
            v = v / mass
            v.setflags(write=False)
            normed.append(v)
        values = normed[0]
        for extra in normed[1:]:
            values = np.multiply.outer(values, extra)
        if len(normed) == 1:
            return cls(origin, spacing, values, **kw)
        return cls(origin, spacing, values, factors=tuple(normed), **kw)

    def _rebuild(self, origin=None, spacing=None, values=None, factors=None, label=None):
        kw = dict(edge_powers=self.edge_powers, label=label or self.label, floor=self.floor)
        origin = self.origin if origin is None else origin
        spacing = self.spacing if spacing is None else spacing
        if factors is not None:
            return GridDensity.from_factors(origin, spacing, factors, **kw)
        return GridDensity.normalized(origin, spacing, values, **kw)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def mass(self) -> float:
        return _numerics.integrate(self.values, self.spacing)

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(m) for o, h, m in zip(self.origin, self.spacing, self.shape)]

    @property
    def extent(self) -> list[tuple[float, float]]:
        return [(float(a[0]), float(a[-1])) for a in self.axes()]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape`` in 1D or ``shape + (n,)``."""
        axes = self.axes()
        if self.dim == 1:
            return axes[0]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def marginal(self, axis: int) -> "GridDensity":
        if self.dim == 1:
            return self
        if self.factors is not None:
            return GridDensity.normalized(
                (self.origin[axis],), (self.spacing[axis],), self.factors[axis],
                edge_powers=(self.edge_powers[axis],), label=f"{self.label}|axis{axis}",
            )
        other = 1 - axis
        w = _numerics.simpson_weights(self.shape[other], self.spacing[other])
        vals = np.tensordot(self.values, w, axes=([other], [0]))
        return GridDensity.normalized(
            (self.origin[axis],), (self.spacing[axis],), vals,
            edge_powers=(self.edge_powers[axis],), label=f"{self.label}|axis{axis}",
        )

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis mean and standard deviation."""
        means, stds = [], []
        for i in range(self.dim):
            m = self.marginal(i)
            x = m.axes()[0]
            mu = _numerics.integrate(x * m.values, m.spacing)
            var = _numerics.integrate((x - mu) ** 2 * m.values, m.spacing)
            means.append(mu)
            stds.append(math.sqrt(max(var, 0.0)))
        return np.array(means), np.array(stds)

    def subsample(self, step: int) -> "GridDensity":
        """Every ``step``-th node from the origin (spacing ``step * h``), renormalized."""
        spacing = tuple(h * step for h in self.spacing)
        if self.factors is not None:
            return self._rebuild(spacing=spacing, factors=[v[::step] for v in self.factors])
        sl = tuple(slice(None, None, step) for _ in range(self.dim))
        return self._rebuild(spacing=spacing, values=self.values[sl])

    def with_values(self, values, label=None) -> "GridDensity":
        return GridDensity.normalized(
            self.origin, self.spacing, values, edge_powers=self.edge_powers,
            label=label or self.label, floor=self.floor,
        )

    def evaluate_like(self, density: "AnalyticDensity") -> np.ndarray:
        """Sample an analytic density at this grid's nodes."""
        return density.pdf(self.points())

    @property
    def fisher_finite(self) -> bool:
        return all(_edge_fisher_finite(p) for p in self.edge_powers)

    @property
    def production_finite(self) -> bool:
        return all(_edge_production_finite(p) for p in self.edge_powers)

    # -- CSV ------------------------------------------------------------------

    def to_csv(self, path=None, t: float | None = None) -> str:
        """Serialize as ``x[,y],value`` rows in row-major order."""
        buf = io.StringIO()
        if t is not None:
            buf.write(f"# t={t!r}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "value"] if self.dim == 1 else ["x", "y", "value"])
        axes = self.axes()
        if self.dim == 1:
            for x, v in zip(axes[0], self.values):
                writer.writerow([repr(float(x)), repr(float(v))])
        else:
            for i, x in enumerate(axes[0]):
                for j, y in enumerate(axes[1]):
                    writer.writerow([repr(float(x)), repr(float(y)), repr(float(self.values[i, j]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> tuple["GridDensity", float | None]:
        """Parse the CSV format; returns the density and the ``t=`` value if present."""
        if hasattr(source, "read"):
            text = source.read()
        elif isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source) as fh:
                text = fh.read()
        t = None
        lines = []
        for line in text.splitlines():
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("t="):
                    t = float(body[2:])
                continue
            if line.strip():
                lines.append(line)
        reader = csv.reader(lines)
        header = next(reader)
        if header not in (["x", "value"], ["x", "y", "value"]):
            raise ContractError(f"unexpected CSV header {header}")
        rows = np.array([[float(c) for c in row] for row in reader])
        n = len(header) - 1
        coords = [np.unique(rows[:, i]) for i in range(n)]
        shape = tuple(len(c) for c in coords)
        if rows.shape[0] != int(np.prod(shape)):
            raise ContractError("CSV rows do not form a full tensor grid")
        spacing = []
        for c in coords:
            d = np.diff(c)
            if len(d) == 0 or not np.allclose(d, d[0], rtol=1e-9, atol=0):
                raise ContractError("CSV grid spacing is not uniform")
            spacing.append(float(d.mean()))
        values = rows[:, -1].reshape(shape)
        origin = tuple(float(c[0]) for c in coords)
        return cls(origin, tuple(spacing), values), t


@dataclass(frozen=True)
class GridSpec:
    """Grid request: spacing (default per density), half-width in standard
    deviations, and tail quantile each side."""

    spacing: float | None = None
    half_width: float = 8.0
    quantile: float = 1e-12

    @classmethod
    def coerce(cls, spec) -> "GridSpec":
        if spec is None:
            return cls()
        if isinstance(spec, cls):
            return spec
        spec = dict(spec)
        return cls(
            spacing=spec.get("spacing"),
            half_width=float(spec.get("half_width_in_std_devs", spec.get("half_width", 8.0))),
            quantile=float(spec.get("quantile", 1e-12)),
        )


def default_spacing(d) -> float:
    """Default grid spacing: ``std/100`` capped at 0.01 in 1D, ``std/20`` capped at 0.05 in 2D."""
    std_min = float(np.min(d.std))
    if d.dim == 1:
        return min(0.01, std_min / 100.0)
    return min(0.05, std_min / 20.0)


def _axis_box(factor: Factor, h: float, spec: GridSpec) -> tuple[float, int, float]:
    dist = factor.scipy()
    mean, std = factor.mean, factor.std
    hi = max(float(dist.isf(spec.quantile)), mean + spec.half_width * std)
    if factor.one_sided:
        lo = factor.loc
        deficit = 0.0
    else:
        lo = min(float(dist.ppf(spec.quantile)), mean - spec.half_width * std)
        lo = math.floor(lo / h) * h
    count = int(math.ceil((hi - lo) / h - 1e-9)) + 1
    hi_node = lo + (count - 1) * h
    deficit = float(dist.sf(hi_node)) + (0.0 if factor.one_sided else float(dist.cdf(lo)))
    return lo, count, deficit


def discretize(d: AnalyticDensity, grid_spec=None, check_resolution: bool = True) -> GridDensity:
    """Sample ``d`` on a tensor grid covering its tails and normalize.

    ``check_resolution=False`` skips the spacing test; it is meant for the
    coarse companion grids of error estimates only.

    Raises
    ------
    ResolutionError
        If the spacing exceeds a tenth of the smallest standard deviation.
    TruncationError
        If the mass outside the grid exceeds 1e-10.
    """
    if isinstance(d, GridDensity):
        return d
    spec = GridSpec.coerce(grid_spec)
    h = float(spec.spacing) if spec.spacing is not None else default_spacing(d)
    if not h > 0:
        raise ParameterDomainError(f"spacing must be positive, got {h}")
    std_min = float(np.min(d.std))
    if check_resolution and h > std_min / 10.0:
        raise ResolutionError(f"spacing {h} exceeds sigma_min/10 = {std_min / 10.0:.4g}")
    origin, shape, inside = [], [], 1.0
    for factor in d.factors:
        lo, count, deficit = _axis_box(factor, h, spec)
        origin.append(lo)
        shape.append(count)
        inside *= 1.0 - deficit
    if 1.0 - inside > TRUNCATION_DEFICIT:
        raise TruncationError(f"truncation deficit {1.0 - inside:.3g} exceeds {TRUNCATION_DEFICIT}")
    return discretize_on(d, tuple(origin), (h,) * d.dim, tuple(shape))


def discretize_on(d: AnalyticDensity, origin, spacing, shape) -> GridDensity:
    """Sample ``d`` at the nodes of an explicit grid and normalize."""
    origin = tuple(np.broadcast_to(np.asarray(origin, float), (d.dim,)))
    spacing = tuple(np.broadcast_to(np.asarray(spacing, float), (d.dim,)))
    shape = tuple(int(s) for s in np.broadcast_to(np.asarray(shape), (d.dim,)))
    per_axis = []
    for factor, o, h, m in zip(d.factors, origin, spacing, shape):
        per_axis.append(factor.pdf(o + h * np.arange(m)))
    edges = tuple(
        f.edge_power if (f.one_sided and abs(o - f.loc) <= 1e-12 * max(1.0, abs(f.loc))) else None
        for f, o in zip(d.factors, origin)
    )
    return GridDensity.from_factors(origin, spacing, per_axis, edge_powers=edges, label=d.label())


def dilate(d, alpha: float):
    """``f_alpha(x) = alpha^n f(alpha x)``: the law of ``X / alpha``."""
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise ParameterDomainError(f"alpha must be a real number, got {alpha!r}") from None
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ParameterDomainError(f"alpha must be positive, got {alpha}")
    if isinstance(d, AnalyticDensity):
        if alpha == 1.0:
            return d
        return replace(d, factors=tuple(f.dilate(alpha) for f in d.factors))
    if isinstance(d, GridDensity):
        return replace(
            d,
            origin=tuple(o / alpha for o in d.origin),
            spacing=tuple(h / alpha for h in d.spacing),
            values=d.values * alpha**d.dim,
            factors=None if d.factors is None else tuple(v * alpha for v in d.factors),
        )
    raise ContractError(f"cannot dilate {type(d).__name__}")


def translate(d, shift):
    """Density of ``X + shift``."""
    shift = np.broadcast_to(np.asarray(shift, float), (d.dim,))
    if isinstance(d, AnalyticDensity):
        return replace(
            d, factors=tuple(replace(f, loc=f.loc + float(s)) for f, s in zip(d.factors, shift))
        )
    return replace(d, origin=tuple(o + float(s) for o, s in zip(d.origin, shift)))


def recenter(d):
    """Translate to zero mean."""
    mean = d.mean if isinstance(d, AnalyticDensity) else d.moments()[0]
    return translate(d, -np.asarray(mean))


@dataclass(frozen=True)
class LogConcavityVerdict:
    is_log_concave: bool
    worst_violation: float

    def __bool__(self):
        return self.is_log_concave


def check_log_concavity(g: GridDensity, tol: float = LOG_CONCAVITY_TOL) -> LogConcavityVerdict:
    """Discrete midpoint test ``f(x)^2 >= f(x-h) f(x+h) (1 - tol)``.

    Checked at nodes above the relative floor, along the coordinate axes
    and, in 2D, both diagonals.  ``worst_violation`` is the largest
    ``1 - f(x)^2 / (f(x-h) f(x+h))`` (zero if none is positive).
    """
    v = np.asarray(g.values)
    floor = _numerics.FLOOR_REL * float(v.max())
    if v.ndim == 1:
        directions = [(1,)]
    else:
        directions = [(1, 0), (0, 1), (1, 1), (1, -1)]
    worst = 0.0
    for dvec in directions:
        center, minus, plus = _neighbour_views(v, dvec)
        mask = center >= floor
        prod = minus[mask] * plus[mask]
        c2 = center[mask] ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            viol = np.where(prod > 0, 1.0 - c2 / prod, -np.inf)
        if viol.size:
            worst = max(worst, float(np.max(viol)))
    return LogConcavityVerdict(worst <= tol, max(worst, 0.0))


def _neighbour_views(v: np.ndarray, dvec):
    sl_c, sl_m, sl_p = [], [], []
    for step, m in zip(dvec, v.shape):
        if step == 0:
            sl_c.append(slice(None)); sl_m.append(slice(None)); sl_p.append(slice(None))
        elif step == 1:
            sl_c.append(slice(1, m - 1)); sl_m.append(slice(0, m - 2)); sl_p.append(slice(2, m))
        else:
            sl_c.append(slice(1, m - 1)); sl_m.append(slice(2, m)); sl_p.append(slice(0, m - 2))
    return v[tuple(sl_c)], v[tuple(sl_m)], v[tuple(sl_p)]


def gaussian_mixture(centers, sigma: float = 1.0, weights=None, spacing: float = 0.01,
                     half_width: float = 10.0) -> GridDensity:
    """Grid sample of a 1D Gaussian mixture; generally not log-concave."""
    centers = np.asarray(centers, dtype=float)
    weights = np.full(len(centers), 1.0 / len(centers)) if weights is None else np.asarray(weights, float)
    sd = math.sqrt(sigma)
    lo = math.floor((centers.min() - half_width * sd) / spacing) * spacing
    hi = centers.max() + half_width * sd
    x = lo + spacing * np.arange(int(math.ceil((hi - lo) / spacing)) + 1)
    vals = sum(w * stats.norm.pdf(x, c, sd) for w, c in zip(weights, centers))
    return GridDensity.normalized((lo,), (spacing,), vals, label="GaussianMixture")
