"""Noise-aware verdicts for the convolution inequalities between f, g and f*g.

Every verdict is oriented as ``lhs <= rhs``; ``slack = rhs - lhs``.  Both
sides are evaluated in extended reals, because ``I`` or ``J`` may be
infinite on densities with a power-law support edge.  A verdict whose slack
is undefined (``inf - inf``) is *indeterminate* and does not hold.

``noise`` propagates the quadrature errors of all inputs to the slack at
first order (each input perturbed by its error, contributions combined in
quadrature) plus a relative rounding floor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ._numerics import Estimate
from .densities import (
    AnalyticDensity,
    GridDensity,
    GridSpec,
    check_log_concavity,
    default_spacing,
    discretize,
)
from .errors import ContractError, PreconditionError
from .functionals import FunctionalReport, analyze, cross_h_report
from .heatflow import convolve

__all__ = [
    "Name",
    "InequalityVerdict",
    "PairAnalysis",
    "analyze_pair",
    "evaluate",
    "require_log_concave",
    "verify_ine_main",
    "verify_sharp2",
    "verify_epi",
    "verify_blachman_stam",
    "verify_j_geq_i2",
    "verify_mean1",
    "verify_cross_bound",
    "verify_new1_new11_ex1",
    "verify_pair",
    "verify_single",
    "DEFAULT_AB",
]

ROUNDING = 1e-12
EQUALITY_FACTOR = 10.0
DEFAULT_AB = ((1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (1.0, 5.0))


class Name(str, enum.Enum):
    INE_MAIN = "INE_MAIN"
    SHARP2 = "SHARP2"
    EPI = "EPI"
    BLACHMAN_STAM = "BLACHMAN_STAM"
    J_GEQ_I2 = "J_GEQ_I2"
    CROSS_BOUND = "CROSS_BOUND"
    NEW1 = "NEW1"
    NEW11 = "NEW11"
    EX1 = "EX1"
    MEAN1 = "MEAN1"
    STR1 = "STR1"
    SEP = "SEP"


@dataclass(frozen=True)
class InequalityVerdict:
    """Both sides of ``lhs <= rhs`` with the slack measured against noise."""

    name: Name
    lhs: float
    rhs: float
    slack: float
    rel_slack: float
    noise: float
    holds: bool
    near_equality: bool
    determinate: bool = True
    inputs: Mapping = field(default_factory=dict)
    extras: Mapping = field(default_factory=dict)

    @property
    def strict(self) -> bool:
        """Holds with slack exceeding the noise."""
        return self.determinate and self.slack > self.noise

    def to_dict(self) -> dict:
        out = {
            "name": self.name.value,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "rel_slack": self.rel_slack,
            "noise": self.noise,
            "holds": self.holds,
            "near_equality": self.near_equality,
            "determinate": self.determinate,
            "inputs": dict(self.inputs),
        }
        if self.extras:
            out["extras"] = dict(self.extras)
        return out


def _f(x) -> np.float64:
    return np.float64(x)


def _sub(a, b) -> float:
    with np.errstate(invalid="ignore"):
        return float(_f(a) - _f(b))


def _call(fn, vals):
    with np.errstate(all="ignore"):
        return float(fn({k: _f(v) for k, v in vals.items()}))


def evaluate(name, quantities: Mapping[str, Estimate], lhs: Callable, rhs: Callable,
             inputs=None, extras=None) -> InequalityVerdict:
    """Build a verdict from named inputs with errors and two side formulas."""
    name = Name(name)
    vals = {k: e.value for k, e in quantities.items()}
    L, R = _call(lhs, vals), _call(rhs, vals)
    slack = _sub(R, L)
    determinate = not math.isnan(slack)
    var = 0.0
    if determinate and math.isfinite(slack):
        for key, est in quantities.items():
            if not (math.isfinite(est.value) and est.error > 0):
                continue
            pert = dict(vals)
            pert[key] = est.value + est.error
            s2 = _sub(_call(rhs, pert), _call(lhs, pert))
            if math.isfinite(s2):
                var += (s2 - slack) ** 2
    scale = max((abs(v) for v in (L, R) if math.isfinite(v)), default=0.0)
    noise = math.sqrt(var) + ROUNDING * scale
    if not determinate:
        rel = math.nan
    elif math.isinf(slack):
        rel = math.copysign(1.0, slack)
    else:
        denom = max(abs(L), abs(R))
        rel = slack / denom if denom > 0 else 0.0
    holds = determinate and slack >= -noise
    near = determinate and abs(slack) <= EQUALITY_FACTOR * noise
    return InequalityVerdict(
        name=name, lhs=L, rhs=R, slack=slack, rel_slack=rel, noise=noise,
        holds=bool(holds), near_equality=bool(near), determinate=determinate,
        inputs=dict(inputs or {}), extras=dict(extras or {}),
    )


# ---------------------------------------------------------------------------
# pair analysis


def _descriptor(d) -> dict:
    if isinstance(d, AnalyticDensity):
        return d.descriptor()
    return {"grid": d.label, "spacing": list(d.spacing), "dim": d.dim}


def require_log_concave(d) -> None:
    """Raise :class:`PreconditionError` if a grid density fails the midpoint test."""
    if isinstance(d, GridDensity):
        verdict = check_log_concavity(d)
        if not verdict.is_log_concave:
            raise PreconditionError(
                f"{d.label} is not log-concave (worst violation {verdict.worst_violation:.3g})"
            )


@dataclass(frozen=True)
class PairAnalysis:
    """Functionals of ``f``, ``g`` and ``k = f*g`` computed once per pair."""

    f: object
    g: object
    rep_f: FunctionalReport
    rep_g: FunctionalReport
    rep_k: FunctionalReport
    cross: Estimate
    spacing: float

    @property
    def dim(self) -> int:
        return self.rep_f.dim

    def est(self, rep: FunctionalReport, key: str) -> Estimate:
        return Estimate(getattr(rep, key), rep.quad_error[key])

    def inputs(self, **kw) -> dict:
        return {"f": _descriptor(self.f), "g": _descriptor(self.g), **kw}


def _pair_spacing(f, g, spacing):
    if spacing is not None:
        return float(spacing)
    hs = []
    for d in (f, g):
        hs.append(d.spacing[0] if isinstance(d, GridDensity) else default_spacing(d))
    return min(hs)


def _grid_at(d, h: float, level: int) -> GridDensity:
    if isinstance(d, GridDensity):
        step = int(round(h / d.spacing[0]))
        base = d.subsample(step) if step > 1 else d
        return base.subsample(2**level) if level else base
    return discretize(d, GridSpec(spacing=h * 2**level), check_resolution=level == 0)


def _report(d, h: float) -> FunctionalReport:
    if isinstance(d, AnalyticDensity):
        return analyze(d, GridSpec(spacing=h))
    return analyze(d)


def analyze_pair(f, g, spacing: float | None = None) -> PairAnalysis:
    """Convolve at spacings ``h, 2h, 4h`` and collect all functionals.

    The coarse convolutions serve as independent companions for the error
    estimate of ``k``, so the error reflects convolution sampling as well as
    quadrature.
    """
    if f.dim != g.dim:
        raise ContractError(f"dimension mismatch: {f.dim} vs {g.dim}")
    h = _pair_spacing(f, g, spacing)
    ks = [convolve(_grid_at(f, h, lv), _grid_at(g, h, lv)) for lv in range(3)]
    rep_k = analyze(ks[0], companions=ks[1:])
    rep_f, rep_g = _report(f, h), _report(g, h)
    return PairAnalysis(f, g, rep_f, rep_g, rep_k, cross_h_report(rep_f, rep_g), h)


def _pair(f, g, pair, spacing) -> PairAnalysis:
    return pair if pair is not None else analyze_pair(f, g, spacing)


def _check_ab(a, b):
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise ContractError(f"a and b must be positive, got a={a}, b={b}")


# ---------------------------------------------------------------------------
# verdicts


def verify_ine_main(f, g, a: float, b: float, *, pair=None, spacing=None) -> InequalityVerdict:
    """``J(f*g) <= [a^4 J(f) + b^4 J(g) + 2 a^2 b^2 H(f,g)] / (a+b)^4``."""
    _check_ab(a, b)
    require_log_concave(f)
    require_log_concave(g)
    p = _pair(f, g, pair, spacing)
    q = {"Jf": p.est(p.rep_f, "J"), "Jg": p.est(p.rep_g, "J"),
         "Jk": p.est(p.rep_k, "J"), "cross": p.cross}
    s4 = (a + b) ** 4
    return evaluate(
        Name.INE_MAIN, q,
        lambda v: v["Jk"],
        lambda v: (a**4 * v["Jf"] + b**4 * v["Jg"] + 2 * a * a * b * b * v["cross"]) / s4,
        p.inputs(a=a, b=b),
    )


def verify_sharp2(f, g, *, pair=None, spacing=None) -> InequalityVerdict:
    """``1/sqrt(J(f)) + 1/sqrt(J(g)) <= 1/sqrt(J(f*g))``."""
    require_log_concave(f)
    require_log_concave(g)
    p = _pair(f, g, pair, spacing)
    q = {"Jf": p.est(p.rep_f, "J"), "Jg": p.est(p.rep_g, "J"), "Jk": p.est(p.rep_k, "J")}
    return evaluate(
        Name.SHARP2, q,
        lambda v: 1 / np.sqrt(v["Jf"]) + 1 / np.sqrt(v["Jg"]),
        lambda v: 1 / np.sqrt(v["Jk"]),
        p.inputs(),
    )


def verify_epi(f, g, *, pair=None, spacing=None) -> InequalityVerdict:
    """``N(f) + N(g) <= N(f*g)``."""
    p = _pair(f, g, pair, spacing)
    n = p.dim
    q = {"Hf": p.est(p.rep_f, "H"), "Hg": p.est(p.rep_g, "H"), "Hk": p.est(p.rep_k, "H")}
    return evaluate(
        Name.EPI, q,
        lambda v: np.exp(2 * v["Hf"] / n) + np.exp(2 * v["Hg"] / n),
        lambda v: np.exp(2 * v["Hk"] / n),
        p.inputs(),
    )


def verify_blachman_stam(f, g, *, pair=None, spacing=None) -> InequalityVerdict:
    """``1/I(f) + 1/I(g) <= 1/I(f*g)``."""
    p = _pair(f, g, pair, spacing)
    q = {"If": p.est(p.rep_f, "I"), "Ig": p.est(p.rep_g, "I"), "Ik": p.est(p.rep_k, "I")}
    return evaluate(
        Name.BLACHMAN_STAM, q,
        lambda v: 1 / v["If"] + 1 / v["Ig"],
        lambda v: 1 / v["Ik"],
        p.inputs(),
    )


def verify_cross_bound(f, g, *, pair=None, spacing=None) -> InequalityVerdict:
    """``H(f,g) <= sqrt(J(f) J(g))``."""
    if pair is not None:
        rf, rg, cross, inputs = pair.rep_f, pair.rep_g, pair.cross, pair.inputs()
    else:
        rf, rg = _report(f, _pair_spacing(f, g, spacing)), _report(g, _pair_spacing(f, g, spacing))
        cross, inputs = cross_h_report(rf, rg), {"f": _descriptor(f), "g": _descriptor(g)}
    if rf.dim != rg.dim:
        raise ContractError(f"dimension mismatch: {rf.dim} vs {rg.dim}")
    q = {"Jf": Estimate(rf.J, rf.quad_error["J"]), "Jg": Estimate(rg.J, rg.quad_error["J"]),
         "cross": cross}
    return evaluate(
        Name.CROSS_BOUND, q,
        lambda v: v["cross"],
        lambda v: np.sqrt(v["Jf"]) * np.sqrt(v["Jg"]),
        inputs,
    )


def _single_report(f, report=None, spacing=None) -> FunctionalReport:
    if report is not None:
        return report
    if isinstance(f, AnalyticDensity):
        return analyze(f, GridSpec(spacing=spacing))
    return analyze(f)


def verify_j_geq_i2(f, *, report=None, spacing=None) -> InequalityVerdict:
    """``I(f)^2 / n <= J(f)``."""
    r = _single_report(f, report, spacing)
    n = r.dim
    q = {"I": Estimate(r.I, r.quad_error["I"]), "J": Estimate(r.J, r.quad_error["J"])}
    return evaluate(Name.J_GEQ_I2, q, lambda v: v["I"] ** 2 / n, lambda v: v["J"],
                    {"f": _descriptor(f)})


def verify_mean1(f, *, report=None, spacing=None) -> InequalityVerdict:
    """``sum_ij <Psi_ij>^2 <= J(f)``."""
    r = _single_report(f, report, spacing)
    n = r.dim
    q = {"J": Estimate(r.J, r.quad_error["J"])}
    for i in range(n):
        for j in range(n):
            q[f"m{i}{j}"] = Estimate(float(r.mean_psi[i, j]), float(r.mean_psi_error[i, j]))
    keys = [f"m{i}{j}" for i in range(n) for j in range(n)]
    return evaluate(Name.MEAN1, q, lambda v: sum(v[k] ** 2 for k in keys), lambda v: v["J"],
                    {"f": _descriptor(f)})


def verify_new1_new11_ex1(f, g, a: float, b: float, *, pair=None, spacing=None) -> dict:
    """The one-dimensional refinements of the main bound.

    Returns a dict with verdicts ``new1``, ``new11``, ``ex1``, the factor
    ``calR``, the subtracted remainder ``bracket`` (nonnegative by
    construction) and, for the record, the bracket with the opposite sign
    inside (``bracket_alt``) together with its sign.
    """
    _check_ab(a, b)
    require_log_concave(f)
    require_log_concave(g)
    p = _pair(f, g, pair, spacing)
    if p.dim != 1:
        raise ContractError("these refinements are one-dimensional")
    q = {"If": p.est(p.rep_f, "I"), "Ig": p.est(p.rep_g, "I"),
         "Jf": p.est(p.rep_f, "J"), "Jg": p.est(p.rep_g, "J"), "Jk": p.est(p.rep_k, "J")}
    s = a + b
    inputs = p.inputs(a=a, b=b)

    new1 = evaluate(
        Name.NEW1, q, lambda v: v["Jk"],
        lambda v: (a / s) ** 3 * v["Jf"] + (b / s) ** 3 * v["Jg"], inputs,
    )

    def bracket(v, sign=1.0):
        return (a * a * b * b / s**4) * (
            (a / b) * (v["Jf"] - v["If"] ** 2) + sign * (b / a) * (v["Jg"] - v["Ig"] ** 2)
        )

    vals = {k: _f(e.value) for k, e in q.items()}
    with np.errstate(all="ignore"):
        br = float(bracket(vals))
        br_alt = float(bracket(vals, -1.0))
    new11 = evaluate(
        Name.NEW11, q, lambda v: v["Jk"],
        # Equal to the new1 bound minus the bracket; this form stays finite-safe.
        lambda v: (a**4 * v["Jf"] + b**4 * v["Jg"] + a**3 * b * v["If"] ** 2
                   + a * b**3 * v["Ig"] ** 2) / s**4,
        inputs, extras={"bracket": br, "bracket_alt": br_alt,
                        "bracket_alt_sign": _sign(br_alt)},
    )

    def calR(v):
        A, B = np.sqrt(v["Jf"]), np.sqrt(v["Jg"])
        u = 1 / (1 + B / A)
        AB = A + B
        return (1 - 2 * u * (1 - u) + 2 * (v["If"] / AB) * (v["Ig"] / AB)) ** -0.5

    with np.errstate(all="ignore"):
        R_val = float(calR(vals))
    def ex1_lhs(v):
        base = 1 / np.sqrt(v["Jf"]) + 1 / np.sqrt(v["Jg"])
        # calR lies in [1, sqrt(2)], so a vanishing base decides the product.
        return base if base == 0 else base * calR(v)

    ex1 = evaluate(
        Name.EX1, q,
        ex1_lhs,
        lambda v: 1 / np.sqrt(v["Jk"]),
        p.inputs(), extras={"calR": R_val},
    )
    return {"new1": new1, "new11": new11, "ex1": ex1, "calR": R_val,
            "bracket": br, "bracket_alt": br_alt}


def _sign(x: float) -> int:
    if math.isnan(x):
        return 0
    return int(np.sign(x))


def chain_d4_rhs(pair: PairAnalysis, a: float, b: float) -> float:
    """Main bound with ``2 H(f,g)`` replaced by ``2 sqrt(J(f) J(g))``; never above the new1 bound."""
    Jf, Jg = _f(pair.rep_f.J), _f(pair.rep_g.J)
    with np.errstate(all="ignore"):
        return float((a**4 * Jf + b**4 * Jg + 2 * a * a * b * b * np.sqrt(Jf * Jg)) / (a + b) ** 4)


def verify_pair(f, g, ab=DEFAULT_AB, *, pair=None, spacing=None) -> list[InequalityVerdict]:
    """Every pair verdict; (a, b)-dependent ones over the sweep ``ab``."""
    p = _pair(f, g, pair, spacing)
    out = []
    for a, b in ab:
        out.append(verify_ine_main(f, g, a, b, pair=p))
        if p.dim == 1:
            res = verify_new1_new11_ex1(f, g, a, b, pair=p)
            out.extend([res["new1"], res["new11"]])
    out.append(verify_sharp2(f, g, pair=p))
    out.append(verify_epi(f, g, pair=p))
    out.append(verify_blachman_stam(f, g, pair=p))
    out.append(verify_cross_bound(f, g, pair=p))
    if p.dim == 1:
        out.append(verify_new1_new11_ex1(f, g, 1.0, 1.0, pair=p)["ex1"])
    return out


def verify_single(f, *, report=None, spacing=None) -> list[InequalityVerdict]:
    r = _single_report(f, report, spacing)
    return [verify_j_geq_i2(f, report=r), verify_mean1(f, report=r)]
