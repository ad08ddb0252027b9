"""The functional Lambda(t) along paired heat flows and the strengthened EPI.

``f`` evolves with diffusion constant ``kappa`` and ``g`` with ``1 - kappa``,
so ``f(t) * g(t)`` is the unit-diffusion heat flow of ``f * g``:

    Lambda(t) = H(f(t) * g(t)) - kappa H(f(t)) - (1 - kappa) H(g(t)).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate

from ._numerics import Estimate
from .densities import GridDensity, recenter
from .errors import HorizonTooShortError, ParameterDomainError, ResolutionError
from .functionals import FunctionalReport, analyze, cross_h_report
from .heatflow import KERNEL_WIDTH, convolve, heat_step
from .inequalities import (
    InequalityVerdict,
    ROUNDING,
    Name,
    PairAnalysis,
    _grid_at,
    _pair_spacing,
    _report,
    evaluate,
    require_log_concave,
)

__all__ = [
    "FlowTrace",
    "FlowPoint",
    "StrengthenedEpiReport",
    "CSV_COLUMNS",
    "default_mesh",
    "flow_pair",
    "lambda_trace",
    "lambda_limit",
    "optimal_kappa",
    "deficit_P",
    "strengthened_epi",
    "verify_str1",
    "entropy_power_second_differences",
]

CSV_COLUMNS = (
    "t", "lambda", "dlambda", "d2lambda", "analytic_d1", "analytic_d2", "P",
    "H_f", "H_g", "H_conv", "I_f", "I_g", "I_conv", "J_f", "J_g", "J_conv",
)
MESH_START = 0.01
DEFAULT_FINAL = 50.0
# Accumulated deficit integral: relative tail allowance and envelope safety factor.
TAIL_RTOL = 1e-3
TAIL_SAFETY = 10.0
RESOLVED_FACTOR = 10.0
DEFAULT_HORIZON = 400.0
MAX_FLOW_NODES = 2**24


def default_mesh(final: float = DEFAULT_FINAL, start: float = MESH_START, ratio: float = 2.0) -> np.ndarray:
    """``{0} U {start * ratio**k < final} U {final}``."""
    if not (final > 0 and start > 0 and ratio > 1):
        raise ParameterDomainError("mesh needs final > 0, start > 0 and ratio > 1")
    pts = [0.0]
    t = start
    while t < final * (1 - 1e-12):
        pts.append(t)
        t *= ratio
    pts.append(float(final))
    return np.array(pts)


def _check_kappa(kappa):
    if not (0 < kappa < 1):
        raise ParameterDomainError(f"kappa must lie in (0, 1), got {kappa}")


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1 or t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ParameterDomainError("times must be increasing and start at 0")
    return t


def _require_lc(d):
    # Analytic families reject non-log-concave parameters at construction.
    if isinstance(d, GridDensity):
        require_log_concave(d)


def _check_flow_size(f, g, h: float, final: float) -> None:
    """Fail fast when the heated convolution grid at ``final`` would exceed ``MAX_FLOW_NODES``."""
    grids = [_grid_at(d, h, 0) for d in (f, g)]
    pad = 2 * math.ceil(KERNEL_WIDTH * math.sqrt(2.0 * final) / h)
    nodes = 1
    for axis in range(grids[0].dim):
        nodes *= sum(gr.shape[axis] for gr in grids) + pad
    if nodes > MAX_FLOW_NODES:
        raise ResolutionError(
            f"the flow grid at t={final:g} needs {nodes:.3g} nodes (cap {MAX_FLOW_NODES:.3g}); "
            "shorten the horizon or coarsen the spacing")


def _grid_report(build) -> FunctionalReport:
    return analyze(build(0), companions=[build(1), build(2)])


def flow_pair(f, g, kappa: float, t: float, spacing: float | None = None) -> PairAnalysis:
    """Functionals of ``f(t)``, ``g(t)`` and ``f(t) * g(t)`` with coarse companions."""
    _check_kappa(kappa)
    h = _pair_spacing(f, g, spacing)
    grids = {lv: (_grid_at(f, h, lv), _grid_at(g, h, lv)) for lv in range(3)}
    conv = {lv: convolve(*grids[lv]) for lv in range(3)}
    if t == 0:
        rep_f, rep_g = _report(f, h), _report(g, h)
    else:
        rep_f = _grid_report(lambda lv: heat_step(grids[lv][0], kappa, t))
        rep_g = _grid_report(lambda lv: heat_step(grids[lv][1], 1.0 - kappa, t))
    rep_k = _grid_report(lambda lv: heat_step(conv[lv], 1.0, t))
    return PairAnalysis(f, g, rep_f, rep_g, rep_k, cross_h_report(rep_f, rep_g), h)


def _deficit(p: PairAnalysis) -> Estimate:
    q = {"Jf": p.est(p.rep_f, "J"), "Jg": p.est(p.rep_g, "J"), "cross": p.cross}
    v = evaluate(Name.CROSS_BOUND, q, lambda v: v["cross"],
                 lambda v: np.sqrt(v["Jf"]) * np.sqrt(v["Jg"]))
    return Estimate(v.slack, v.noise, v.determinate)


@dataclass(frozen=True)
class FlowPoint:
    """Everything computed at one mesh time."""

    t: float
    pair: PairAnalysis
    P: Estimate


def _points(f, g, kappa, times, spacing, workers) -> list[FlowPoint]:
    def one(t):
        p = flow_pair(f, g, kappa, float(t), spacing)
        return FlowPoint(float(t), p, _deficit(p))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, times))
    return [one(t) for t in times]


def _d1(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order first derivative on a nonuniform mesh."""
    n = t.size
    out = np.full(n, np.nan)
    if n < 3:
        if n == 2:
            out[:] = (y[1] - y[0]) / (t[1] - t[0])
        return out
    for i in range(n):
        j = min(max(i, 1), n - 2)
        x0, x1, x2 = t[j - 1], t[j], t[j + 1]
        y0, y1, y2 = y[j - 1], y[j], y[j + 1]
        x = t[i]
        # Derivative of the Lagrange interpolant through three nodes.
        out[i] = (y0 * (2 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
                  + y1 * (2 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
                  + y2 * (2 * x - x0 - x1) / ((x2 - x0) * (x2 - x1)))
    return out


def _d2(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Three-point second derivative at interior nodes; nan at the ends."""
    out = np.full(t.size, np.nan)
    for i in range(1, t.size - 1):
        a, b = t[i] - t[i - 1], t[i + 1] - t[i]
        out[i] = 2 * (b * y[i - 1] - (a + b) * y[i] + a * y[i + 1]) / (a * b * (a + b))
    return out


def _d2_noise(t: np.ndarray, e: np.ndarray) -> np.ndarray:
    out = np.full(t.size, np.nan)
    for i in range(1, t.size - 1):
        a, b = t[i] - t[i - 1], t[i + 1] - t[i]
        c = 2.0 / (a * b * (a + b))
        out[i] = c * math.sqrt((b * e[i - 1]) ** 2 + ((a + b) * e[i]) ** 2 + (a * e[i + 1]) ** 2)
    return out


@dataclass(frozen=True)
class FlowTrace:
    """Lambda and its derivatives along the paired flows.

    ``*_noise`` arrays carry the propagated quadrature errors of the matching
    columns.  Discrete derivatives carry the noise of the values they
    difference, not their own truncation error.
    """

    kappa: float
    dim: int
    times: np.ndarray
    lam: np.ndarray
    dlambda: np.ndarray
    d2lambda: np.ndarray
    analytic_d1: np.ndarray
    analytic_d2: np.ndarray
    P_vals: np.ndarray
    limit: float
    columns: dict
    lam_noise: np.ndarray
    d1_noise: np.ndarray
    d2_noise: np.ndarray
    P_noise: np.ndarray
    labels: tuple = ("f", "g")

    @property
    def N_f(self) -> np.ndarray:
        return np.exp(2 * self.columns["H_f"] / self.dim)

    @property
    def N_g(self) -> np.ndarray:
        return np.exp(2 * self.columns["H_g"] / self.dim)

    @property
    def N_conv(self) -> np.ndarray:
        return np.exp(2 * self.columns["H_conv"] / self.dim)

    def rows(self) -> list[dict]:
        data = {
            "t": self.times, "lambda": self.lam, "dlambda": self.dlambda,
            "d2lambda": self.d2lambda, "analytic_d1": self.analytic_d1,
            "analytic_d2": self.analytic_d2, "P": self.P_vals, **self.columns,
        }
        return [{c: float(data[c][i]) for c in CSV_COLUMNS} for i in range(self.times.size)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([repr(row[c]) for c in CSV_COLUMNS])

    def checks(self) -> dict:
        """Invariants of the trace, each as a bool."""
        drops = np.diff(self.lam)
        drop_noise = np.hypot(self.lam_noise[1:], self.lam_noise[:-1])
        inner = slice(1, self.times.size - 1)
        return {
            "lambda_nonincreasing": bool(np.all(drops <= drop_noise)),
            "convex": bool(np.all(self.d2lambda[inner] >= -self.d2_noise[inner])),
            "P_nonnegative": bool(np.all(self.P_vals >= -self.P_noise)),
            "analytic_d1_nonpositive": bool(np.all(self.analytic_d1 <= self.d1_noise)),
            "analytic_d2_nonnegative": bool(np.all(self.analytic_d2 >= -self.d2a_noise)),
        }

    d2a_noise: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa, "dim": self.dim, "limit": self.limit,
            "labels": list(self.labels),
            "rows": self.rows(),
            "noise": {
                "lambda": self.lam_noise.tolist(), "analytic_d1": self.d1_noise.tolist(),
                "analytic_d2": self.d2a_noise.tolist(), "P": self.P_noise.tolist(),
                "d2lambda": self.d2_noise.tolist(),
            },
            "checks": self.checks(),
        }


def _label(d) -> str:
    lab = getattr(d, "label", None)
    return lab() if callable(lab) else str(lab)


def _prepare(f, g):
    for d in (f, g):
        _require_lc(d)
    return recenter(f), recenter(g)


def lambda_trace(f, g, kappa: float, times=None, spacing: float | None = None,
                 workers: int | None = None) -> FlowTrace:
    """Lambda(t) on ``times`` for the recentred inputs."""
    _check_kappa(kappa)
    times = _check_times(default_mesh() if times is None else times)
    f0, g0 = _prepare(f, g)
    _check_flow_size(f0, g0, _pair_spacing(f0, g0, spacing), float(times[-1]))
    pts = _points(f0, g0, kappa, times, spacing, workers)
    c = 1.0 - kappa
    n = pts[0].pair.dim

    def col(which, key):
        return np.array([getattr(getattr(p.pair, which), key) for p in pts])

    def err(which, key):
        return np.array([getattr(p.pair, which).quad_error[key] for p in pts])

    cols = {}
    for tag, which in (("f", "rep_f"), ("g", "rep_g"), ("conv", "rep_k")):
        for key in ("H", "I", "J"):
            cols[f"{key}_{tag}"] = col(which, key)
    errs = {k: err(w, key) for k, w, key in
            [(f"{key}_{tag}", which, key) for tag, which in
             (("f", "rep_f"), ("g", "rep_g"), ("conv", "rep_k")) for key in ("H", "I", "J")]}

    def noise(key, w1, w2):
        # Quadrature errors in quadrature plus a rounding floor on the combined terms.
        q = np.sqrt(errs[f"{key}_conv"] ** 2 + (w1 * errs[f"{key}_f"]) ** 2
                    + (w2 * errs[f"{key}_g"]) ** 2)
        with np.errstate(invalid="ignore"):
            mag = (np.abs(cols[f"{key}_conv"]) + w1 * np.abs(cols[f"{key}_f"])
                   + w2 * np.abs(cols[f"{key}_g"]))
        return q + ROUNDING * mag

    lam = cols["H_conv"] - kappa * cols["H_f"] - c * cols["H_g"]
    lam_noise = noise("H", kappa, c)
    with np.errstate(invalid="ignore"):
        a1 = cols["I_conv"] - kappa**2 * cols["I_f"] - c**2 * cols["I_g"]
        a2 = -2.0 * (cols["J_conv"] - kappa**3 * cols["J_f"] - c**3 * cols["J_g"])
    d1n = noise("I", kappa**2, c**2)
    d2an = 2.0 * noise("J", kappa**3, c**3)
    return FlowTrace(
        kappa=float(kappa), dim=n, times=times, lam=lam,
        dlambda=_d1(times, lam), d2lambda=_d2(times, lam),
        analytic_d1=a1, analytic_d2=a2,
        P_vals=np.array([p.P.value for p in pts]),
        limit=lambda_limit(kappa, n), columns=cols,
        lam_noise=lam_noise, d1_noise=d1n, d2_noise=_d2_noise(times, lam_noise),
        P_noise=np.array([p.P.error for p in pts]),
        labels=(_label(f), _label(g)), d2a_noise=d2an,
    )


def entropy_power_second_differences(trace: FlowTrace) -> dict:
    """Three-point second derivatives in t of ``N(f(t))``, ``N(g(t))``, ``N(f(t)*g(t))``."""
    return {k: _d2(trace.times, getattr(trace, k)) for k in ("N_f", "N_g", "N_conv")}


def lambda_limit(kappa: float, n: int = 1) -> float:
    """``-(n/2) [kappa log kappa + (1 - kappa) log(1 - kappa)]``."""
    _check_kappa(kappa)
    return -0.5 * n * (kappa * math.log(kappa) + (1 - kappa) * math.log1p(-kappa))


def optimal_kappa(f, g, spacing: float | None = None) -> float:
    """``N(f) / (N(f) + N(g))``, computed from the entropies."""
    rf, rg = _report(f, _pair_spacing(f, g, spacing)), _report(g, _pair_spacing(f, g, spacing))
    return _kappa_bar(rf, rg)


def _kappa_bar(rf: FunctionalReport, rg: FunctionalReport) -> float:
    n = rf.dim
    # Logistic form avoids overflow of the entropy powers.
    return float(1.0 / (1.0 + math.exp(2.0 * (rg.H - rf.H) / n)))


def deficit_P(f, g, spacing: float | None = None, *, return_error: bool = False):
    """``sqrt(J(f) J(g)) - H(f, g)``."""
    h = _pair_spacing(f, g, spacing)
    rf, rg = _report(f, h), _report(g, h)
    p = PairAnalysis(f, g, rf, rg, rf, cross_h_report(rf, rg), h)
    est = _deficit(p)
    return est if return_error else est.value


@dataclass(frozen=True)
class StrengthenedEpiReport:
    """Deficit-integral strengthening of the entropy power inequality."""

    kappa_bar: float
    P_kappa: float
    P_kappa_error: float
    tail_bound: float
    R: float
    R_error: float
    epi_lhs: float
    epi_rhs_classic: float
    epi_rhs_strengthened: float
    noise: float
    holds: bool
    dim: int
    horizon: float
    times: np.ndarray
    P_vals: np.ndarray
    P_noise: np.ndarray
    partial: bool = False
    envelope: dict = field(default_factory=dict)
    labels: tuple = ("f", "g")

    @property
    def R_strict(self) -> bool:
        return self.R - 1.0 > self.R_error

    def to_dict(self) -> dict:
        return {
            "kappa_bar": self.kappa_bar, "P_kappa": self.P_kappa,
            "P_kappa_error": self.P_kappa_error, "tail_bound": self.tail_bound,
            "R": self.R, "R_error": self.R_error, "epi_lhs": self.epi_lhs,
            "epi_rhs_classic": self.epi_rhs_classic,
            "epi_rhs_strengthened": self.epi_rhs_strengthened,
            "noise": self.noise, "holds": self.holds, "dim": self.dim,
            "horizon": self.horizon, "partial": self.partial,
            "envelope": dict(self.envelope), "labels": list(self.labels),
            "times": self.times.tolist(), "P": self.P_vals.tolist(),
            "P_noise": self.P_noise.tolist(),
        }


def _weighted_integral(times: np.ndarray, P: np.ndarray) -> tuple[float, float]:
    """``int_0^T s P(s) ds`` on a mesh ``{0} U geometric``, with an error estimate.

    Simpson in ``log s`` on the geometric part; the first interval is a
    trapezoid in ``s``.  The error bound is the distance to the trapezoid
    rule in ``log s`` plus the whole first interval.
    """
    s, p = times[1:], P[1:]
    head = 0.5 * s[0] * (s[0] * p[0])
    y = s * s * p
    u = np.log(s)
    main = float(sp_integrate.simpson(y, x=u))
    trap = float(sp_integrate.trapezoid(y, x=u))
    return head + main, abs(main - trap) + abs(head)


def _envelope(times: np.ndarray, P: np.ndarray, noise: np.ndarray) -> dict:
    """Power law ``A s^-p`` dominating ``P + noise`` on the last resolved decade.

    A sample is resolved when ``P > 10 noise``.  The tail of ``int s P`` from
    the last resolved time ``T_r`` on is ``10 A T_r^(2-p) / (p-2)``.  With no
    resolved sample the deficit vanishes within noise and the tail is zero.
    """
    resolved = (times > 0) & (P > RESOLVED_FACTOR * noise)
    if not np.any(resolved):
        return {"A": 0.0, "p": math.nan, "T_resolved": 0.0, "tail": 0.0, "resolved": False}
    Tr = float(times[resolved][-1])
    sel = resolved & (times >= Tr / 10)
    if np.count_nonzero(sel) < 2:
        return {"A": math.inf, "p": math.nan, "T_resolved": Tr, "tail": math.inf, "resolved": True}
    env = P[sel] + noise[sel]
    slope, icept = np.polyfit(np.log(times[sel]), np.log(env), 1)
    p, A = -float(slope), float(math.exp(icept))
    # Envelope must dominate every sample it was fitted to.
    A *= float(np.max(env / (A * times[sel] ** -p)))
    tail = TAIL_SAFETY * A * Tr ** (2 - p) / (p - 2) if p > 2 else math.inf
    return {"A": A, "p": p, "T_resolved": Tr, "tail": float(tail), "resolved": True}


def strengthened_epi(f, g, time_horizon: float = DEFAULT_HORIZON, mesh=None,
                     spacing: float | None = None, workers: int | None = None,
                     raise_on_short: bool = True) -> StrengthenedEpiReport:
    """``N(f*g) >= (N(f) + N(g)) R`` with ``R = exp(2 P_kappa / n)``.

    ``P_kappa = kb^2 (1-kb)^2 int_0^inf s P(f(s), g(s)) ds`` at the optimal
    ``kb``, truncated at the horizon with a fitted tail envelope.  If the tail
    exceeds ``1e-3`` of the accumulated value, :class:`HorizonTooShortError`
    carries the partial report (its ``P_kappa`` is a valid lower bound).
    """
    f0, g0 = _prepare(f, g)
    h = _pair_spacing(f0, g0, spacing)
    times = default_mesh(time_horizon, ratio=math.sqrt(2.0)) if mesh is None else _check_times(mesh)
    _check_flow_size(f0, g0, h, float(times[-1]))
    rf, rg = _report(f0, h), _report(g0, h)
    kb = _kappa_bar(rf, rg)
    pts = _points(f0, g0, kb, times, h, workers)
    P = np.array([p.P.value for p in pts])
    Pn = np.array([p.P.error for p in pts])
    n = rf.dim
    w = (kb * (1 - kb)) ** 2
    integral, quad_err = _weighted_integral(times, P)
    # Noise of P is correlated along the flow; integrate it as a bias bound.
    bias, _ = _weighted_integral(times, Pn)
    env = _envelope(times, P, Pn)
    Pk = w * integral
    Pk_err = w * (quad_err + bias)
    R = math.exp(2 * Pk / n)
    R_err = R * 2 * Pk_err / n
    k0 = pts[0].pair.rep_k
    lhs = math.exp(2 * k0.H / n)
    Nf, Ng = math.exp(2 * rf.H / n), math.exp(2 * rg.H / n)
    classic = Nf + Ng
    strong = classic * R
    noise = math.hypot(
        lhs * 2 * k0.quad_error["H"] / n,
        math.hypot(Nf * 2 * rf.quad_error["H"] / n, Ng * 2 * rg.quad_error["H"] / n) * R,
        classic * R_err,
    ) + 1e-12 * lhs
    partial = not (env["tail"] * w <= TAIL_RTOL * max(Pk, 0.0))
    report = StrengthenedEpiReport(
        kappa_bar=kb, P_kappa=Pk, P_kappa_error=Pk_err, tail_bound=env["tail"] * w,
        R=R, R_error=R_err, epi_lhs=lhs, epi_rhs_classic=classic,
        epi_rhs_strengthened=strong, noise=noise, holds=bool(lhs >= strong - noise),
        dim=n, horizon=float(times[-1]), times=times, P_vals=P, P_noise=Pn,
        partial=partial, envelope=env, labels=(_label(f), _label(g)),
    )
    if partial and raise_on_short:
        raise HorizonTooShortError(
            f"tail bound {report.tail_bound:.3g} exceeds {TAIL_RTOL:g} of the accumulated "
            f"{Pk:.3g}; increase the horizon", partial=report,
        )
    return report


def verify_str1(f, g, kappa: float, t: float, horizon: float = DEFAULT_HORIZON,
                spacing: float | None = None, workers: int | None = None) -> InequalityVerdict:
    """``I(f(t)*g(t)) <= kappa^2 I(f(t)) + (1-kappa)^2 I(g(t)) - kappa^2 (1-kappa)^2 int_t^T P``.

    The integral is truncated at ``horizon``; since ``P >= 0`` truncation
    only enlarges the right side.
    """
    _check_kappa(kappa)
    if not 0 <= t < horizon:
        raise ParameterDomainError(f"need 0 <= t < horizon, got t={t}, horizon={horizon}")
    f0, g0 = _prepare(f, g)
    h = _pair_spacing(f0, g0, spacing)
    mesh = default_mesh(horizon, ratio=math.sqrt(2.0))
    s = np.concatenate([[t], mesh[mesh > t]])
    _check_flow_size(f0, g0, h, float(s[-1]))
    pts = _points(f0, g0, kappa, s, h, workers)
    P = np.array([p.P.value for p in pts])
    Pn = np.array([p.P.error for p in pts])
    u = np.log(s) if t > 0 else None
    if t > 0:
        integral = float(sp_integrate.simpson(s * P, x=u))
        bias = float(sp_integrate.simpson(s * Pn, x=u))
    else:
        integral = float(sp_integrate.simpson(s[1:] * P[1:], x=np.log(s[1:])))
        bias = float(sp_integrate.simpson(s[1:] * Pn[1:], x=np.log(s[1:])))
        # An infinite P(0) (J diverging at t = 0) drops the head; P >= 0 keeps the bound valid.
        if math.isfinite(P[0]) and math.isfinite(Pn[0]):
            integral += float(sp_integrate.trapezoid(P[:2], x=s[:2]))
            bias += float(sp_integrate.trapezoid(Pn[:2], x=s[:2]))
    p0 = pts[0].pair
    c = 1.0 - kappa
    w = (kappa * c) ** 2
    q = {"Ik": p0.est(p0.rep_k, "I"), "If": p0.est(p0.rep_f, "I"), "Ig": p0.est(p0.rep_g, "I"),
         "D": Estimate(integral, bias)}
    return evaluate(
        Name.STR1, q, lambda v: v["Ik"],
        lambda v: kappa**2 * v["If"] + c**2 * v["Ig"] - w * v["D"],
        p0.inputs(kappa=kappa, t=t, horizon=float(horizon)),
        extras={"deficit_integral": integral},
    )
