"""Acceptance criteria 1 to 9, one PASS/FAIL line each at the stated tolerances.

Lines are printed as each criterion runs and repeated in the terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math
import resource
import subprocess
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

import oracles
from lcepi import (
    analyze,
    discretize,
    lambda_trace,
    make_family,
    make_gaussian,
    optimal_kappa,
    strengthened_epi,
)
from lcepi.densities import GridSpec, default_spacing
from lcepi.epiflow import entropy_power_second_differences
from lcepi.heatflow import debruijn_residual, mckean_residual
from lcepi.inequalities import (
    DEFAULT_AB,
    Name,
    analyze_pair,
    verify_ine_main,
    verify_pair,
    verify_sharp2,
    verify_single,
)

LINES = []

G3 = make_family("gamma", {"shape": 3.0})
G4 = make_family("gamma", {"shape": 4.0})
G6 = make_family("gamma", {"shape": 6.0})
LO = make_family("logistic")
GU = make_family("gumbel")
W2 = make_family("weibull", {"shape": 2.0})
W5 = make_family("weibull", {"shape": 5.0})
M1 = make_gaussian(1.0)
M3 = make_gaussian(3.0)

ALL_NAMES = {Name.INE_MAIN, Name.SHARP2, Name.EPI, Name.BLACHMAN_STAM, Name.J_GEQ_I2,
             Name.CROSS_BOUND, Name.NEW1, Name.NEW11, Name.EX1, Name.MEAN1}


def _emit(capsys, label, ok, detail):
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    with capsys.disabled():
        print(f"\n{line}")
    return ok


def _crit(capsys, n, ok, detail):
    assert _emit(capsys, f"criterion {n}", ok, detail), detail


@lru_cache(maxsize=None)
def _trace(name, kappa):
    pairs = {"G3|Lo": (G3, LO), "G6|Lo": (G6, LO), "Gu|Lo": (GU, LO), "M1|M3": (M1, M3),
             "M1|M1": (M1, M1)}
    f, g = pairs[name]
    k = optimal_kappa(f, g) if kappa == "optimal" else kappa
    t0 = time.perf_counter()
    tr = lambda_trace(f, g, k, workers=4)
    return tr, time.perf_counter() - t0


def test_criterion_1_gaussian_closed_forms(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (1, 2):
        for sigma in (0.5, 1.0, 2.0, 5.0):
            ref = oracles.gaussian_closed(sigma, n)
            d = make_gaussian(sigma, n)
            for r in (analyze(d), analyze(discretize(d))):
                for key in ("H", "I", "J"):
                    worst = max(worst, abs(getattr(r, key) - ref[key]) / abs(ref[key]))
    dt = time.perf_counter() - t0
    _crit(capsys, 1, worst <= 1e-4 and dt < 10,
          f"Gaussian H, I, J over sigma in {{0.5,1,2,5}}, n in {{1,2}}, both paths: "
          f"max rel err {worst:.2e} (tol 1e-4), {dt:.1f} s (limit 10 s)")


def test_criterion_2_derived_closed_forms(capsys):
    h4, h6 = default_spacing(G4), default_spacing(G6)
    oracle_i4 = oracles.functionals_1d("gamma", shape=4.0)["I"]
    oracle_j6 = oracles.functionals_1d("gamma", shape=6.0)["J"]
    half_i4 = analyze(G4, GridSpec(spacing=h4 / 2)).I
    half_j6 = analyze(G6, GridSpec(spacing=h6 / 2)).J
    i4, j6 = analyze(G4).I, analyze(G6).J
    errs = {
        "I(G4)": abs(i4 - 0.5) / 0.5, "J(G6)": abs(j6 - 5 / 24) / (5 / 24),
        "oracle I(G4)": abs(oracle_i4 - 0.5) / 0.5, "oracle J(G6)": abs(oracle_j6 - 5 / 24) / (5 / 24),
        "half-spacing I(G4)": abs(half_i4 - 0.5) / 0.5,
        "half-spacing J(G6)": abs(half_j6 - 5 / 24) / (5 / 24),
    }
    ok = all(e <= 1e-4 for e in errs.values())
    _crit(capsys, 2, ok, "; ".join(f"{k} rel err {v:.1e}" for k, v in errs.items()) + " (tol 1e-4)")


def test_criterion_3_equality_cases(capsys):
    worst, bad = 0.0, []
    for n in (1, 2):
        for a, b in ((1.0, 1.0), (1.0, 2.0), (1.0, 5.0)):
            f, g = make_gaussian(a, n), make_gaussian(b, n)
            p = analyze_pair(f, g)
            for v in (verify_ine_main(f, g, a, b, pair=p), verify_sharp2(f, g, pair=p)):
                ratio = abs(v.slack) / v.noise
                worst = max(worst, ratio)
                if not (v.near_equality and ratio <= 10):
                    bad.append(f"{v.name.value} n={n} ({a:g},{b:g})")
    _crit(capsys, 3, not bad,
          f"INE_MAIN and SHARP2 on matched Gaussians: max |slack|/noise {worst:.2f} (limit 10)"
          + (f"; failing {bad}" if bad else ""))


def _strict_sweep(dens):
    verdicts = []
    for f in dens:
        verdicts.extend(verify_single(f))
        for g in dens:
            verdicts.extend(verify_pair(f, g, DEFAULT_AB))
    return verdicts


@lru_cache(maxsize=None)
def _bundle_sweep(names):
    table = {"G3": G3, "G6": G6, "Lo": LO, "Gu": GU, "W2": W2, "W5": W5}
    t0 = time.perf_counter()
    out = _strict_sweep([table[n] for n in names])
    return out, time.perf_counter() - t0


def _describe(v):
    f = v.inputs.get("f", {})
    g = v.inputs.get("g")
    lab = lambda d: f"{d.get('family', '?')}{d.get('params', {})}"  # noqa: E731
    return f"{v.name.value} {lab(f)}" + (f"|{lab(g)}" if g else "")


def test_criterion_4_strict_on_bundle(capsys):
    verdicts, dt = _bundle_sweep(("G3", "G6", "Lo", "Gu", "W2"))
    names = {v.name for v in verdicts}
    nonstrict = [v for v in verdicts if not v.strict]
    indet = sum(1 for v in nonstrict if not v.determinate)
    ok = not nonstrict and names >= ALL_NAMES and dt < 120
    detail = (f"{len(verdicts)} verdicts over {{G3,G6,Lo,Gu,W2}}^2, {dt:.1f} s (limit 120 s): "
              f"{len(nonstrict)} without slack > noise ({indet} indeterminate because J(Weibull(2)) "
              f"is infinite; {len(nonstrict) - indet} determinate but not strict)")
    if nonstrict:
        detail += "; e.g. " + ", ".join(sorted({_describe(v) for v in nonstrict})[:4])
    _crit(capsys, 4, ok, detail)


def test_criterion_4_supplement_determinate(capsys):
    verdicts, _ = _bundle_sweep(("G3", "G6", "Lo", "Gu", "W2"))
    det = [v for v in verdicts if v.determinate]
    violated = [v for v in verdicts if v.determinate and not v.holds]
    ok = not violated
    _emit(capsys, "criterion 4 supplement (not the criterion)", ok,
          f"determinate verdicts on the same bundle: {len(det)} of {len(verdicts)}, "
          f"{sum(v.strict for v in det)} strict, {len(violated)} violated")
    assert ok


def test_criterion_4_supplement_weibull5(capsys):
    verdicts, dt = _bundle_sweep(("G3", "G6", "Lo", "Gu", "W5"))
    ok = all(v.strict for v in verdicts) and {v.name for v in verdicts} >= ALL_NAMES
    _emit(capsys, "criterion 4 supplement (not the criterion)", ok,
          f"Weibull(5) in place of Weibull(2): {sum(v.strict for v in verdicts)} of "
          f"{len(verdicts)} strict, {dt:.1f} s")
    assert ok


def test_criterion_5_identities(capsys):
    cases = [("DeBruijn", "M1", M1, 1e-5), ("McKean", "M1", M1, 1e-5),
             ("DeBruijn", "G3", G3, 1e-3), ("McKean", "G3", G3, 1e-3),
             ("DeBruijn", "Lo", LO, 1e-3), ("McKean", "Lo", LO, 1e-3)]
    parts, ok = [], True
    for ident, lab, f, tol in cases:
        if ident == "DeBruijn":
            r = [debruijn_residual(f, 1.0, 1.0, dt) for dt in (4e-3, 2e-3, 1e-3)]
        else:
            r = [mckean_residual(f, 1.0, dt) for dt in (4e-3, 2e-3, 1e-3)]
        orders = np.log2(np.array(r[:-1]) / np.array(r[1:]))
        good = r[-1] <= tol and np.all(np.abs(orders - 2.0) <= 0.25)
        ok &= bool(good)
        parts.append(f"{ident} {lab} {r[-1]:.1e} (tol {tol:g}) order {orders.min():.2f}-{orders.max():.2f}")
    _crit(capsys, 5, ok, "residuals at dt=1e-3, t=1: " + "; ".join(parts))


def test_criterion_6_lambda_flow(capsys):
    parts, ok = [], True
    for kappa in (0.25, 0.5, "optimal"):
        tr, dt = _trace("G3|Lo", kappa)
        checks = tr.checks()
        d2min = float(np.min(tr.d2lambda[1:-1]))
        gap = abs(tr.lam[-1] - tr.limit)
        good = checks["lambda_nonincreasing"] and d2min >= -1e-6 and gap <= 1e-2 and dt < 120
        ok &= good
        parts.append(f"G3|Lo kappa={tr.kappa:.4g}: nonincreasing={checks['lambda_nonincreasing']}, "
                     f"min d2 {d2min:.1e}, |Lambda(50)-limit| {gap:.1e}, {dt:.1f} s")
    tr, dt = _trace("M1|M3", "optimal")
    flat = float(np.ptp(tr.lam))
    ok &= flat <= 1e-6 and dt < 120
    parts.append(f"M1|M3 flat within {flat:.1e} (tol 1e-6)")
    _crit(capsys, 6, ok, "; ".join(parts))


@lru_cache(maxsize=None)
def _strong(name):
    pairs = {"M1|M1": (M1, M1), "M1|M3": (M1, M3), "M2|M5": (make_gaussian(2.0), make_gaussian(5.0)),
             "G6|Lo": (G6, LO), "Gu|Lo": (GU, LO), "G3|Lo": (G3, LO)}
    return strengthened_epi(*pairs[name], workers=4)


def test_criterion_7_strengthened_epi(capsys):
    parts, ok = [], True
    for name in ("M1|M1", "M1|M3", "M2|M5"):
        r = _strong(name)
        good = abs(r.R - 1.0) <= 1e-6 and r.holds
        ok &= good
        parts.append(f"{name} |R-1| {abs(r.R - 1):.1e}")
    strict = 0
    for name in ("G6|Lo", "Gu|Lo", "G3|Lo"):
        r = _strong(name)
        good = r.R_strict and r.epi_lhs >= r.epi_rhs_strengthened - r.noise
        strict += good
        parts.append(f"{name} R-1 {r.R - 1:.3e} (noise {r.R_error:.1e}), "
                     f"N(f*g) - (N(f)+N(g))R {r.epi_lhs - r.epi_rhs_strengthened:.3g}")
    ok &= strict >= 2
    _crit(capsys, 7, ok, "; ".join(parts))


def test_criterion_8_entropy_power_concavity(capsys):
    worst, parts = -math.inf, []
    for name, kappa in (("G3|Lo", 0.25), ("G3|Lo", 0.5), ("G3|Lo", "optimal"), ("M1|M3", "optimal"),
                        ("G6|Lo", "optimal"), ("Gu|Lo", "optimal")):
        tr, _ = _trace(name, kappa)
        d2 = entropy_power_second_differences(tr)
        m = max(float(np.max(v[1:-1])) for v in d2.values())
        worst = max(worst, m)
        parts.append(f"{name}@{kappa}: {m:.1e}")
    _crit(capsys, 8, worst <= 1e-6,
          f"max second derivative of N along flows {worst:.1e} (limit 1e-6): " + ", ".join(parts))


def test_criterion_9_full_bundle(capsys, tmp_path):
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "lcepi", "report", "--workers", "4",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    wall = time.perf_counter() - t0
    peak_mb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1024
    ok = proc.returncode == 0 and wall < 300 and peak_mb < 2048
    _crit(capsys, 9, ok, f"default bundle exit {proc.returncode}, {wall:.0f} s (limit 300 s), "
                         f"peak RSS {peak_mb:.0f} MB (limit 2048 MB)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
