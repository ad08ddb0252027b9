"""Orchestration of configured experiments and deterministic report output."""

from __future__ import annotations

import csv
import enum
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .densities import AnalyticDensity, GridSpec, discretize
from .epiflow import (
    CSV_COLUMNS,
    default_mesh,
    lambda_trace,
    optimal_kappa,
    strengthened_epi,
)
from .errors import ContractError, LcepiError, PreconditionError, ResolutionError
from .functionals import analyze, scores
from .inequalities import (
    InequalityVerdict,
    Name,
    analyze_pair,
    verify_blachman_stam,
    verify_cross_bound,
    verify_epi,
    verify_ine_main,
    verify_j_geq_i2,
    verify_mean1,
    verify_new1_new11_ex1,
    verify_sharp2,
)

__all__ = [
    "ExitCode",
    "RunReport",
    "run_functionals",
    "run_verify",
    "run_flow",
    "run_all",
    "to_jsonable",
    "dumps",
    "verdict_status",
]


class ExitCode(enum.IntEnum):
    OK = 0
    VIOLATION = 1
    CONFIG = 2
    RESOLUTION = 3


def verdict_status(v: InequalityVerdict) -> str:
    """``holds``, ``indeterminate`` (both sides infinite) or ``violated``."""
    if not v.determinate:
        return "indeterminate"
    return "holds" if v.holds else "violated"


# ---------------------------------------------------------------------------
# serialization


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings inf, -inf and nan."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# report


@dataclass
class RunReport:
    """Combined results; ``timings`` stay out of the deterministic JSON."""

    config: dict
    functionals: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    flows: list = field(default_factory=list)
    strengthened: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    failed_checks: list = field(default_factory=list)

    def merge(self, other: "RunReport") -> "RunReport":
        for name in ("functionals", "verdicts", "flows", "strengthened", "errors",
                     "warnings", "failed_checks"):
            getattr(self, name).extend(getattr(other, name))
        self.timings.update(other.timings)
        return self

    @property
    def exit_code(self) -> ExitCode:
        if any(v["status"] == "violated" for v in self.verdicts) or self.failed_checks:
            return ExitCode.VIOLATION
        if any(e["kind"] == "resolution" for e in self.errors):
            return ExitCode.RESOLUTION
        return ExitCode.OK

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config,
            "functionals": self.functionals,
            "verdicts": self.verdicts,
            "flows": self.flows,
            "strengthened": self.strengthened,
            "errors": self.errors,
            "warnings": self.warnings,
            "failed_checks": self.failed_checks,
            "exit_code": int(self.exit_code),
        }

    def metadata(self) -> dict:
        return {"version": __version__, "timings": dict(self.timings),
                "exit_code": int(self.exit_code)}

    def summary(self) -> str:
        lines = [f"lcepi {__version__}"]
        if self.functionals:
            lines.append(f"functionals: {len(self.functionals)} densities")
            for r in self.functionals:
                lines.append(f"  {r['name']:>12}  H={_fmt(r['H'])}  I={_fmt(r['I'])}  J={_fmt(r['J'])}")
        if self.verdicts:
            counts = {}
            for v in self.verdicts:
                counts[v["status"]] = counts.get(v["status"], 0) + 1
            strict = sum(1 for v in self.verdicts if v["strict"])
            near = sum(1 for v in self.verdicts if v["near_equality"])
            lines.append(f"verdicts: {len(self.verdicts)} ({', '.join(f'{k} {n}' for k, n in sorted(counts.items()))}; "
                         f"strict {strict}, near equality {near})")
            for v in self.verdicts:
                if v["status"] == "violated":
                    lines.append(f"  VIOLATED {v['name']} {v['label']}: slack={_fmt(v['slack'])} noise={_fmt(v['noise'])}")
        for fl in self.flows:
            ok = all(fl["checks"].values())
            lines.append(f"flow {fl['id']}: Lambda(0)={_fmt(fl['rows'][0]['lambda'])} "
                         f"Lambda(T)={_fmt(fl['rows'][-1]['lambda'])} limit={_fmt(fl['limit'])} "
                         f"checks {'pass' if ok else 'FAIL'}")
        for s in self.strengthened:
            lines.append(f"strengthened {s['id']}: R={s['R']!r} N(f*g)={s['epi_lhs']!r} "
                         f">= {s['epi_rhs_strengthened']!r}{' (partial)' if s['partial'] else ''}")
        for e in self.errors:
            lines.append(f"error [{e['kind']}] {e['where']}: {e['message']}")
        for w in self.warnings:
            lines.append(f"warning {w}")
        lines.append(f"exit code {int(self.exit_code)}")
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return f"{x:.10g}" if isinstance(x, float) else str(x)


def _error(kind: str, where: str, exc: Exception) -> dict:
    return {"kind": kind, "where": where, "message": str(exc)}


def _classify(exc: Exception) -> str:
    if isinstance(exc, ResolutionError):
        return "resolution"
    if isinstance(exc, PreconditionError):
        return "precondition"
    if isinstance(exc, ContractError):
        return "contract"
    return "domain"


def _pool_map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _densities(cfg: ExperimentConfig) -> dict:
    return {d.name: d.build(cfg.spacing) for d in cfg.densities}


def _grid_spec(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(spacing=cfg.spacing, half_width=cfg.half_width)


# ---------------------------------------------------------------------------
# functionals


def _spot_check(d, spec, rng, count) -> dict:
    """Grid-difference scores against closed-form scores at random interior nodes."""
    if not isinstance(d, AnalyticDensity) or count == 0:
        return {}
    g = discretize(d, spec)
    q = np.array([fac.scipy().ppf([0.1, 0.9]) for fac in d.factors])
    pts = rng.uniform(q[:, 0], q[:, 1], size=(count, d.dim))
    worst = 0.0
    for x in pts:
        # Grid scores live on the nearest node; compare there.
        b = scores(g, x)
        c = scores(d, b.x if d.dim > 1 else b.x[0])
        worst = max(worst, float(np.max(np.abs(np.atleast_1d(c.score) - b.score))))
    return {"points": pts.tolist(), "max_score_error": worst}


def run_functionals(cfg: ExperimentConfig, workers: int | None = None) -> RunReport:
    rep = RunReport(cfg.echo())
    t0 = time.perf_counter()
    dens = _densities(cfg)
    rng = np.random.default_rng(cfg.seed)
    # Spot-check points are drawn in configuration order so results do not depend on workers.
    seeds = {name: int(rng.integers(2**63)) for name in dens}

    def one(name):
        d = dens[name]
        try:
            if isinstance(d, AnalyticDensity):
                spec = _grid_spec(cfg)
                r = analyze(d, spec)
                spot = _spot_check(d, spec, np.random.default_rng(seeds[name]), cfg.spot_checks)
            else:
                r, spot = analyze(d), {}
        except LcepiError as exc:
            return None, _error(_classify(exc), name, exc)
        out = {"name": name, **r.to_dict()}
        if spot:
            out["spot_check"] = spot
        return out, None

    for out, err in _pool_map(one, list(dens), workers):
        if err:
            rep.errors.append(err)
        else:
            rep.functionals.append(out)
    rep.timings["functionals"] = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# verify

_PAIR_NAMES = (Name.INE_MAIN, Name.NEW1, Name.NEW11, Name.SHARP2, Name.EPI,
               Name.BLACHMAN_STAM, Name.CROSS_BOUND, Name.EX1)
_SINGLE_NAMES = (Name.J_GEQ_I2, Name.MEAN1)


def _verdict_row(v: InequalityVerdict, label: str, **kw) -> dict:
    d = v.to_dict()
    d.update(label=label, status=verdict_status(v), strict=bool(v.strict), **kw)
    return d


def _selected(cfg, name: Name) -> bool:
    return not cfg.inequalities or name.value in cfg.inequalities


def _pair_verdicts(cfg, dens, fn, gn, ab=None):
    f, g = dens[fn], dens[gn]
    label = f"{fn}|{gn}"
    rows, errs = [], []
    if f.dim != g.dim:
        return rows, [_error("contract", label, ContractError("dimension mismatch"))]
    try:
        pair = analyze_pair(f, g, cfg.spacing)
    except LcepiError as exc:
        return rows, [_error(_classify(exc), label, exc)]

    def attempt(name, call, where=""):
        if not _selected(cfg, name):
            return None
        try:
            return call()
        except LcepiError as exc:
            errs.append(_error(_classify(exc), f"{name.value} {label}{where}", exc))
            return None

    for a, b in ab or cfg.ab:
        where = f" a={a:g} b={b:g}"
        v = attempt(Name.INE_MAIN, lambda: verify_ine_main(f, g, a, b, pair=pair), where)
        if v:
            rows.append(_verdict_row(v, label, f=fn, g=gn, a=a, b=b))
        if pair.dim == 1 and (_selected(cfg, Name.NEW1) or _selected(cfg, Name.NEW11)):
            res = attempt(Name.NEW1 if _selected(cfg, Name.NEW1) else Name.NEW11,
                          lambda: verify_new1_new11_ex1(f, g, a, b, pair=pair), where)
            if res:
                for key, nm in (("new1", Name.NEW1), ("new11", Name.NEW11)):
                    if _selected(cfg, nm):
                        rows.append(_verdict_row(res[key], label, f=fn, g=gn, a=a, b=b))
    for nm, call in ((Name.SHARP2, lambda: verify_sharp2(f, g, pair=pair)),
                     (Name.EPI, lambda: verify_epi(f, g, pair=pair)),
                     (Name.BLACHMAN_STAM, lambda: verify_blachman_stam(f, g, pair=pair)),
                     (Name.CROSS_BOUND, lambda: verify_cross_bound(f, g, pair=pair))):
        v = attempt(nm, call)
        if v:
            rows.append(_verdict_row(v, label, f=fn, g=gn))
    if pair.dim == 1:
        res = attempt(Name.EX1, lambda: verify_new1_new11_ex1(f, g, 1.0, 1.0, pair=pair))
        if res:
            rows.append(_verdict_row(res["ex1"], label, f=fn, g=gn))
    return rows, errs


def _single_verdicts(cfg, dens, name):
    d = dens[name]
    rows, errs = [], []
    try:
        r = analyze(d, _grid_spec(cfg)) if isinstance(d, AnalyticDensity) else analyze(d)
    except LcepiError as exc:
        return rows, [_error(_classify(exc), name, exc)]
    for nm, fn in ((Name.J_GEQ_I2, verify_j_geq_i2), (Name.MEAN1, verify_mean1)):
        if _selected(cfg, nm):
            rows.append(_verdict_row(fn(d, report=r), name, f=name))
    return rows, errs


def run_verify(cfg: ExperimentConfig, workers: int | None = None) -> RunReport:
    rep = RunReport(cfg.echo())
    t0 = time.perf_counter()
    dens = _densities(cfg)
    jobs = [("single", (n,)) for n in cfg.verify_singles] + [("pair", p) for p in cfg.verify_pairs]

    def one(job):
        kind, args = job
        if kind == "single":
            return _single_verdicts(cfg, dens, *args)
        return _pair_verdicts(cfg, dens, *args)

    for rows, errs in _pool_map(one, jobs, workers):
        rep.verdicts.extend(rows)
        rep.errors.extend(errs)
    rep.timings["verify"] = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# flow


def run_flow(cfg: ExperimentConfig, workers: int | None = None) -> RunReport:
    rep = RunReport(cfg.echo())
    t0 = time.perf_counter()
    dens = _densities(cfg)
    mesh = default_mesh(cfg.mesh_final, cfg.mesh_start, cfg.mesh_ratio)
    jobs = []
    for p in cfg.flow_pairs:
        for k in p.kappas:
            jobs.append(("trace", p, k))
        if p.strengthened:
            jobs.append(("strengthened", p, None))

    def one(job):
        kind, p, k = job
        f, g = dens[p.f], dens[p.g]
        ident = f"{p.f}|{p.g}"
        try:
            if kind == "trace":
                kappa = optimal_kappa(f, g, cfg.spacing) if k == "optimal" else float(k)
                tr = lambda_trace(f, g, kappa, mesh, cfg.spacing)
                return kind, {"id": f"{ident}@kappa={k}", "kappa_spec": k, **tr.to_dict()}, tr
            sr = strengthened_epi(f, g, cfg.horizon, spacing=cfg.spacing, raise_on_short=False)
            return kind, {"id": ident, **sr.to_dict()}, sr
        except LcepiError as exc:
            return "error", _error(_classify(exc), f"{kind} {ident}", exc), None

    for kind, out, obj in _pool_map(one, jobs, workers):
        if kind == "error":
            rep.errors.append(out)
        elif kind == "trace":
            rep.flows.append(out)
            rep.failed_checks.extend(f"{out['id']}: {c}" for c, ok in out["checks"].items() if not ok)
        else:
            rep.strengthened.append(out)
            if out["partial"]:
                rep.warnings.append(f"{out['id']}: horizon too short; P_kappa is a partial lower bound")
            if not out["holds"]:
                rep.failed_checks.append(f"{out['id']}: strengthened EPI")
    rep.timings["flow"] = time.perf_counter() - t0
    return rep


def run_all(cfg: ExperimentConfig, workers: int | None = None) -> RunReport:
    rep = run_functionals(cfg, workers)
    rep.merge(run_verify(cfg, workers))
    rep.merge(run_flow(cfg, workers))
    return rep


# ---------------------------------------------------------------------------
# files


def write_json(rep: RunReport, out: Path, stem: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.json", out / f"{stem}.meta.json"]
    paths[0].write_text(dumps(rep))
    paths[1].write_text(dumps(rep.metadata()))
    (out / f"{stem}.summary.txt").write_text(rep.summary())
    return paths + [out / f"{stem}.summary.txt"]


FUNCTIONAL_COLUMNS = ("name", "H", "I", "J", "N", "err_H", "err_I", "err_J", "path", "converged")
VERDICT_COLUMNS = ("name", "f", "g", "a", "b", "lhs", "rhs", "slack", "noise", "rel_slack",
                   "holds", "near_equality", "determinate", "status")


def _csv_cell(x) -> str:
    x = to_jsonable(x)
    return repr(x) if isinstance(x, float) else str(x)


def write_csv(rep: RunReport, out: Path, stem: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if rep.functionals:
        p = out / f"{stem}.functionals.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FUNCTIONAL_COLUMNS)
            for r in rep.functionals:
                e = r["quad_error"]
                w.writerow([_csv_cell(x) for x in (r["name"], r["H"], r["I"], r["J"], r["N"], e["H"],
                                                   e["I"], e["J"], r["path"], r["converged"])])
        paths.append(p)
    if rep.verdicts:
        p = out / f"{stem}.verdicts.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(VERDICT_COLUMNS)
            for v in rep.verdicts:
                w.writerow([_csv_cell(v.get(c, "")) for c in VERDICT_COLUMNS])
        paths.append(p)
    for i, fl in enumerate(rep.flows):
        p = out / f"{stem}.flow{i}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in fl["rows"]:
                w.writerow([_csv_cell(row[c]) for c in CSV_COLUMNS])
        paths.append(p)
    meta = out / f"{stem}.meta.json"
    meta.write_text(dumps(rep.metadata()))
    return paths + [meta]
