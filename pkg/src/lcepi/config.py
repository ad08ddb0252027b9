"""Experiment configuration loaded from JSON and validated up front."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .densities import Family, gaussian_mixture, make_family, make_product
from .errors import ConfigError, LcepiError
from .inequalities import DEFAULT_AB, Name

__all__ = [
    "DensitySpec",
    "FlowPairSpec",
    "ExperimentConfig",
    "load_config",
    "default_config_path",
]

_MIXTURE = "gaussian_mixture"
_TOP_KEYS = {"densities", "grid", "verify", "flow", "output", "seed", "spot_checks"}


def _require(cond, fld, msg):
    if not cond:
        raise ConfigError(fld, msg)


@dataclass(frozen=True)
class DensitySpec:
    """A named density descriptor.

    ``family`` is a family name, ``"Product"`` (with ``factors``) or
    ``"gaussian_mixture"`` (a grid density for precondition checks).
    """

    name: str
    family: str
    params: dict = field(default_factory=dict)
    dim: int = 1
    loc: float | list | None = None
    factors: tuple = ()

    def build(self, spacing: float | None = None):
        if self.family == _MIXTURE:
            p = dict(self.params)
            kw = {"spacing": spacing} if spacing is not None else {}
            return gaussian_mixture(p["centers"], p.get("sigma", 1.0), p.get("weights"), **kw)
        if Family.parse(self.family) is Family.PRODUCT:
            return make_product([make_family(f["family"], f.get("params", {}), 1, f.get("loc"))
                                 for f in self.factors])
        return make_family(self.family, self.params, self.dim, self.loc)

    def to_dict(self) -> dict:
        out = {"name": self.name, "family": self.family, "params": dict(self.params),
               "dim": self.dim}
        if self.loc is not None:
            out["loc"] = self.loc
        if self.factors:
            out["factors"] = [dict(f) for f in self.factors]
        return out


@dataclass(frozen=True)
class FlowPairSpec:
    f: str
    g: str
    kappas: tuple = (0.5,)
    strengthened: bool = True

    def to_dict(self) -> dict:
        return {"f": self.f, "g": self.g, "kappa": list(self.kappas),
                "strengthened": self.strengthened}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``kappas`` entries are numbers in (0, 1) or ``"optimal"``.
    """

    densities: tuple
    spacing: float | None = None
    half_width: float = 8.0
    verify_pairs: tuple = ()
    verify_singles: tuple = ()
    ab: tuple = DEFAULT_AB
    inequalities: tuple = ()
    flow_pairs: tuple = ()
    mesh_final: float = 50.0
    mesh_start: float = 0.01
    mesh_ratio: float = 2.0
    horizon: float = 400.0
    out_dir: str | None = None
    seed: int = 0
    spot_checks: int = 8
    source: dict = field(default_factory=dict)

    def density(self, name: str):
        for d in self.densities:
            if d.name == name:
                return d
        raise ConfigError("densities", f"unknown density {name!r}")

    def with_overrides(self, spacing=None, seed=None, out_dir=None) -> "ExperimentConfig":
        from dataclasses import replace

        kw = {}
        if spacing is not None:
            _require(math.isfinite(spacing) and spacing > 0, "grid.spacing", "must be positive")
            kw["spacing"] = float(spacing)
        if seed is not None:
            kw["seed"] = int(seed)
        if out_dir is not None:
            kw["out_dir"] = str(out_dir)
        return replace(self, **kw)

    def echo(self) -> dict:
        """Normalized configuration, as reproduced in reports."""
        return {
            "densities": [d.to_dict() for d in self.densities],
            "grid": {"spacing": self.spacing, "half_width": self.half_width},
            "verify": {
                "pairs": [{"f": f, "g": g, **({"ab": [list(x) for x in ab]} if ab else {})}
                          for f, g, ab in self.verify_pairs],
                "singles": list(self.verify_singles),
                "ab": [list(x) for x in self.ab],
                "inequalities": list(self.inequalities),
            },
            "flow": {
                "pairs": [p.to_dict() for p in self.flow_pairs],
                "mesh": {"final": self.mesh_final, "start": self.mesh_start,
                         "ratio": self.mesh_ratio},
                "horizon": self.horizon,
            },
            "seed": self.seed,
            "spot_checks": self.spot_checks,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _require(isinstance(raw, dict), "<root>", "configuration must be a JSON object")
        unknown = set(raw) - _TOP_KEYS
        _require(not unknown, sorted(unknown)[0] if unknown else "", "unknown key")
        dens = tuple(_parse_density(d, i) for i, d in enumerate(raw.get("densities", [])))
        names = [d.name for d in dens]
        dup = {n for n in names if names.count(n) > 1}
        _require(not dup, "densities", f"duplicate names {sorted(dup)}")

        grid = raw.get("grid", {}) or {}
        spacing = grid.get("spacing")
        if spacing is not None:
            _require(_positive(spacing), "grid.spacing", "must be a positive number")
        half_width = grid.get("half_width", 8.0)
        _require(_positive(half_width), "grid.half_width", "must be a positive number")

        ver = raw.get("verify", {}) or {}
        pairs = _parse_pairs(ver.get("pairs", "all"), names, "verify.pairs")
        singles = ver.get("singles", "all")
        singles = tuple(names) if singles == "all" else tuple(singles)
        for s in singles:
            _require(s in names, "verify.singles", f"unknown density {s!r}")
        ab = _parse_ab(ver.get("ab", [list(x) for x in DEFAULT_AB]), "verify.ab")
        ineq = tuple(ver.get("inequalities", []))
        for q in ineq:
            try:
                Name(q)
            except ValueError:
                raise ConfigError("verify.inequalities", f"unknown inequality {q!r}") from None

        flow = raw.get("flow", {}) or {}
        fpairs = []
        for i, p in enumerate(flow.get("pairs", [])):
            fld = f"flow.pairs[{i}]"
            _require(isinstance(p, dict) and "f" in p and "g" in p, fld, "needs keys f and g")
            for k in ("f", "g"):
                _require(p[k] in names, f"{fld}.{k}", f"unknown density {p[k]!r}")
            ks = p.get("kappa", [0.5])
            ks = ks if isinstance(ks, list) else [ks]
            for k in ks:
                _require(k == "optimal" or (isinstance(k, (int, float)) and 0 < k < 1),
                         f"{fld}.kappa", f"must lie in (0, 1) or be 'optimal', got {k!r}")
            fpairs.append(FlowPairSpec(p["f"], p["g"], tuple(ks), bool(p.get("strengthened", True))))
        mesh = flow.get("mesh", {}) or {}
        final = mesh.get("final", 50.0)
        start = mesh.get("start", 0.01)
        ratio = mesh.get("ratio", 2.0)
        _require(_positive(final), "flow.mesh.final", "must be positive")
        _require(_positive(start) and start < final, "flow.mesh.start", "must lie in (0, final)")
        _require(_positive(ratio) and ratio > 1, "flow.mesh.ratio", "must exceed 1")
        horizon = flow.get("horizon", 400.0)
        _require(_positive(horizon), "flow.horizon", "must be positive")

        out = raw.get("output", {}) or {}
        seed = raw.get("seed", 0)
        _require(isinstance(seed, int), "seed", "must be an integer")
        spot = raw.get("spot_checks", 8)
        _require(isinstance(spot, int) and spot >= 0, "spot_checks", "must be a nonnegative integer")

        cfg = cls(
            densities=dens, spacing=spacing, half_width=float(half_width),
            verify_pairs=pairs, verify_singles=singles,
            ab=ab, inequalities=ineq,
            flow_pairs=tuple(fpairs), mesh_final=float(final), mesh_start=float(start),
            mesh_ratio=float(ratio), horizon=float(horizon), out_dir=out.get("dir"),
            seed=seed, spot_checks=spot, source=raw,
        )
        cfg._validate_densities()
        return cfg

    def _validate_densities(self):
        """Construct every density once so parameter errors surface at load time."""
        for i, d in enumerate(self.densities):
            try:
                d.build(self.spacing if d.family == _MIXTURE else None)
            except (LcepiError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"densities[{i}]", f"{d.name}: {exc}") from None


def _positive(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0


def _parse_density(raw, i) -> DensitySpec:
    fld = f"densities[{i}]"
    _require(isinstance(raw, dict), fld, "must be an object")
    _require(isinstance(raw.get("name"), str) and raw["name"], f"{fld}.name", "required string")
    fam = raw.get("family")
    _require(isinstance(fam, str), f"{fld}.family", "required string")
    if fam != _MIXTURE:
        try:
            Family.parse(fam)
        except LcepiError as exc:
            raise ConfigError(f"{fld}.family", str(exc)) from None
    else:
        _require("centers" in raw.get("params", {}), f"{fld}.params.centers",
                 "a mixture needs centers")
    params = raw.get("params", {}) or {}
    _require(isinstance(params, dict), f"{fld}.params", "must be an object")
    dim = raw.get("dim", 1)
    _require(dim in (1, 2), f"{fld}.dim", "must be 1 or 2")
    return DensitySpec(raw["name"], fam, dict(params), int(dim), raw.get("loc"),
                       tuple(raw.get("factors", ())))


def _parse_ab(ab, fld) -> tuple:
    _require(isinstance(ab, list) and ab, fld, "must be a nonempty list of [a, b]")
    for x in ab:
        _require(isinstance(x, (list, tuple)) and len(x) == 2 and all(_positive(v) for v in x),
                 fld, f"each entry must be two positive numbers, got {x!r}")
    return tuple((float(a), float(b)) for a, b in ab)


def _parse_pairs(raw, names, fld) -> tuple:
    """Entries are ``[f, g]`` or ``{"f", "g", "ab"}``; ``ab`` overrides the sweep."""
    if raw == "all":
        return tuple((a, b, None) for a in names for b in names)
    _require(isinstance(raw, list), fld, "must be 'all' or a list of pairs")
    out = []
    for i, p in enumerate(raw):
        ab = None
        if isinstance(p, dict):
            _require("f" in p and "g" in p, f"{fld}[{i}]", "needs keys f and g")
            if "ab" in p:
                ab = _parse_ab(p["ab"], f"{fld}[{i}].ab")
            p = (p["f"], p["g"])
        _require(isinstance(p, (list, tuple)) and len(p) == 2, f"{fld}[{i}]", f"bad pair {p!r}")
        for x in p:
            _require(x in names, f"{fld}[{i}]", f"unknown density {x!r}")
        out.append((p[0], p[1], ab))
    return tuple(out)


def default_config_path() -> Path:
    return Path(str(resources.files("lcepi") / "data" / "default_bundle.json"))


def load_config(path=None) -> ExperimentConfig:
    """Read and validate a JSON configuration; ``None`` loads the bundled default."""
    p = Path(path) if path is not None else default_config_path()
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError("--config", f"no such file {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw)
