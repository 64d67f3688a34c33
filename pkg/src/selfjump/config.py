"""YAML run configuration: parsing, validation, and field construction.

A run file is a mapping with a required ``field`` section and optional
``simulate``, ``target``, ``solver``, ``mc``, ``fixed_point`` sections plus a
top-level ``seed``.  Validation is eager and every complaint carries the
dotted path of the offending key, so a typo in a nested matrix points at
``field.q0`` rather than at a stack trace.  Parsed values stay plain Python
lists; arrays are built only when the field object is constructed.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields

import numpy as np
import yaml

from . import errors
from .core import FAMILIES, RateField
from .varsolve import SolveOptions

SAMPLERS = ("thinning", "exact-affine")


def _require_map(value, loc):
    if not isinstance(value, dict):
        raise errors.ConfigError(f"expected a mapping, got {type(value).__name__}", loc)
    return value


def _no_extras(section, allowed, loc):
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise errors.ConfigError(f"unknown key {extra[0]!r}", loc)


def _number(value, loc):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise errors.ConfigError(f"expected a number, got {value!r}", loc)
    return float(value)


def _integer(value, loc, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise errors.ConfigError(f"expected an integer, got {value!r}", loc)
    if minimum is not None and value < minimum:
        raise errors.ConfigError(f"must be >= {minimum}, got {value}", loc)
    return value


def _vector(value, loc):
    if not isinstance(value, list) or not value:
        raise errors.ConfigError("expected a nonempty list of numbers", loc)
    return [_number(v, f"{loc}[{i}]") for i, v in enumerate(value)]


def _matrix(value, loc):
    if not isinstance(value, list) or not value:
        raise errors.ConfigError("expected a nonempty list of rows", loc)
    rows = [_vector(row, f"{loc}[{i}]") for i, row in enumerate(value)]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise errors.ConfigError(
                f"row {i} has {len(row)} entries, expected {width}", loc)
    return rows


def _square(value, loc):
    rows = _matrix(value, loc)
    if len(rows) != len(rows[0]):
        raise errors.ConfigError(
            f"expected a square matrix, got {len(rows)}x{len(rows[0])}", loc)
    return rows


@dataclass(frozen=True)
class FieldConfig:
    family: str
    q0: list | None = None
    strength: float | None = None
    alpha: list | None = None
    beta: list | None = None
    generators: list | None = None
    vertices: list | None = None

    @property
    def d(self):
        if self.q0 is not None:
            return len(self.q0)
        if self.generators is not None:
            return len(self.generators[0])
        return len(self.vertices[0])


def _parse_field(section, loc="field"):
    section = _require_map(section, loc)
    family = section.get("family")
    if family not in FAMILIES:
        raise errors.ConfigError(
            f"family must be one of {', '.join(FAMILIES)}, got {family!r}",
            f"{loc}.family")
    needs = {
        "constant": ("q0",),
        "autochemotaxis": ("q0", "strength"),
        "congestion": ("q0", "alpha", "beta"),
        "catalytic": ("generators",),
        "affine": ("vertices",),
    }[family]
    _no_extras(section, ("family",) + needs, loc)
    for key in needs:
        if key not in section:
            raise errors.ConfigError(f"family {family!r} needs {key!r}", loc)
    kw = {}
    if "q0" in needs:
        kw["q0"] = _square(section["q0"], f"{loc}.q0")
    if "strength" in needs:
        kw["strength"] = _number(section["strength"], f"{loc}.strength")
    if "alpha" in needs:
        kw["alpha"] = _vector(section["alpha"], f"{loc}.alpha")
        kw["beta"] = _vector(section["beta"], f"{loc}.beta")
    if family == "catalytic":
        gens = section["generators"]
        if not isinstance(gens, list) or not gens:
            raise errors.ConfigError("expected a list of matrices", f"{loc}.generators")
        kw["generators"] = [_square(g, f"{loc}.generators[{i}]")
                            for i, g in enumerate(gens)]
    if family == "affine":
        verts = section["vertices"]
        if not isinstance(verts, list) or not verts:
            raise errors.ConfigError("expected a list of matrices", f"{loc}.vertices")
        kw["vertices"] = [_square(v, f"{loc}.vertices[{i}]")
                          for i, v in enumerate(verts)]
    return FieldConfig(family=family, **kw)


def build_field(fc):
    """Construct the RateField described by a FieldConfig.

    Invalid generators (negative off-diagonal rates, bad sizes, congestion
    factors that can turn negative) surface as ConfigError at field level.
    """
    try:
        if fc.family == "constant":
            return RateField.constant(np.array(fc.q0))
        if fc.family == "autochemotaxis":
            return RateField.autochemotaxis(np.array(fc.q0), strength=fc.strength)
        if fc.family == "congestion":
            return RateField.congestion(np.array(fc.q0), alpha=np.array(fc.alpha),
                                        beta=np.array(fc.beta))
        if fc.family == "catalytic":
            return RateField.catalytic(np.stack([np.array(g) for g in fc.generators]))
        return RateField.affine(np.stack([np.array(v) for v in fc.vertices]))
    except errors.SelfJumpError as exc:
        raise errors.ConfigError(str(exc), "field") from exc


@dataclass(frozen=True)
class SimulateConfig:
    x0: int
    horizon: float
    n_paths: int = 1
    sampler: str = "thinning"


def _parse_simulate(section, d, loc="simulate"):
    section = _require_map(section, loc)
    _no_extras(section, ("x0", "horizon", "n_paths", "sampler"), loc)
    for key in ("x0", "horizon"):
        if key not in section:
            raise errors.ConfigError(f"missing {key!r}", loc)
    x0 = _integer(section["x0"], f"{loc}.x0", minimum=1)
    if x0 > d:
        raise errors.ConfigError(f"x0 must be a state label in 1..{d}, got {x0}",
                                 f"{loc}.x0")
    horizon = _number(section["horizon"], f"{loc}.horizon")
    if horizon <= 0:
        raise errors.ConfigError("horizon must be positive", f"{loc}.horizon")
    n_paths = _integer(section.get("n_paths", 1), f"{loc}.n_paths", minimum=1)
    sampler = section.get("sampler", "thinning")
    if sampler not in SAMPLERS:
        raise errors.ConfigError(
            f"sampler must be one of {', '.join(SAMPLERS)}, got {sampler!r}",
            f"{loc}.sampler")
    return SimulateConfig(x0=x0, horizon=horizon, n_paths=n_paths, sampler=sampler)


@dataclass(frozen=True)
class TargetConfig:
    gamma: list | None = None
    flux: list | None = None
    current: list | None = None


def _parse_target(section, d, loc="target"):
    section = _require_map(section, loc)
    _no_extras(section, ("gamma", "flux", "current"), loc)
    kw = {}
    if "gamma" in section:
        gamma = _vector(section["gamma"], f"{loc}.gamma")
        if len(gamma) != d:
            raise errors.ConfigError(f"gamma has {len(gamma)} entries, field has {d}",
                                     f"{loc}.gamma")
        kw["gamma"] = gamma
    for key in ("flux", "current"):
        if key in section:
            m = _square(section[key], f"{loc}.{key}")
            if len(m) != d:
                raise errors.ConfigError(f"{key} is {len(m)}x{len(m)}, field has {d}",
                                         f"{loc}.{key}")
            kw[key] = m
    return TargetConfig(**kw)


_SOLVER_KEYS = tuple(f.name for f in dataclass_fields(SolveOptions))
_SOLVER_INTS = ("grid_cells", "n_starts", "seed", "penalty_rounds", "inner_maxiter")


def _parse_solver(section, loc="solver"):
    section = _require_map(section, loc)
    _no_extras(section, _SOLVER_KEYS, loc)
    kw = {}
    for key, value in section.items():
        if key in _SOLVER_INTS:
            kw[key] = _integer(value, f"{loc}.{key}", minimum=1 if key != "seed" else 0)
        else:
            kw[key] = _number(value, f"{loc}.{key}")
    return kw


@dataclass(frozen=True)
class McConfig:
    x0: int
    times: list
    n_paths: int
    center: list
    radius: float
    rate: float | None = None
    sampler: str = "thinning"


def _parse_mc(section, d, loc="mc"):
    section = _require_map(section, loc)
    _no_extras(section, ("x0", "times", "n_paths", "center", "radius", "rate",
                         "sampler"), loc)
    for key in ("x0", "times", "n_paths", "center", "radius"):
        if key not in section:
            raise errors.ConfigError(f"missing {key!r}", loc)
    x0 = _integer(section["x0"], f"{loc}.x0", minimum=1)
    if x0 > d:
        raise errors.ConfigError(f"x0 must be a state label in 1..{d}, got {x0}",
                                 f"{loc}.x0")
    times = _vector(section["times"], f"{loc}.times")
    if min(times) <= 0:
        raise errors.ConfigError("times must be positive", f"{loc}.times")
    center = _vector(section["center"], f"{loc}.center")
    if len(center) != d:
        raise errors.ConfigError(f"center has {len(center)} entries, field has {d}",
                                 f"{loc}.center")
    radius = _number(section["radius"], f"{loc}.radius")
    if not 0.0 < radius <= 2.0:
        raise errors.ConfigError(f"radius must lie in (0, 2], got {radius}",
                                 f"{loc}.radius")
    rate = None
    if "rate" in section:
        rate = _number(section["rate"], f"{loc}.rate")
    sampler = section.get("sampler", "thinning")
    if sampler not in SAMPLERS:
        raise errors.ConfigError(
            f"sampler must be one of {', '.join(SAMPLERS)}, got {sampler!r}",
            f"{loc}.sampler")
    return McConfig(x0=x0, times=times, n_paths=_integer(section["n_paths"],
                    f"{loc}.n_paths", minimum=1), center=center, radius=radius,
                    rate=rate, sampler=sampler)


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-10
    max_iter: int = 500
    n_starts: int = 1


def _parse_fixed_point(section, loc="fixed_point"):
    section = _require_map(section, loc)
    _no_extras(section, ("tol", "max_iter", "n_starts"), loc)
    kw = {}
    if "tol" in section:
        kw["tol"] = _number(section["tol"], f"{loc}.tol")
        if kw["tol"] <= 0:
            raise errors.ConfigError("tol must be positive", f"{loc}.tol")
    if "max_iter" in section:
        kw["max_iter"] = _integer(section["max_iter"], f"{loc}.max_iter", minimum=1)
    if "n_starts" in section:
        kw["n_starts"] = _integer(section["n_starts"], f"{loc}.n_starts", minimum=1)
    return FixedPointConfig(**kw)


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    field: FieldConfig
    seed: int = 0
    simulate: SimulateConfig | None = None
    target: TargetConfig | None = None
    solver: dict | None = None
    mc: McConfig | None = None
    fixed_point: FixedPointConfig | None = None

    def solve_options(self, seed=None):
        kw = dict(self.solver or {})
        if seed is not None:
            kw.setdefault("seed", seed)
        return SolveOptions(**kw)


_SECTIONS = ("field", "seed", "simulate", "target", "solver", "mc", "fixed_point")


def parse_config(raw):
    """Validate a loaded mapping into a RunConfig."""
    raw = _require_map(raw, "config")
    _no_extras(raw, _SECTIONS, "config")
    if "field" not in raw:
        raise errors.ConfigError("missing 'field' section", "config")
    fc = _parse_field(raw["field"])
    d = fc.d
    seed = _integer(raw.get("seed", 0), "config.seed", minimum=0)
    kw = {}
    if "simulate" in raw:
        kw["simulate"] = _parse_simulate(raw["simulate"], d)
    if "target" in raw:
        kw["target"] = _parse_target(raw["target"], d)
    if "solver" in raw:
        kw["solver"] = _parse_solver(raw["solver"])
    if "mc" in raw:
        kw["mc"] = _parse_mc(raw["mc"], d)
    if "fixed_point" in raw:
        kw["fixed_point"] = _parse_fixed_point(raw["fixed_point"])
    return RunConfig(raw=raw, field=fc, seed=seed, **kw)


def serialize(cfg):
    """Rebuild a plain mapping from parsed sections.

    Reparsing the result yields the same RunConfig up to defaults made
    explicit, which is the round-trip contract for config echoes.
    """
    out = {"seed": cfg.seed}
    fc = cfg.field
    fd = {"family": fc.family}
    for key in ("q0", "strength", "alpha", "beta", "generators", "vertices"):
        value = getattr(fc, key)
        if value is not None:
            fd[key] = value
    out["field"] = fd
    if cfg.simulate is not None:
        sc = cfg.simulate
        out["simulate"] = {"x0": sc.x0, "horizon": sc.horizon,
                           "n_paths": sc.n_paths, "sampler": sc.sampler}
    if cfg.target is not None:
        tc = cfg.target
        out["target"] = {k: v for k, v in
                         (("gamma", tc.gamma), ("flux", tc.flux),
                          ("current", tc.current)) if v is not None}
    if cfg.solver is not None:
        out["solver"] = dict(cfg.solver)
    if cfg.mc is not None:
        mcc = cfg.mc
        section = {"x0": mcc.x0, "times": mcc.times, "n_paths": mcc.n_paths,
                   "center": mcc.center, "radius": mcc.radius,
                   "sampler": mcc.sampler}
        if mcc.rate is not None:
            section["rate"] = mcc.rate
        out["mc"] = section
    if cfg.fixed_point is not None:
        fp = cfg.fixed_point
        out["fixed_point"] = {"tol": fp.tol, "max_iter": fp.max_iter,
                              "n_starts": fp.n_starts}
    return out


def load_config(path):
    """Read and validate a YAML run file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise errors.ConfigError(str(exc), str(path)) from exc
    except yaml.YAMLError as exc:
        raise errors.ConfigError(f"not valid YAML: {exc}", str(path)) from exc
    return parse_config(raw)
