"""Experiment configuration files (TOML).

A run config looks like::

    seed = 7

    [space]
    kind = "sphere"
    K = 1
    dim = 2

    [map]
    kind = "rotation"
    plane = [0, 1]
    angle = "pi/2"

    [schedule]
    t = "constant(0.5)"
    s = "power(1, 1, 2)"

    [x0]
    colatitude = "pi/8"      # or: coords = [...]
    longitude = 0

    [stop]
    tol = 1e-8
    max_iters = 2000

    [diagnostics]
    enabled = ["residual", "fejer", "lemma_l2", "lemma_l7", "energy", "delta_limit"]  # default: all that apply

    [output]
    dir = "out"
    name = "sphere_rotation"

Dotted keys (``space.kind = "sphere"``) are equivalent to tables. Numeric
values may be given as strings holding an arithmetic expression in ``pi``,
``e``, ``sqrt``, ``sin`` and ``cos``. See the README for the ``[sweep]``,
``[verify]`` and ``[estimate]`` sections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import CatIterError, ConfigError
from .expr import ExpressionError, number

DIAGNOSTICS = ("residual", "probe", "fejer", "lemma_l2", "lemma_l7", "zhang", "energy", "delta_limit")

# keys whose values are numbers (or lists of numbers) wherever they appear
_NUMERIC = {
    "K", "angle", "lam", "guard_radius", "radius", "factor", "start", "center", "anchor", "point",
    "coords", "colatitude", "longitude", "tol", "model_K", "C", "fejer_tol", "limit_tol", "probe_radius",
}
_INTEGER = {"dim", "legs", "euclid_dim", "shift", "leg", "max_iters", "seed", "samples", "cap", "workers",
            "probe_samples", "fejer_samples", "k_samples", "tail"}


def _convert(key: str, value: Any, where: str) -> Any:
    try:
        if key in _NUMERIC:
            if isinstance(value, list):
                return [_convert(key, v, where) for v in value]
            return number(value)
        if key in _INTEGER:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}: expected an integer, got {value!r}")
            return value
    except (ExpressionError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    if isinstance(value, dict):
        return {k: _convert(k, v, f"{where}.{k}") for k, v in value.items()}
    if isinstance(value, list):
        return [_convert("", v, f"{where}[{i}]") if isinstance(v, dict) else v for i, v in enumerate(value)]
    return value


def normalise(raw: Mapping) -> dict:
    """Evaluate numeric expressions and type-check integer keys."""
    return {k: _convert(k, v, k) for k, v in raw.items()}


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return normalise(raw)


def _section(raw: Mapping, name: str, required: bool = True) -> dict:
    sec = raw.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(sec)


def _known(sec: Mapping, name: str, allowed) -> None:
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigError(f"[{name}] has unknown keys {extra}; allowed: {sorted(allowed)}")


@dataclass(frozen=True)
class ExperimentConfig:
    space: dict
    map: dict
    t: str
    s: str
    x0: dict
    tol: float = 1e-8
    max_iters: int = 1000
    seed: int = 0
    diagnostics: Optional[tuple] = None  # None: every check that applies to the run
    options: dict = field(default_factory=dict)
    out_dir: Optional[str] = None
    name: str = "run"

    def with_overrides(self, seed=None, tol=None, max_iters=None, out_dir=None) -> "ExperimentConfig":
        kw = {}
        if seed is not None:
            kw["seed"] = int(seed)
        if tol is not None:
            kw["tol"] = float(tol)
        if max_iters is not None:
            kw["max_iters"] = int(max_iters)
        if out_dir is not None:
            kw["out_dir"] = str(out_dir)
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {"space": self.space, "map": self.map, "schedule": {"t": self.t, "s": self.s}, "x0": self.x0,
                "stop": {"tol": self.tol, "max_iters": self.max_iters}, "seed": self.seed,
                "diagnostics": None if self.diagnostics is None else list(self.diagnostics), "options": self.options, "name": self.name}


_DIAG_OPTIONS = {"enabled", "probe_samples", "probe_radius", "fejer_samples", "fejer_tol", "k_samples", "tol",
                 "limit_tol", "C", "tail"}


def experiment_from_dict(raw: Mapping) -> ExperimentConfig:
    space = _section(raw, "space")
    mp = _section(raw, "map")
    sched = _section(raw, "schedule")
    _known(sched, "schedule", {"t", "s"})
    if "t" not in sched:
        raise ConfigError("[schedule] needs t")
    t, s = sched["t"], sched.get("s", "constant(0)")
    if not isinstance(t, str) or not isinstance(s, str):
        raise ConfigError("[schedule] t and s must be strings such as \"harmonic(1, 2)\"")
    x0 = _section(raw, "x0")
    _known(x0, "x0", {"coords", "colatitude", "longitude"})
    if ("coords" in x0) == ("colatitude" in x0):
        raise ConfigError("[x0] needs exactly one of coords or colatitude")
    stop = _section(raw, "stop", required=False)
    _known(stop, "stop", {"tol", "max_iters"})
    diag = _section(raw, "diagnostics", required=False)
    _known(diag, "diagnostics", _DIAG_OPTIONS)
    enabled = diag.pop("enabled", None)
    enabled = None if enabled is None else tuple(enabled)
    bad = [d for d in enabled or () if d not in DIAGNOSTICS]
    if bad:
        raise ConfigError(f"[diagnostics] unknown checks {bad}; known: {list(DIAGNOSTICS)}")
    out = _section(raw, "output", required=False)
    _known(out, "output", {"dir", "name"})
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return ExperimentConfig(
        space=space, map=mp, t=t, s=s, x0=x0,
        tol=float(stop.get("tol", 1e-8)), max_iters=int(stop.get("max_iters", 1000)),
        seed=seed, diagnostics=enabled, options=diag,
        out_dir=out.get("dir"), name=str(out.get("name", "run")),
    )


SWEEP_AXES = ("t", "s", "colatitude", "K")


@dataclass(frozen=True)
class SweepConfig:
    base: ExperimentConfig
    axes: dict
    cap: int = 256
    workers: int = 1
    rescale_check: bool = False

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values()) if self.axes else 1


def sweep_from_dict(raw: Mapping) -> SweepConfig:
    base = experiment_from_dict(raw)
    sec = _section(raw, "sweep", required=False)
    _known(sec, "sweep", set(SWEEP_AXES) | {"cap", "workers", "rescale_check"})
    axes = {}
    for name in SWEEP_AXES:
        vals = sec.get(name)
        if vals is None:
            continue
        if not isinstance(vals, list):
            raise ConfigError(f"[sweep] {name} must be a list")
        if vals:
            axes[name] = list(vals)
    if "K" in axes:
        try:
            axes["K"] = [number(v) for v in axes["K"]]
        except (ExpressionError, TypeError, ValueError) as exc:
            raise ConfigError(f"[sweep] K: {exc}") from exc
    cap = int(sec.get("cap", 256))
    workers = int(sec.get("workers", 1))
    if cap < 1 or workers < 1:
        raise ConfigError("[sweep] cap and workers must be positive")
    return SweepConfig(base, axes, cap, workers, bool(sec.get("rescale_check", False)))


@dataclass(frozen=True)
class VerifyConfig:
    space: dict
    model_K: Optional[float] = None
    samples: int = 10_000
    seed: int = 0
    region_radius: float = math.pi / 8
    tol: float = 1e-9
    suites: tuple = ("comparison", "contraction", "defect")
    out_dir: Optional[str] = None
    name: str = "verify"


VERIFY_SUITES = ("comparison", "contraction", "defect")


def verify_from_dict(raw: Mapping) -> VerifyConfig:
    space = _section(raw, "space")
    sec = _section(raw, "verify", required=False)
    _known(sec, "verify", {"model_K", "samples", "region_radius", "tol", "suites"})
    suites = tuple(sec.get("suites", VERIFY_SUITES))
    bad = [s for s in suites if s not in VERIFY_SUITES]
    if bad:
        raise ConfigError(f"[verify] unknown suites {bad}; known: {list(VERIFY_SUITES)}")
    out = _section(raw, "output", required=False)
    _known(out, "output", {"dir", "name"})
    try:
        radius = number(sec.get("region_radius", math.pi / 8))
    except (ExpressionError, TypeError, ValueError) as exc:
        raise ConfigError(f"[verify] region_radius: {exc}") from exc
    return VerifyConfig(space, sec.get("model_K"), int(sec.get("samples", 10_000)), int(raw.get("seed", 0)),
                        radius, float(sec.get("tol", 1e-9)), suites, out.get("dir"),
                        str(out.get("name", "verify")))


@dataclass(frozen=True)
class EstimateConfig:
    space: dict
    center: Optional[list] = None
    radius: float = math.pi / 8
    samples: int = 10_000
    seed: int = 0
    out_dir: Optional[str] = None
    name: str = "estimate_k"


def estimate_from_dict(raw: Mapping) -> EstimateConfig:
    space = _section(raw, "space")
    sec = _section(raw, "estimate", required=False)
    _known(sec, "estimate", {"center", "radius", "samples"})
    out = _section(raw, "output", required=False)
    _known(out, "output", {"dir", "name"})
    return EstimateConfig(space, sec.get("center"), float(sec.get("radius", math.pi / 8)),
                          int(sec.get("samples", 10_000)), int(raw.get("seed", 0)), out.get("dir"),
                          str(out.get("name", "estimate_k")))


def load(path, kind: str):
    path = Path(path)
    raw = load_toml(path)
    builders = {"run": experiment_from_dict, "sweep": sweep_from_dict, "verify": verify_from_dict,
                "estimate-k": estimate_from_dict}
    try:
        out = builders[kind](raw)
        if "name" not in raw.get("output", {}):
            # default artifact name: the config file's stem
            if isinstance(out, SweepConfig):
                out = replace(out, base=replace(out.base, name=path.stem))
            else:
                out = replace(out, name=path.stem)
        return out
    except CatIterError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
