"""Nonexpansive self-maps with analytically known fixed-point sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Mapping, Optional

import numpy as np

from .errors import ConstructionError, DomainError, EstimationError, PreconditionError, ValidationError
from .geometry import TOL, Region, combine
from .spaces import (
    ConvexSet,
    Singleton,
    Space,
    SubSphere,
    construct_set,
    project,
)

MAP_KINDS = ("rotation", "projection", "pull", "composition", "custom")


@dataclass(frozen=True)
class Map:
    """A self-map of ``space``; call it on a point to apply it.

    ``domain_guard`` is the ball on which the map is known to be
    nonexpansive; applying the map outside it raises :class:`DomainError`.
    """

    kind: ClassVar[str] = ""
    space: Space
    known_fixed_set: Optional[ConvexSet] = field(default=None, init=False)
    domain_guard: Optional[Region] = field(default=None, init=False)

    def _set(self, **kw):
        for k, v in kw.items():
            object.__setattr__(self, k, v)

    def in_domain(self, x, tol: float = TOL) -> bool:
        g = self.domain_guard
        return g is None or self.space.dist(np.asarray(g.center, dtype=float), x) <= g.radius + tol

    def __call__(self, x) -> np.ndarray:
        x = self.space.validate(x)
        if not self.in_domain(x):
            g = self.domain_guard
            d = self.space.dist(np.asarray(g.center, dtype=float), x)
            raise DomainError(f"{self.kind} map applied at distance {d!r} from its guard centre (radius {g.radius!r})")
        return self.space.validate(self._apply(x))

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


def apply(T: Map, x) -> np.ndarray:
    return T(x)


@dataclass(frozen=True)
class Rotation(Map):
    """Rotation by ``angle`` in the coordinate plane ``plane``.

    On the tripod the map instead permutes the legs cyclically by ``shift``.
    """

    kind: ClassVar[str] = "rotation"
    plane: tuple[int, int] = (0, 1)
    angle: float = 0.0
    shift: int = 0

    def __post_init__(self):
        sp = self.space
        if sp.kind == "tripod":
            fixed = None if self.shift % sp.legs == 0 else Singleton((0.0, 0.0))
            self._set(known_fixed_set=fixed)
            return
        i, j = self.plane
        if i == j or not (0 <= i < sp.width and 0 <= j < sp.width):
            raise ConstructionError(f"rotation plane {self.plane} is invalid for a {sp.width}-coordinate space")
        if sp.kind == "hyperbolic" and 0 in self.plane:
            raise ConstructionError("hyperbolic rotations must act on spatial coordinates (indices >= 1)")
        if sp.kind == "product":
            n = sp.sphere.width
            if (i < n) != (j < n):
                raise ConstructionError("product rotation plane must lie within one factor")
        if math.remainder(self.angle, 2 * math.pi) == 0.0:
            fixed = None  # identity: every point is fixed
        else:
            rest = tuple(a for a in range(sp.width) if a not in self.plane)
            if sp.kind == "euclidean" and not rest:
                fixed = Singleton(tuple(sp.origin()))
            elif sp.kind == "sphere" and not rest:
                fixed = None  # a rotation of the circle has no fixed point
            elif sp.kind == "product" and not any(a < sp.sphere.width for a in rest):
                fixed = None
            elif sp.kind == "hyperbolic" and rest == (0,):
                fixed = Singleton(tuple(sp.origin()))
            else:
                fixed = SubSphere(rest)
        self._set(known_fixed_set=fixed)

    def _apply(self, x):
        if self.space.kind == "tripod":
            if x[1] == 0.0:
                return x
            return np.array([float((int(x[0]) + self.shift) % self.space.legs), x[1]])
        i, j = self.plane
        c, s = math.cos(self.angle), math.sin(self.angle)
        y = x.copy()
        y[i] = c * x[i] - s * x[j]
        y[j] = s * x[i] + c * x[j]
        return y

    def spec(self) -> dict:
        if self.space.kind == "tripod":
            return {"kind": self.kind, "shift": int(self.shift)}
        return {"kind": self.kind, "plane": list(self.plane), "angle": float(self.angle)}


@dataclass(frozen=True)
class Projection(Map):
    """Nearest-point map onto a closed convex set; it fixes exactly that set."""

    kind: ClassVar[str] = "projection"
    target: ConvexSet = None

    def __post_init__(self):
        if self.target is None:
            raise ConstructionError("projection needs a target set")
        self.target.check(self.space)
        self._set(known_fixed_set=self.target)

    def _apply(self, x):
        return project(self.space, self.target, x)

    def spec(self) -> dict:
        return {"kind": self.kind, "target": self.target.spec()}


@dataclass(frozen=True)
class Pull(Map):
    """Geodesic contraction x -> (1-lam) anchor (+) lam x toward ``anchor``.

    On positively curved spaces the map is only nonexpansive on balls of
    radius at most D_K/2 about the anchor, so a guard radius is mandatory
    there.
    """

    kind: ClassVar[str] = "pull"
    anchor: tuple = ()
    lam: float = 0.5
    guard_radius: Optional[float] = None

    def __post_init__(self):
        sp = self.space
        try:
            anchor = tuple(float(c) for c in sp.validate(self.anchor))
        except ValidationError as exc:
            raise ConstructionError(f"pull anchor is not a valid point: {exc}") from exc
        object.__setattr__(self, "anchor", anchor)
        if not 0.0 <= self.lam <= 1.0:
            raise ConstructionError(f"pull factor must lie in [0, 1], got {self.lam}")
        curved = math.isfinite(sp.geodesic_bound)
        if curved:
            half = sp.geodesic_bound / 2
            if self.guard_radius is None:
                raise ConstructionError("pull on a positively curved space needs guard_radius")
            if not 0 < self.guard_radius <= half:
                raise ConstructionError(f"pull guard radius must lie in (0, {half!r}], got {self.guard_radius}")
        elif self.guard_radius is not None and self.guard_radius <= 0:
            raise ConstructionError(f"pull guard radius must be positive, got {self.guard_radius}")
        guard = None if self.guard_radius is None else Region(anchor, float(self.guard_radius))
        self._set(known_fixed_set=None if self.lam == 1.0 else Singleton(anchor), domain_guard=guard)

    def _apply(self, x):
        return combine(self.space, 1.0 - self.lam, np.asarray(self.anchor), x)

    def spec(self) -> dict:
        out = {"kind": self.kind, "anchor": list(self.anchor), "lam": float(self.lam)}
        if self.guard_radius is not None:
            out["guard_radius"] = float(self.guard_radius)
        return out


@dataclass(frozen=True)
class Composition(Map):
    """Apply ``maps`` in list order (the first entry acts first).

    The composite carries the first domain guard found among its members;
    each member still enforces its own guard when called.
    """

    kind: ClassVar[str] = "composition"
    maps: tuple = ()

    def __post_init__(self):
        if not self.maps:
            raise ConstructionError("composition needs at least one map")
        if any(m.space != self.space for m in self.maps):
            raise ConstructionError("all composed maps must act on the same space")
        guard = next((m.domain_guard for m in self.maps if m.domain_guard is not None), None)
        self._set(known_fixed_set=self._common_fixed_set(), domain_guard=guard)

    def _common_fixed_set(self):
        sets = [m.known_fixed_set for m in self.maps]
        if any(s is None for s in sets):
            return None
        if all(s == sets[0] for s in sets):
            return sets[0]
        for s in sets:
            if isinstance(s, Singleton):
                p = np.asarray(s.point, dtype=float)
                if all(m.in_domain(p) and self.space.dist(m(p), p) <= TOL for m in self.maps):
                    return s
        return None

    def _apply(self, x):
        for m in self.maps:
            x = m(x)
        return x

    def spec(self) -> dict:
        return {"kind": self.kind, "maps": [m.spec() for m in self.maps]}


@dataclass(frozen=True)
class Custom(Map):
    """User-supplied map. Nothing is assumed about it; probe it before trusting it."""

    kind: ClassVar[str] = "custom"
    fn: Callable[[Space, np.ndarray], np.ndarray] = None
    name: str = "custom"
    params: tuple = ()
    fixed: Optional[ConvexSet] = None

    def __post_init__(self):
        if self.fn is None:
            raise ConstructionError("custom map needs a function")
        if self.fixed is not None:
            self.fixed.check(self.space)
        self._set(known_fixed_set=self.fixed)

    def _apply(self, x):
        return np.asarray(self.fn(self.space, x), dtype=float)

    def spec(self) -> dict:
        out = {"kind": self.kind, "name": self.name, **dict(self.params)}
        if self.fixed is not None:
            out["fixed"] = self.fixed.spec()
        return out


# Named custom maps available from configuration files.
def _scale(space, x, factor=1.0):
    return factor * x


def _negate(space, x):
    return -x


CUSTOM_MAPS: dict[str, tuple[Callable, tuple[str, ...]]] = {
    "scale": (_scale, ("factor",)),
    "negate": (_negate, ()),
}


def _custom_from_spec(spec: Mapping, space: Space) -> Custom:
    name = str(spec.get("name", ""))
    if name not in CUSTOM_MAPS:
        raise ConstructionError(f"unknown custom map {name!r}; known: {sorted(CUSTOM_MAPS)}")
    if space.kind != "euclidean":
        raise ConstructionError(f"custom map {name!r} is defined on Euclidean space only")
    fn, keys = CUSTOM_MAPS[name]
    params = {k: float(spec[k]) for k in keys if k in spec}
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConstructionError(f"custom map {name!r} is missing {missing}")
    fixed = construct_set(spec["fixed"], space) if "fixed" in spec else None
    if fixed is None and (name == "negate" or params.get("factor", 1.0) != 1.0):
        fixed = Singleton(tuple(space.origin()))
    return Custom(space, fn=lambda sp, x: fn(sp, x, **params), name=name, params=tuple(params.items()), fixed=fixed)


def construct_map(spec: Mapping, space: Space) -> Map:
    """Build a map from a description, for example::

        {"kind": "rotation", "plane": [0, 1], "angle": pi / 2}
        {"kind": "projection", "target": {"kind": "ball", "center": [...], "radius": 0.3}}
        {"kind": "pull", "anchor": [0, 0, 1], "lam": 0.5, "guard_radius": 0.7}
        {"kind": "composition", "maps": [{...}, {...}]}
        {"kind": "custom", "name": "scale", "factor": 2.0}
    """
    kind = str(spec.get("kind", "")).lower()
    try:
        if kind == "rotation":
            if space.kind == "tripod":
                return Rotation(space, shift=int(spec.get("shift", 1)))
            plane = tuple(int(a) for a in spec.get("plane", (0, 1)))
            if len(plane) != 2:
                raise ConstructionError(f"rotation plane needs two axes, got {plane}")
            return Rotation(space, plane=plane, angle=float(spec.get("angle", 0.0)))
        if kind == "projection":
            return Projection(space, target=construct_set(spec["target"], space))
        if kind == "pull":
            g = spec.get("guard_radius")
            return Pull(space, anchor=tuple(spec["anchor"]), lam=float(spec.get("lam", 0.5)),
                        guard_radius=None if g is None else float(g))
        if kind == "composition":
            return Composition(space, maps=tuple(construct_map(m, space) for m in spec["maps"]))
        if kind == "custom":
            return _custom_from_spec(spec, space)
    except KeyError as exc:
        raise ConstructionError(f"{kind} map is missing parameter {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConstructionError):
            raise
        raise ConstructionError(f"bad {kind} map parameters: {exc}") from exc
    raise ConstructionError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}")


# ------------------------------------------------------------ probing


@dataclass(frozen=True)
class ProbeReport:
    max_ratio: float
    witness_pair: Optional[tuple]
    n_pairs: int
    nonexpansive: bool

    def as_dict(self) -> dict:
        w = None if self.witness_pair is None else [[float(c) for c in p] for p in self.witness_pair]
        return {"max_ratio": self.max_ratio, "witness_pair": w, "n_pairs": self.n_pairs,
                "nonexpansive": self.nonexpansive}


def nonexpansiveness_probe(T: Map, region: Optional[Region], n: int, seed: int, tol: float = TOL) -> ProbeReport:
    """Largest observed d(Tx, Ty) / d(x, y) over ``n`` random pairs from ``region``.

    ``region`` defaults to the map's domain guard. Pairs closer than 1e-12
    are skipped.
    """
    sp = T.space
    if region is None:
        region = T.domain_guard
    if region is None:
        raise PreconditionError("no sampling region given and the map has no domain guard", failed="region")
    g = T.domain_guard
    if g is not None:
        off = sp.dist(np.asarray(g.center, dtype=float), sp.validate(region.center))
        if off + region.radius > g.radius + tol:
            raise PreconditionError("sampling region leaves the map's domain guard", failed="region")
    rng = np.random.default_rng(seed)
    worst, witness, used = -math.inf, None, 0
    for _ in range(n):
        x, y = region.sample(sp, rng, 2)
        d = sp.dist(x, y)
        if d < 1e-12:
            continue
        used += 1
        r = sp.dist(T(x), T(y)) / d
        if r > worst:
            worst, witness = float(r), (x, y)
    if used == 0:
        raise EstimationError(f"no usable pairs among {n} samples")
    return ProbeReport(worst, witness, used, worst <= 1.0 + tol)
