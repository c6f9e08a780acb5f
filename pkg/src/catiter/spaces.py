"""Concrete geodesic spaces, their point representations, and convex subsets.

Points are plain 1-D float arrays in a per-space canonical representation:

* ``sphere``     -- vectors in R^(dim+1) of norm 1/sqrt(K)
* ``euclidean``  -- Cartesian coordinates in R^dim
* ``hyperbolic`` -- upper sheet of the hyperboloid x0^2 - |x_s|^2 = 1/(-K)
* ``tripod``     -- ``[leg, radius]``; the branch point is always ``[0, 0]``
* ``product``    -- sphere coordinates followed by Euclidean coordinates

Spaces are immutable value objects; every method is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Mapping

import numpy as np

from .errors import ConstructionError, DomainError, ValidationError

TOL = 1e-9

SPACE_KINDS = ("sphere", "euclidean", "hyperbolic", "tripod", "product")


def model_diameter(K: float) -> float:
    """Diameter of the model surface of constant curvature K (inf for K <= 0)."""
    K = float(K)
    if not math.isfinite(K):
        raise ValueError(f"curvature must be finite, got {K}")
    if K > 0:
        return math.pi / math.sqrt(K)
    return math.inf


def _unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(n)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            return v / nv


@dataclass(frozen=True)
class Space:
    """Base class for the concrete spaces.

    ``K`` is the curvature bound the space is certified against; for the
    sphere and hyperbolic space it is also the true sectional curvature.
    """

    kind: ClassVar[str] = ""
    K: float = 0.0
    dim: int = 1

    @property
    def diameter(self) -> float:
        """D_K for the handle's curvature bound."""
        return model_diameter(self.K)

    @property
    def geodesic_bound(self) -> float:
        """Distance below which geodesics in this space are unique."""
        return math.inf

    @property
    def width(self) -> int:
        """Number of coordinates in a point."""
        return self.dim

    def spec(self) -> dict:
        return {"kind": self.kind, "K": float(self.K), "dim": int(self.dim)}

    def _as_array(self, coords) -> np.ndarray:
        x = np.asarray(coords, dtype=float).reshape(-1)
        if x.shape != (self.width,):
            raise ValidationError(
                f"{self.kind} point needs {self.width} coordinates, got {x.size}",
                constraint="shape",
            )
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"{self.kind} point has non-finite coordinates", constraint="finite")
        return x

    def validate(self, coords) -> np.ndarray:
        return self._as_array(coords)

    def origin(self) -> np.ndarray:
        return np.zeros(self.width)

    def dist(self, x: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def interpolate(self, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Point at distance (1-t) d(x,y) from x on [xy]; no domain checks."""
        raise NotImplementedError

    def at_distance(self, center: np.ndarray, r: float, rng: np.random.Generator) -> np.ndarray:
        """A point at distance ``r`` from ``center`` in a random direction."""
        raise NotImplementedError

    def sample_ball(self, center, radius: float, rng: np.random.Generator, n: int) -> list[np.ndarray]:
        """``n`` random points of the closed ball B_radius[center]."""
        center = self.validate(center)
        return [self.at_distance(center, radius * rng.random(), rng) for _ in range(n)]

    def rescaled(self, scale: float) -> "Space":
        """Handle for the same point set with the metric multiplied by ``scale``."""
        raise NotImplementedError

    def scale_point(self, x: np.ndarray, scale: float) -> np.ndarray:
        """Coordinates of ``x`` in the handle returned by ``rescaled(scale)``."""
        return np.asarray(x, dtype=float) * scale

    def project_subspace(self, x: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
        raise DomainError(f"coordinate subspaces are not defined on {self.kind}")


@dataclass(frozen=True)
class Sphere(Space):
    kind: ClassVar[str] = "sphere"
    K: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not self.K > 0:
            raise ConstructionError(f"sphere needs K > 0, got K={self.K}")
        if self.dim < 1:
            raise ConstructionError(f"dimension must be positive, got {self.dim}")

    @property
    def radius(self) -> float:
        return 1.0 / math.sqrt(self.K)

    @property
    def geodesic_bound(self) -> float:
        return math.pi * self.radius

    @property
    def width(self) -> int:
        return self.dim + 1

    def validate(self, coords) -> np.ndarray:
        x = self._as_array(coords)
        nx = np.linalg.norm(x)
        if abs(nx - self.radius) > TOL:
            raise ValidationError(
                f"sphere point must have norm {self.radius!r}, got {nx!r}", constraint="norm"
            )
        # leave already-normalized points bit-identical so validation is idempotent
        if abs(nx - self.radius) <= 8 * np.finfo(float).eps * self.radius:
            return x
        return x * (self.radius / nx)

    def origin(self) -> np.ndarray:
        x = np.zeros(self.width)
        x[-1] = self.radius
        return x

    def polar_point(self, colatitude: float, longitude: float = 0.0) -> np.ndarray:
        """Point at angle ``colatitude`` from the north pole (last axis)."""
        x = np.zeros(self.width)
        x[-1] = math.cos(colatitude)
        if self.dim == 1:
            x[0] = math.sin(colatitude)
        else:
            x[0] = math.sin(colatitude) * math.cos(longitude)
            x[1] = math.sin(colatitude) * math.sin(longitude)
        return x * self.radius

    def _angle(self, u: np.ndarray, v: np.ndarray) -> float:
        # stable for both tiny and near-antipodal angles
        return 2.0 * math.atan2(np.linalg.norm(u - v), np.linalg.norm(u + v))

    def dist(self, x, y) -> float:
        R = self.radius
        return R * self._angle(x / R, y / R)

    def interpolate(self, t, x, y):
        R = self.radius
        u, v = x / R, y / R
        theta = self._angle(u, v)
        if theta < 1e-12:
            p = t * u + (1.0 - t) * v
        else:
            st = math.sin(theta)
            p = (math.sin(t * theta) / st) * u + (math.sin((1.0 - t) * theta) / st) * v
        return p * (R / np.linalg.norm(p))

    def at_distance(self, center, r, rng):
        R = self.radius
        u = center / R
        w = rng.standard_normal(self.width)
        w -= np.dot(w, u) * u
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            return self.at_distance(center, r, rng)
        a = r / R
        p = math.cos(a) * u + math.sin(a) * (w / nw)
        return p * (R / np.linalg.norm(p))

    def rescaled(self, scale):
        return Sphere(K=self.K / scale**2, dim=self.dim)

    def project_subspace(self, x, axes):
        p = np.zeros(self.width)
        idx = list(axes)
        p[idx] = x[idx]
        n = np.linalg.norm(p)
        if n < 1e-12 * self.radius:
            raise DomainError("point is equidistant from the whole great subsphere; projection not unique")
        return p * (self.radius / n)


@dataclass(frozen=True)
class Euclidean(Space):
    kind: ClassVar[str] = "euclidean"
    K: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if self.K < 0:
            raise ConstructionError(f"Euclidean space is not CAT(K) for K={self.K} < 0")
        if self.dim < 1:
            raise ConstructionError(f"dimension must be positive, got {self.dim}")

    def dist(self, x, y) -> float:
        return float(np.linalg.norm(x - y))

    def interpolate(self, t, x, y):
        return t * x + (1.0 - t) * y

    def at_distance(self, center, r, rng):
        return center + r * _unit_vector(rng, self.dim)

    def rescaled(self, scale):
        return Euclidean(K=self.K / scale**2, dim=self.dim)

    def project_subspace(self, x, axes):
        p = np.zeros(self.width)
        idx = list(axes)
        p[idx] = x[idx]
        return p


@dataclass(frozen=True)
class Hyperbolic(Space):
    kind: ClassVar[str] = "hyperbolic"
    K: float = -1.0
    dim: int = 2

    def __post_init__(self):
        if not self.K < 0:
            raise ConstructionError(f"hyperbolic space needs K < 0, got K={self.K}")
        if self.dim < 1:
            raise ConstructionError(f"dimension must be positive, got {self.dim}")

    @property
    def radius(self) -> float:
        return 1.0 / math.sqrt(-self.K)

    @property
    def width(self) -> int:
        return self.dim + 1

    @staticmethod
    def minkowski(x, y) -> float:
        return float(-x[0] * y[0] + np.dot(x[1:], y[1:]))

    def validate(self, coords) -> np.ndarray:
        x = self._as_array(coords)
        q = x[0] ** 2 - np.dot(x[1:], x[1:])
        R2 = self.radius**2
        if x[0] <= 0:
            raise ValidationError("hyperboloid point must lie on the upper sheet (x0 > 0)", constraint="sheet")
        if abs(q - R2) > TOL * max(1.0, x[0] ** 2):
            raise ValidationError(
                f"hyperboloid point must satisfy x0^2 - |x_s|^2 = {R2!r}, got {q!r}", constraint="minkowski"
            )
        return self._lift(x[1:])

    def _lift(self, spatial: np.ndarray) -> np.ndarray:
        return np.concatenate(([math.sqrt(self.radius**2 + np.dot(spatial, spatial))], spatial))

    def origin(self) -> np.ndarray:
        x = np.zeros(self.width)
        x[0] = self.radius
        return x

    def dist(self, x, y) -> float:
        d = x - y
        chord2 = max(self.minkowski(d, d), 0.0)
        R = self.radius
        return 2.0 * R * math.asinh(math.sqrt(chord2) / (2.0 * R))

    def interpolate(self, t, x, y):
        R = self.radius
        theta = self.dist(x, y) / R
        if theta < 1e-12:
            p = t * x + (1.0 - t) * y
        else:
            sh = math.sinh(theta)
            p = (math.sinh(t * theta) / sh) * x + (math.sinh((1.0 - t) * theta) / sh) * y
        return self._lift(p[1:])

    def at_distance(self, center, r, rng):
        R = self.radius
        w = rng.standard_normal(self.width)
        # Minkowski-orthogonal tangent vector at center
        w = w + self.minkowski(w, center) * center / R**2
        nw = math.sqrt(max(self.minkowski(w, w), 0.0))
        if nw < 1e-12:
            return self.at_distance(center, r, rng)
        a = r / R
        p = math.cosh(a) * center + R * math.sinh(a) * (w / nw)
        return self._lift(p[1:])

    def rescaled(self, scale):
        return Hyperbolic(K=self.K / scale**2, dim=self.dim)

    def project_subspace(self, x, axes):
        if 0 not in axes:
            raise DomainError("hyperbolic coordinate subspace must contain the time axis 0")
        p = np.zeros(self.width)
        idx = [a for a in axes if a != 0]
        p[idx] = x[idx]
        return self._lift(p[1:])


@dataclass(frozen=True)
class Tripod(Space):
    """Metric tree of ``legs`` half-lines glued at a branch point.

    An R-tree is CAT(K) for every K, so ``K`` is free.
    """

    kind: ClassVar[str] = "tripod"
    K: float = 0.0
    dim: int = 1
    legs: int = 3

    def __post_init__(self):
        if not math.isfinite(self.K):
            raise ConstructionError("curvature must be finite")
        if self.dim != 1:
            raise ConstructionError("tripod legs are one-dimensional")
        if self.legs < 1:
            raise ConstructionError(f"tripod needs at least one leg, got {self.legs}")

    @property
    def width(self) -> int:
        return 2

    def spec(self) -> dict:
        return {"kind": self.kind, "K": float(self.K), "legs": int(self.legs)}

    def point(self, leg: int, r: float) -> np.ndarray:
        return self.validate([leg, r])

    def validate(self, coords) -> np.ndarray:
        x = self._as_array(coords)
        leg, r = x
        if leg != round(leg) or not 0 <= leg < self.legs:
            raise ValidationError(f"leg id must be an integer in [0, {self.legs}), got {leg!r}", constraint="leg")
        if r < -TOL:
            raise ValidationError(f"leg radius must be nonnegative, got {r!r}", constraint="radius")
        return self._canon(int(leg), max(r, 0.0))

    @staticmethod
    def _canon(leg: int, r: float) -> np.ndarray:
        if r == 0.0:
            return np.array([0.0, 0.0])
        return np.array([float(leg), r])

    def dist(self, x, y) -> float:
        if x[0] == y[0]:
            return abs(x[1] - y[1])
        return x[1] + y[1]

    def interpolate(self, t, x, y):
        if x[0] == y[0] or x[1] == 0.0 or y[1] == 0.0:
            leg = y[0] if x[1] == 0.0 else x[0]
            return self._canon(int(leg), t * x[1] + (1.0 - t) * y[1])
        s = (1.0 - t) * (x[1] + y[1])
        if s <= x[1]:
            return self._canon(int(x[0]), x[1] - s)
        return self._canon(int(y[0]), s - x[1])

    def at_distance(self, center, r, rng):
        leg, rc = int(center[0]), center[1]
        if rc > 0 and rng.random() < 0.5:
            return self._canon(leg, rc + r)
        if r <= rc:
            return self._canon(leg, rc - r)
        others = [k for k in range(self.legs) if k != leg or rc == 0.0]
        return self._canon(int(rng.choice(others)), r - rc)

    def rescaled(self, scale):
        return Tripod(K=self.K / scale**2, legs=self.legs)

    def scale_point(self, x, scale):
        return self._canon(int(x[0]), x[1] * scale)


@dataclass(frozen=True)
class Product(Space):
    """L2 product of a round sphere with a Euclidean factor."""

    kind: ClassVar[str] = "product"
    K: float = 1.0
    dim: int = 2
    euclid_dim: int = 1
    sphere: Sphere = field(init=False, repr=False, compare=False)
    euclid: Euclidean = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.euclid_dim < 1:
            raise ConstructionError(f"Euclidean factor dimension must be positive, got {self.euclid_dim}")
        object.__setattr__(self, "sphere", Sphere(K=self.K, dim=self.dim))
        object.__setattr__(self, "euclid", Euclidean(dim=self.euclid_dim))

    @property
    def geodesic_bound(self) -> float:
        return self.sphere.geodesic_bound

    @property
    def width(self) -> int:
        return self.sphere.width + self.euclid_dim

    def spec(self) -> dict:
        return {"kind": self.kind, "K": float(self.K), "dim": int(self.dim), "euclid_dim": int(self.euclid_dim)}

    def split(self, x) -> tuple[np.ndarray, np.ndarray]:
        n = self.sphere.width
        return x[:n], x[n:]

    def join(self, a, b) -> np.ndarray:
        return np.concatenate((a, b))

    def validate(self, coords) -> np.ndarray:
        x = self._as_array(coords)
        a, b = self.split(x)
        return self.join(self.sphere.validate(a), b)

    def origin(self) -> np.ndarray:
        return self.join(self.sphere.origin(), self.euclid.origin())

    def dist(self, x, y) -> float:
        (a1, a2), (b1, b2) = self.split(x), self.split(y)
        return math.hypot(self.sphere.dist(a1, b1), self.euclid.dist(a2, b2))

    def interpolate(self, t, x, y):
        (a1, a2), (b1, b2) = self.split(x), self.split(y)
        return self.join(self.sphere.interpolate(t, a1, b1), self.euclid.interpolate(t, a2, b2))

    def at_distance(self, center, r, rng):
        a, b = self.split(center)
        phi = 0.5 * math.pi * rng.random()
        return self.join(
            self.sphere.at_distance(a, r * math.cos(phi), rng),
            self.euclid.at_distance(b, r * math.sin(phi), rng),
        )

    def rescaled(self, scale):
        return Product(K=self.K / scale**2, dim=self.dim, euclid_dim=self.euclid_dim)

    def project_subspace(self, x, axes):
        n = self.sphere.width
        a, b = self.split(x)
        sa = tuple(i for i in axes if i < n)
        sb = tuple(i - n for i in axes if i >= n)
        return self.join(self.sphere.project_subspace(a, sa), self.euclid.project_subspace(b, sb))


_SPACE_CLASSES = {cls.kind: cls for cls in (Sphere, Euclidean, Hyperbolic, Tripod, Product)}


def construct_space(spec: Mapping) -> Space:
    """Build a space handle from a description such as ``{"kind": "sphere", "K": 1, "dim": 2}``.

    Recognised keys: ``kind``, ``K``, ``dim``, ``legs`` (tripod) and
    ``euclid_dim`` (product; ``dim`` is then the sphere factor's dimension).
    """
    spec = dict(spec)
    kind = str(spec.pop("kind", "")).lower()
    if kind not in _SPACE_CLASSES:
        raise ConstructionError(f"unknown space kind {kind!r}; expected one of {SPACE_KINDS}")
    allowed = {"K", "dim"} | ({"legs"} if kind == "tripod" else set()) | ({"euclid_dim"} if kind == "product" else set())
    extra = set(spec) - allowed
    if extra:
        raise ConstructionError(f"unexpected keys for {kind} space: {sorted(extra)}")
    kwargs = {}
    try:
        if "K" in spec:
            kwargs["K"] = float(spec["K"])
        for key in ("dim", "legs", "euclid_dim"):
            if key in spec:
                val = spec[key]
                if isinstance(val, bool) or int(val) != val:
                    raise ConstructionError(f"{key} must be an integer, got {val!r}")
                kwargs[key] = int(val)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConstructionError):
            raise
        raise ConstructionError(f"bad {kind} space parameters: {exc}") from exc
    return _SPACE_CLASSES[kind](**kwargs)


def validate_point(space: Space, coords) -> np.ndarray:
    """Check ``coords`` against the representation constraint of ``space``.

    Returns the normalized coordinates; raises :class:`ValidationError`
    naming the violated constraint otherwise.
    """
    return space.validate(coords)


# ---------------------------------------------------------------- convex sets


@dataclass(frozen=True)
class GeodesicBall:
    center: tuple
    radius: float

    kind: ClassVar[str] = "ball"

    def check(self, space: Space) -> None:
        if not 0 <= self.radius < space.diameter / 2:
            raise ConstructionError(f"ball radius must lie in [0, D_K/2) = [0, {space.diameter / 2}), got {self.radius}")

    def nearest(self, space: Space, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        d = space.dist(c, x)
        if d <= self.radius:
            return x
        # point of [c x] at distance radius from c
        return space.interpolate(1.0 - self.radius / d, c, x)

    def contains(self, space, x, tol=TOL) -> bool:
        return space.dist(np.asarray(self.center, dtype=float), x) <= self.radius + tol

    def sample(self, space, rng, n):
        return space.sample_ball(self.center, self.radius, rng, n)

    def spec(self) -> dict:
        return {"kind": self.kind, "center": [float(c) for c in self.center], "radius": float(self.radius)}


@dataclass(frozen=True)
class SubSphere:
    """Totally geodesic subspace cut out by keeping the ambient coordinates ``axes``.

    On a sphere this is a great subsphere (``axes=(2,)`` on S^2 is the pair
    of poles), on Euclidean space a coordinate subspace, on the hyperboloid
    a totally geodesic copy of lower-dimensional hyperbolic space.
    """

    axes: tuple[int, ...]

    kind: ClassVar[str] = "subsphere"

    def check(self, space: Space) -> None:
        if space.kind == "tripod":
            raise ConstructionError("subspheres are not defined on the tripod")
        if not self.axes or len(set(self.axes)) != len(self.axes):
            raise ConstructionError(f"axes must be distinct and nonempty, got {self.axes}")
        if any(not 0 <= a < space.width for a in self.axes):
            raise ConstructionError(f"axes out of range for a {space.width}-coordinate space: {self.axes}")
        if space.kind == "hyperbolic" and 0 not in self.axes:
            raise ConstructionError("hyperbolic subspaces must keep the time axis 0")
        if space.kind == "product" and not any(a < space.sphere.width for a in self.axes):
            raise ConstructionError("product subspace must keep at least one sphere axis")

    def nearest(self, space, x):
        return space.project_subspace(x, self.axes)

    def contains(self, space, x, tol=TOL) -> bool:
        others = [i for i in range(space.width) if i not in self.axes]
        return bool(np.all(np.abs(x[others]) <= tol))

    def sample(self, space, rng, n):
        return [space.project_subspace(rng.standard_normal(space.width), self.axes) for _ in range(n)]

    def spec(self) -> dict:
        return {"kind": self.kind, "axes": [int(a) for a in self.axes]}


@dataclass(frozen=True)
class HalfLineOnLeg:
    """The ray ``{(leg, r) : r >= start}`` of a tripod."""

    leg: int
    start: float = 0.0

    kind: ClassVar[str] = "halfline"

    def check(self, space: Space) -> None:
        if space.kind != "tripod":
            raise ConstructionError("half-lines on legs exist only on the tripod")
        if not 0 <= self.leg < space.legs or self.start < 0:
            raise ConstructionError(f"bad half-line leg={self.leg} start={self.start}")

    def nearest(self, space, x):
        if int(x[0]) == self.leg and x[1] >= self.start:
            return x
        return space.point(self.leg, self.start)

    def contains(self, space, x, tol=TOL) -> bool:
        if self.start <= tol and x[1] <= tol:
            return True
        return int(x[0]) == self.leg and x[1] >= self.start - tol

    def sample(self, space, rng, n):
        return [space.point(self.leg, self.start + rng.exponential(1.0)) for _ in range(n)]

    def spec(self) -> dict:
        return {"kind": self.kind, "leg": int(self.leg), "start": float(self.start)}


@dataclass(frozen=True)
class Singleton:
    point: tuple

    kind: ClassVar[str] = "singleton"

    def check(self, space: Space) -> None:
        space.validate(self.point)

    def nearest(self, space, x):
        return np.asarray(self.point, dtype=float)

    def contains(self, space, x, tol=TOL) -> bool:
        return space.dist(np.asarray(self.point, dtype=float), x) <= tol

    def sample(self, space, rng, n):
        return [np.asarray(self.point, dtype=float) for _ in range(n)]

    def spec(self) -> dict:
        return {"kind": self.kind, "point": [float(c) for c in self.point]}


ConvexSet = GeodesicBall | SubSphere | HalfLineOnLeg | Singleton


def construct_set(spec: Mapping, space: Space) -> ConvexSet:
    """Build a convex set from ``{"kind": "ball", "center": [...], "radius": r}`` etc."""
    spec = dict(spec)
    kind = str(spec.get("kind", "")).lower()
    try:
        if kind == "ball":
            cs = GeodesicBall(tuple(space.validate(spec["center"])), float(spec["radius"]))
        elif kind == "subsphere":
            cs = SubSphere(tuple(int(a) for a in spec["axes"]))
        elif kind == "halfline":
            cs = HalfLineOnLeg(int(spec["leg"]), float(spec.get("start", 0.0)))
        elif kind == "singleton":
            cs = Singleton(tuple(space.validate(spec["point"])))
        else:
            raise ConstructionError(f"unknown convex set kind {kind!r}")
    except KeyError as exc:
        raise ConstructionError(f"{kind} set is missing parameter {exc}") from exc
    except ValidationError as exc:
        raise ConstructionError(f"{kind} set has an invalid point: {exc}") from exc
    cs.check(space)
    return cs


def project(space: Space, cset: ConvexSet, x) -> np.ndarray:
    """Nearest point of ``cset`` to ``x``.

    Raises :class:`DomainError` when ``d(x, cset) >= D_K/2``, where the
    nearest point need not be unique.
    """
    x = space.validate(x)
    cset.check(space)
    p = cset.nearest(space, x)
    d = space.dist(x, p)
    if d >= space.diameter / 2:
        raise DomainError(f"d(x, set) = {d!r} is not below D_K/2 = {space.diameter / 2!r}")
    return p
