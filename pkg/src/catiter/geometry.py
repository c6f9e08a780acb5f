"""Curvature-parametrized primitives and sampled certification of the CAT(K) inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError, DomainError, EstimationError, PreconditionError
from .spaces import Space, model_diameter

TOL = 1e-9
ANTIPODAL_GUARD = 1e-9
DEGENERATE_DENOM = 1e-12


def dist(space: Space, x, y) -> float:
    return float(space.dist(space.validate(x), space.validate(y)))


def combine(space: Space, t: float, x, y) -> np.ndarray:
    """The point ``t x (+) (1-t) y`` of the geodesic [xy].

    It sits at distance ``(1-t) d(x,y)`` from ``x`` and ``t d(x,y)`` from
    ``y``; ``t=1`` returns ``x`` and ``t=0`` returns ``y`` exactly.
    """
    if not 0.0 <= t <= 1.0:
        raise ArgumentError(f"interpolation parameter must lie in [0, 1], got {t!r}")
    x = space.validate(x)
    y = space.validate(y)
    if t == 1.0:
        return x
    if t == 0.0:
        return y
    d = space.dist(x, y)
    if d >= space.geodesic_bound - ANTIPODAL_GUARD:
        raise DomainError(f"d(x, y) = {d!r} is too close to {space.geodesic_bound!r}; geodesic not unique")
    if d == 0.0:
        return x
    return space.interpolate(t, x, y)


@dataclass(frozen=True)
class Region:
    """Sampling region: the closed ball of ``radius`` about ``center``."""

    center: tuple
    radius: float

    def sample(self, space: Space, rng: np.random.Generator, n: int) -> list[np.ndarray]:
        return space.sample_ball(self.center, self.radius, rng, n)

    def spec(self) -> dict:
        return {"center": [float(c) for c in self.center], "radius": float(self.radius)}


# ------------------------------------------------------------ comparison triangles


@dataclass(frozen=True)
class ComparisonReport:
    lhs: float
    rhs: float
    slack: float
    satisfied: bool


def _comparison_distance(K: float, ab: float, ac: float, bc: float, u: float, v: float) -> float:
    """Distance in M_K between the points at fractions u, v of the sides at the apex.

    Uses the haversine form of each law of cosines so that thin triangles
    keep full relative precision.
    """
    if K > 0:
        s = math.sqrt(K)
        A, B, C = ab * s, ac * s, bc * s
        hav = lambda z: math.sin(0.5 * z) ** 2
        hav_g = (hav(C) - hav(A - B)) / (math.sin(A) * math.sin(B))
        hav_g = min(max(hav_g, 0.0), 1.0)
        h = hav(u * A - v * B) + math.sin(u * A) * math.sin(v * B) * hav_g
        return 2.0 * math.asin(math.sqrt(min(max(h, 0.0), 1.0))) / s
    if K < 0:
        s = math.sqrt(-K)
        A, B, C = ab * s, ac * s, bc * s
        sh2 = lambda z: math.sinh(0.5 * z) ** 2
        hav_g = (sh2(C) - sh2(A - B)) / (math.sinh(A) * math.sinh(B))
        hav_g = min(max(hav_g, 0.0), 1.0)
        h = sh2(u * A - v * B) + math.sinh(u * A) * math.sinh(v * B) * hav_g
        return 2.0 * math.asinh(math.sqrt(max(h, 0.0))) / s
    hav_g = (bc**2 - (ab - ac) ** 2) / (4.0 * ab * ac)
    hav_g = min(max(hav_g, 0.0), 1.0)
    a, b = u * ab, v * ac
    return math.sqrt(max((a - b) ** 2 + 4.0 * a * b * hav_g, 0.0))


def comparison_check(space: Space, K: float, a, b, c, u: float, v: float, tol: float = TOL) -> ComparisonReport:
    """Compare d(z1, z2) with its M_K counterpart for the triangle abc.

    ``z1`` lies at fraction ``u`` of [ab] measured from ``a``, ``z2`` at
    fraction ``v`` of [ac]. The comparison triangle is solved in closed
    form with ``a~`` at the apex; a zero side at the apex collapses to a
    segment comparison with slack 0.
    """
    for name, val in (("u", u), ("v", v)):
        if not 0.0 <= val <= 1.0:
            raise ArgumentError(f"{name} must lie in [0, 1], got {val!r}")
    a, b, c = space.validate(a), space.validate(b), space.validate(c)
    ab, ac, bc = space.dist(a, b), space.dist(a, c), space.dist(b, c)
    DK = model_diameter(K)
    if max(ab, ac, bc) >= DK:
        raise DomainError(f"a side length reaches D_K = {DK!r}")
    if ab + ac + bc >= 2 * DK:
        raise DomainError(f"perimeter {ab + ac + bc!r} is not below 2 D_K = {2 * DK!r}")
    z1 = combine(space, 1.0 - u, a, b)
    z2 = combine(space, 1.0 - v, a, c)
    lhs = float(space.dist(z1, z2))
    if ab == 0.0 or ac == 0.0:
        rhs = lhs
    else:
        rhs = _comparison_distance(K, ab, ac, bc, u, v)
    return ComparisonReport(lhs=lhs, rhs=rhs, slack=rhs - lhs, satisfied=bool(lhs <= rhs + tol))


# ------------------------------------------------------------ CAT(1) inequalities


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    satisfied: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def _require_cat1(space: Space) -> None:
    if space.K > 1.0:
        raise PreconditionError(f"space is certified CAT({space.K}), not CAT(1)", failed="cat1")


def contraction_factor(t: float, C: float) -> float:
    return math.sin(t * C) / math.sin(C)


def contraction_bound_check(space: Space, p, x, y, t: float, C: float, tol: float = TOL) -> BoundReport:
    """Check d((1-t)p (+) t x, (1-t)p (+) t y) <= sin(tC)/sin(C) d(x, y) on a CAT(1) space."""
    _require_cat1(space)
    if not 0.0 < C <= math.pi / 2:
        raise PreconditionError(f"C must lie in (0, pi/2], got {C!r}", failed="C")
    if not 0.0 <= t <= 1.0:
        raise ArgumentError(f"t must lie in [0, 1], got {t!r}")
    p, x, y = space.validate(p), space.validate(x), space.validate(y)
    for name, d in (("d(p,x)", space.dist(p, x)), ("d(p,y)", space.dist(p, y)), ("d(x,y)", space.dist(x, y))):
        if d > C + tol:
            raise PreconditionError(f"{name} = {d!r} exceeds C = {C!r}", failed=name)
    lhs = float(space.dist(combine(space, 1.0 - t, p, x), combine(space, 1.0 - t, p, y)))
    rhs = contraction_factor(t, C) * float(space.dist(x, y))
    return BoundReport(lhs=lhs, rhs=rhs, satisfied=bool(lhs <= rhs + tol))


def _defect_terms(space: Space, x, y, z, t: float, tol: float):
    _require_cat1(space)
    if not 0.0 <= t <= 1.0:
        raise ArgumentError(f"t must lie in [0, 1], got {t!r}")
    x, y, z = space.validate(x), space.validate(y), space.validate(z)
    dxy, dxz, dyz = space.dist(x, y), space.dist(x, z), space.dist(y, z)
    q = math.pi / 4
    for name, d, bound in (("d(x,y)", dxy, q), ("d(x,z)", dxz, q), ("d(y,z)", dyz, 2 * q)):
        if d > bound + tol:
            raise PreconditionError(f"{name} = {d!r} exceeds {bound!r}", failed=name)
    m = combine(space, t, y, z)
    base = t * dxy**2 + (1.0 - t) * dxz**2 - space.dist(x, m) ** 2
    return base, t * (1.0 - t) * dyz**2


def convexity_defect(space: Space, x, y, z, t: float, k: float, tol: float = TOL) -> float:
    """t d²(x,y) + (1-t) d²(x,z) - (k/2) t(1-t) d²(y,z) - d²(x, t y (+) (1-t) z).

    A nonnegative value certifies the strong-convexity inequality for this
    sample and this ``k``.
    """
    base, denom = _defect_terms(space, x, y, z, t, tol)
    return float(base - 0.5 * k * denom)


@dataclass(frozen=True)
class DefectSample:
    """The triple attaining the current k estimate; ``defect`` is evaluated at that k."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    t: float
    defect: float


def sample_triples(space: Space, region: Region, n: int, rng: np.random.Generator):
    for _ in range(n):
        x, y, z = region.sample(space, rng, 3)
        yield x, y, z, float(rng.random())


def _check_region(region: Region) -> None:
    if region.radius > math.pi / 8 + TOL:
        raise PreconditionError(
            f"region radius {region.radius!r} exceeds pi/8; sampled triples could violate the distance hypotheses",
            failed="region",
        )


REFINE_DENOM = 1e-8  # below this the ratio is dominated by cancellation error


def _ratio(space: Space, x, y, z, t: float, floor: float) -> Optional[tuple[float, float, float]]:
    base, denom = _defect_terms(space, x, y, z, t, TOL)
    if denom < floor:
        return None
    return 2.0 * base / denom, base, denom


def _into_region(space: Space, region: Region, p: np.ndarray) -> np.ndarray:
    c = space.validate(region.center)
    d = space.dist(c, p)
    if d <= region.radius:
        return p
    return combine(space, 1.0 - region.radius / d, c, p)


def _refine(space: Space, region: Region, start: tuple, rng: np.random.Generator, steps: int):
    """Seeded stochastic descent on the defect ratio, staying inside ``region``."""
    x, y, z, t = start
    cur = _ratio(space, x, y, z, t, REFINE_DENOM)
    if cur is None:
        return start, None
    step = 0.25 * region.radius
    for _ in range(steps):
        cand = [_into_region(space, region, space.at_distance(p, step * rng.random(), rng)) for p in (x, y, z)]
        ct = min(1.0, max(0.0, t + step * rng.standard_normal()))
        try:
            r = _ratio(space, *cand, ct, REFINE_DENOM)
        except (DomainError, PreconditionError):
            r = None
        if r is not None and r[0] < cur[0]:
            (x, y, z), t, cur = cand, ct, r
        else:
            step *= 0.97
        step = max(step, 1e-6 * region.radius)
    return (x, y, z, t), cur


def estimate_k_witness(space: Space, region: Region, n_samples: int, seed: int,
                       refine: int = 8, refine_steps: int = 400) -> tuple[float, DefectSample]:
    """Like :func:`estimate_k`, also returning the sample that attains the estimate."""
    _check_region(region)
    rng = np.random.default_rng(seed)
    scored = []
    for x, y, z, t in sample_triples(space, region, n_samples, rng):
        r = _ratio(space, x, y, z, t, DEGENERATE_DENOM)
        if r is not None:
            scored.append((r[0], (x, y, z, t), r))
    if not scored:
        raise EstimationError(f"no usable samples among {n_samples}")
    scored.sort(key=lambda item: item[0])
    best, (x, y, z, t), (_, base, denom) = scored[0]
    for _, start, _ in scored[:refine]:
        pt, r = _refine(space, region, start, rng, refine_steps)
        if r is not None and r[0] < best:
            best, (x, y, z, t), (_, base, denom) = r[0], pt, r
    return float(best), DefectSample(x, y, z, t, float(base - 0.5 * best * denom))


def estimate_k(space: Space, region: Region, n_samples: int, seed: int) -> float:
    """Empirical infimum of the largest admissible k over triples in ``region``.

    ``n_samples`` random triples are scored by the ratio
    ``2 * defect_base / (t(1-t) d²(y,z))`` (samples with a denominator below
    1e-12 are skipped); the best few are then pushed downhill by a seeded
    random local search that stays inside the region. The worst cases sit
    near degenerate configurations (y close to z, far from x), which plain
    sampling rarely hits. The result is deterministic in ``seed``.
    """
    return estimate_k_witness(space, region, n_samples, seed)[0]


# ------------------------------------------------------------ rescaling


def rescale_to_cat1(K: float, space: Space) -> tuple[Space, float]:
    """Multiply the metric by sqrt(K): a CAT(K) handle becomes a CAT(1) handle.

    Points correspond through ``space.scale_point(x, scale)``.
    """
    if not K > 0:
        raise DomainError(f"rescaling to CAT(1) needs K > 0, got {K!r}; use the space unchanged")
    scale = math.sqrt(K)
    if K == 1.0:
        return space, 1.0
    return space.rescaled(scale), scale


# ------------------------------------------------------------ sampling suites


@dataclass(frozen=True)
class SuiteReport:
    name: str
    n: int
    min_slack: float
    mean_slack: float
    satisfied: bool
    witness: Optional[dict] = None
    extra: Optional[dict] = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "min_slack": self.min_slack,
            "mean_slack": self.mean_slack,
            "satisfied": self.satisfied,
            "witness": self.witness,
            "extra": self.extra,
        }


def _pts(*xs) -> list:
    return [[float(c) for c in x] for x in xs]


def default_triangle_radius(space: Space, K: float) -> float:
    """Radius of a sampling ball whose triangles have perimeter below 2 D_K."""
    bound = min(model_diameter(K), space.geodesic_bound)
    if math.isfinite(bound):
        return 0.3 * bound
    return 2.0


def comparison_suite(space: Space, K: float, n: int, seed: int, radius: Optional[float] = None,
                     tol: float = TOL) -> SuiteReport:
    """Comparison inequality over ``n`` random triangles in a random ball.

    Each triangle is drawn from a ball of ``radius`` around a random centre
    and gets random fractions ``u, v``.
    """
    rng = np.random.default_rng(seed)
    radius = default_triangle_radius(space, K) if radius is None else radius
    slacks = []
    worst, witness = math.inf, None
    for _ in range(n):
        # hyperboloid coordinates lose precision far from the base point
        reach = space.geodesic_bound if math.isfinite(space.geodesic_bound) else radius
        center = space.at_distance(space.origin(), reach * rng.random(), rng)
        a, b, c = space.sample_ball(center, radius, rng, 3)
        u, v = float(rng.random()), float(rng.random())
        rep = comparison_check(space, K, a, b, c, u, v, tol)
        slacks.append(rep.slack)
        if rep.slack < worst:
            worst = rep.slack
            witness = {"a": _pts(a)[0], "b": _pts(b)[0], "c": _pts(c)[0], "u": u, "v": v,
                       "lhs": rep.lhs, "rhs": rep.rhs}
    return SuiteReport("comparison", n, worst, float(np.mean(slacks)), worst >= -tol, witness, {"K": K, "radius": radius})


def contraction_suite(space: Space, n: int, seed: int, tol: float = TOL) -> SuiteReport:
    """Sine-contraction bound over ``n`` random admissible (p, x, y, t, C)."""
    rng = np.random.default_rng(seed)
    slacks = []
    worst, witness = math.inf, None
    done = 0
    while done < n:
        C = 0.5 * math.pi * (1.0 - rng.random())
        p = space.at_distance(space.origin(), math.pi * rng.random(), rng)
        x, y = space.sample_ball(p, C, rng, 2)
        if space.dist(x, y) > C:
            continue
        t = float(rng.random())
        rep = contraction_bound_check(space, p, x, y, t, C, tol)
        done += 1
        slacks.append(rep.slack)
        if rep.slack < worst:
            worst = rep.slack
            witness = {"p": _pts(p)[0], "x": _pts(x)[0], "y": _pts(y)[0], "t": t, "C": C}
    return SuiteReport("contraction", n, worst, float(np.mean(slacks)), worst >= -tol, witness)


def defect_suite(space: Space, region: Region, k: float, n: int, seed: int, tol: float = TOL) -> SuiteReport:
    """Convexity defect at fixed ``k`` over ``n`` random triples of ``region``."""
    _check_region(region)
    rng = np.random.default_rng(seed)
    vals = []
    worst, witness = math.inf, None
    for x, y, z, t in sample_triples(space, region, n, rng):
        d = convexity_defect(space, x, y, z, t, k, tol)
        vals.append(d)
        if d < worst:
            worst = d
            witness = {"x": _pts(x)[0], "y": _pts(y)[0], "z": _pts(z)[0], "t": t}
    return SuiteReport("convexity_defect", n, worst, float(np.mean(vals)), worst >= -tol, witness, {"k": k})
