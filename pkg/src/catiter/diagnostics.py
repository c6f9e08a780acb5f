"""Post-hoc certification of recorded traces.

Each ``*_check`` returns an :class:`InequalityReport` whose per-step slack is
``rhs - lhs`` of the certified inequality, so a negative slack beyond the
tolerance is a violation and its index is reported as the witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, DomainError, IntegrityError, UnsupportedError
from .geometry import combine
from .iteration import Trace
from .maps import Map
from .spaces import Space, project


@dataclass(frozen=True)
class InequalityReport:
    name: str
    per_step_slack: tuple
    min_slack: float
    satisfied: bool
    tolerance: float
    witness: Optional[int] = None

    def as_dict(self) -> dict:
        return {"name": self.name, "min_slack": self.min_slack, "satisfied": self.satisfied,
                "tolerance": self.tolerance, "witness_step": self.witness, "steps": len(self.per_step_slack)}


def _report(name: str, slacks: Sequence[float], tol: float) -> InequalityReport:
    slacks = tuple(float(v) for v in slacks)
    if not slacks:
        return InequalityReport(name, (), math.inf, True, tol, None)
    i = int(np.argmin(slacks))
    return InequalityReport(name, slacks, slacks[i], slacks[i] >= -tol, tol, i)


def residual_series(trace: Trace, T: Optional[Map] = None, tol: float = 1e-9) -> np.ndarray:
    """The stored residual column, cross-checked against d(T x_n, x_n) when ``T`` is given."""
    if not trace.rows:
        raise ArgumentError("empty trace")
    stored = trace.residuals()
    if T is not None:
        sp = T.space
        for row in trace.rows:
            if math.isnan(row.residual):
                continue
            x = np.array(row.x)
            r = sp.dist(T(x), x)
            if abs(r - row.residual) > tol:
                raise IntegrityError(f"row {row.n}: stored residual {row.residual!r} but recomputed {r!r}")
    return stored


def _valid_residuals(trace: Trace) -> np.ndarray:
    r = trace.residuals()
    n = len(r)
    while n and math.isnan(r[n - 1]):
        n -= 1
    return r[:n]


def fejer_report(trace: Trace, space: Space, fixed_points: Sequence, tol: float = 1e-12) -> InequalityReport:
    """Per step, min over q of d(x_n, q) - d(x_{n+1}, q)."""
    qs = [space.validate(q) for q in fixed_points]
    xs = trace.xs()
    slacks = []
    for a, b in zip(xs, xs[1:]):
        slacks.append(min(space.dist(a, q) - space.dist(b, q) for q in qs) if qs else math.inf)
    return _report("fejer", slacks, tol)


def fixed_point_sample(T: Map, x0, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Points of Fix(T) within D_K/2 of x0: the reference set for Fejer monotonicity."""
    F = T.known_fixed_set
    if F is None:
        raise UnsupportedError("map has no known fixed set")
    sp = T.space
    x0 = sp.validate(x0)
    pts = F.sample(sp, rng, n)
    try:
        pts.append(F.nearest(sp, x0))
    except DomainError:
        pass
    return [q for q in pts if sp.dist(q, x0) < sp.diameter / 2]


def default_C(trace: Trace, space: Space) -> float:
    """C = 2 d(x0, F) measured after rescaling a CAT(K>0) space to CAT(1)."""
    if trace.guard is None:
        raise UnsupportedError("trace has no guard report; pass C explicitly")
    scale = math.sqrt(space.K) if space.K > 0 else 1.0
    return 2.0 * trace.guard.d_x0_F * scale


def lemma_l2_check(trace: Trace, space: Space, T: Map, C: Optional[float] = None,
                   tol: float = 1e-9) -> InequalityReport:
    """d(T x_{n+1}, x_{n+1}) <= [1 + 4 (C / sin C) t_n (1 - t_n) s_n] d(T x_n, x_n)."""
    if C is None:
        C = default_C(trace, space)
    if not 0.0 < C < math.pi:
        raise DomainError(f"C must lie in (0, pi), got {C!r}")
    r = _valid_residuals(trace)
    q = C / math.sin(C)
    slacks = []
    for n in range(len(r) - 1):
        row = trace.rows[n]
        factor = 1.0 + 4.0 * q * row.t * (1.0 - row.t) * row.s
        slacks.append(factor * r[n] - r[n + 1])
    return _report("lemma_l2", slacks, tol)


def lemma_l7_step_check(trace: Trace, space: Space, T: Map, tol: float = 1e-9) -> InequalityReport:
    """d(T x_{n+1}, x_{n+1}) <= [1 + 2 s_n (1 - t_n)] d(x_n, T x_n)."""
    r = _valid_residuals(trace)
    slacks = []
    for n in range(len(r) - 1):
        row = trace.rows[n]
        slacks.append((1.0 + 2.0 * row.s * (1.0 - row.t)) * r[n] - r[n + 1])
    return _report("lemma_l7", slacks, tol)


def energy_bound_check(trace: Trace, space: Space, T: Map, p, k: float, tol: float = 1e-9) -> InequalityReport:
    """(k/2) sum_{n<N} t_n (1 - t_n) d²(T y_n, x_n) <= d²(p, x_0) for every prefix N."""
    p = space.validate(p)
    x0 = np.array(trace.rows[0].x)
    budget = space.dist(p, x0) ** 2
    acc = 0.0
    slacks = []
    for row in trace.rows:
        if row.y is None:
            break
        x = np.array(row.x)
        Ty = T(np.array(row.y))
        acc += 0.5 * k * row.t * (1.0 - row.t) * space.dist(Ty, x) ** 2
        slacks.append(budget - acc)
    return _report("energy_bound", slacks, tol)


# ------------------------------------------------------------ asymptotic centre


@dataclass(frozen=True)
class CenterEstimate:
    center: np.ndarray
    radius: float
    tail_start: int
    search_residual: float
    improved: bool


def _radius(space, c, pts) -> tuple[float, int]:
    d = [space.dist(c, x) for x in pts]
    i = int(np.argmax(d))
    return float(d[i]), i


def asymptotic_center_estimate(trace: Trace, space: Space, tail_start: int, iters: int = 2000,
                               max_pairs_sample: int = 150) -> CenterEstimate:
    """Approximate minimiser of max_{n >= tail_start} d(c, x_n).

    Starting from the last tail point, repeatedly step a fraction
    1/(k+2) of the way toward the currently farthest tail point and keep the
    best centre seen. ``search_residual`` is the gap between the returned
    radius and half the largest pairwise distance in (a subsample of) the
    tail, which bounds the true minimax radius from below.
    """
    pts = trace.xs()[tail_start:]
    if len(pts) < 2:
        raise ArgumentError(f"tail from {tail_start} has {len(pts)} points; need at least 2")
    c = pts[-1]
    initial, far = _radius(space, c, pts)
    best_c, best_r = c, initial
    for k in range(iters):
        if best_r == 0.0:
            break
        lam = 1.0 / (k + 2)
        try:
            c = combine(space, 1.0 - lam, c, pts[far])
        except DomainError:
            break
        r, far = _radius(space, c, pts)
        if r < best_r:
            best_c, best_r = c, r
    step = max(1, len(pts) // max_pairs_sample)
    sub = pts[::step] + [pts[-1]]
    lower = 0.5 * max(space.dist(a, b) for i, a in enumerate(sub) for b in sub[i + 1:])
    return CenterEstimate(best_c, best_r, tail_start, best_r - lower, best_r < initial or initial == 0.0)


# ------------------------------------------------------------ sequences


@dataclass(frozen=True)
class ZhangReport:
    premise_holds: bool
    witness_index: Optional[int]
    limit_estimate: float
    converges_to_zero: bool


def zhang_convergence(a: Sequence[float], b: Sequence[float], tol: float = 1e-8, atol: float = 0.0,
                      window: Optional[int] = None) -> ZhangReport:
    """Check a_{n+1} <= (1 + b_n) a_n pointwise and estimate lim a_n.

    ``converges_to_zero`` needs both the last-window mean and the smallest
    entry (a subsequence witness) to be within ``tol`` of zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ArgumentError("a and b must be 1-D sequences of the same length >= 2")
    if np.any(a < 0) or np.any(b < 0):
        raise ArgumentError("sequences must be nonnegative")
    bad = np.nonzero(a[1:] > (1.0 + b[:-1]) * a[:-1] + atol)[0]
    witness = int(bad[0]) if bad.size else None
    w = window or max(1, a.size // 10)
    limit = float(np.mean(a[-w:]))
    return ZhangReport(witness is None, witness, limit, bool(limit <= tol and a.min() <= tol))


# ------------------------------------------------------------ limit proxy


@dataclass(frozen=True)
class DeltaLimitReport:
    limit: np.ndarray
    dist_to_F: float
    cauchy_tail: float
    tail_radius: float
    radius_ok: bool

    def as_dict(self) -> dict:
        return {"limit": [float(c) for c in self.limit], "dist_to_F": self.dist_to_F,
                "cauchy_tail": self.cauchy_tail, "tail_radius": self.tail_radius, "radius_ok": self.radius_ok}


def delta_limit_proxy(trace: Trace, space: Space, T: Map, tail: int = 10) -> DeltaLimitReport:
    """Metric-limit stand-in for the Delta-limit of a converged trace.

    ``tail_radius`` is max over the recorded tail of d(p, x_n) for the
    guard's nearest fixed point p; ``radius_ok`` records whether it stays
    below D_K/2.
    """
    if trace.stop_reason != "tolerance":
        raise UnsupportedError(f"trace stopped by {trace.stop_reason!r}, not by tolerance")
    if T.known_fixed_set is None:
        raise UnsupportedError("map has no known fixed set")
    xs = trace.xs()
    limit = xs[-1]
    dist_to_F = float(space.dist(limit, project(space, T.known_fixed_set, limit)))
    last = xs[-tail:]
    cauchy = max((space.dist(a, b) for i, a in enumerate(last) for b in last[i + 1:]), default=0.0)
    if trace.guard is not None and trace.guard.nearest_fixed_point is not None:
        p = np.array(trace.guard.nearest_fixed_point)
        tail_radius = max(space.dist(p, x) for x in last)
    else:
        tail_radius = math.nan
    return DeltaLimitReport(limit, dist_to_F, float(cauchy), float(tail_radius),
                            bool(tail_radius < space.diameter / 2))


# ------------------------------------------------------------ rescaling


@dataclass(frozen=True)
class RescaleReport:
    steps: int
    same_length: bool
    max_coord_dev: float
    max_dist_dev: float

    def agrees(self, tol: float = 1e-9) -> bool:
        return self.same_length and self.max_coord_dev <= tol and self.max_dist_dev <= tol


def compare_rescaled(trace_K: Trace, space_K: Space, trace_1: Trace, space_1: Space, scale: float) -> RescaleReport:
    """Compare a run with its counterpart after multiplying the metric by ``scale``.

    Coordinates are compared through ``space_K.scale_point``; distances are
    the residuals and d(x_n, p), which must scale by exactly ``scale``.
    """
    n = min(len(trace_K), len(trace_1))
    coord, dist = 0.0, 0.0
    for a, b in zip(trace_K.rows[:n], trace_1.rows[:n]):
        xa = space_K.scale_point(np.array(a.x), scale)
        coord = max(coord, float(np.max(np.abs(xa - np.array(b.x)))))
        dist = max(dist, abs(scale * a.residual - b.residual))
        if a.dist_to_p is not None and b.dist_to_p is not None:
            dist = max(dist, abs(scale * a.dist_to_p - b.dist_to_p))
    return RescaleReport(n, len(trace_K) == len(trace_1), coord, dist)
