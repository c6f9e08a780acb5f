"""The Ishikawa iteration, its Mann special case, and trace recording.

One Ishikawa step from x with parameters (t, s) is

    y      = s T(x) (+) (1 - s) x
    x_next = t T(y) (+) (1 - t) x

and the Mann step is the case s = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, UnsupportedError
from .geometry import combine
from .maps import Map
from .schedules import Family, Schedule, mann, schedule_terms

STOP_REASONS = ("tolerance", "max_iters", "guard_violation")


@dataclass(frozen=True)
class StepResult:
    y: np.ndarray
    x_next: np.ndarray


def _step(T: Map, x: np.ndarray, Tx: np.ndarray, t: float, s: float) -> StepResult:
    sp = T.space
    y = combine(sp, s, Tx, x)
    x_next = combine(sp, t, T(y), x)
    return StepResult(y, x_next)


def ishikawa_step(T: Map, x, t: float, s: float) -> StepResult:
    x = T.space.validate(x)
    return _step(T, x, T(x), t, s)


def mann_step(T: Map, x, t: float) -> np.ndarray:
    x = T.space.validate(x)
    return combine(T.space, t, T(x), x)


@dataclass(frozen=True)
class GuardReport:
    d_x0_F: float
    threshold: float
    passed: bool
    nearest_fixed_point: Optional[tuple]

    def as_dict(self) -> dict:
        p = None if self.nearest_fixed_point is None else list(self.nearest_fixed_point)
        return {"d_x0_F": self.d_x0_F, "threshold": self.threshold, "passed": self.passed,
                "nearest_fixed_point": p}

    @classmethod
    def from_dict(cls, d: dict) -> "GuardReport":
        p = d.get("nearest_fixed_point")
        return cls(float(d["d_x0_F"]), float(d["threshold"]), bool(d["passed"]),
                   None if p is None else tuple(float(c) for c in p))


def guard_domain(T: Map, x0) -> GuardReport:
    """Distance from x0 to Fix(T) against the D_K/4 threshold, with the nearest fixed point.

    Raises :class:`UnsupportedError` when the map has no known fixed set.
    """
    F = T.known_fixed_set
    if F is None:
        raise UnsupportedError(f"{T.kind} map has no known fixed-point set; run is unguarded")
    sp = T.space
    x0 = sp.validate(x0)
    threshold = sp.diameter / 4
    try:
        p = F.nearest(sp, x0)
    except DomainError:
        return GuardReport(sp.diameter / 2, threshold, False, None)
    d = float(sp.dist(x0, p))
    return GuardReport(d, threshold, d < threshold, tuple(float(c) for c in p))


@dataclass(frozen=True)
class TraceRow:
    n: int
    t: float
    s: float
    x: tuple
    y: Optional[tuple]
    residual: float
    dist_to_p: Optional[float] = None


@dataclass(frozen=True)
class Trace:
    """Full history of one run plus the provenance needed to reproduce it."""

    space_spec: dict
    map_spec: dict
    schedule_spec: dict
    seed: int
    rows: tuple
    stop_reason: str
    guard: Optional[GuardReport] = None
    x0: tuple = field(default=())

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def guarded(self) -> bool:
        return self.guard is not None

    def xs(self) -> list[np.ndarray]:
        return [np.array(r.x) for r in self.rows]

    def ys(self) -> list[Optional[np.ndarray]]:
        return [None if r.y is None else np.array(r.y) for r in self.rows]

    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.rows])

    @property
    def final_residual(self) -> float:
        return self.rows[-1].residual


def _tup(x) -> tuple:
    return tuple(float(c) for c in x)


def run_ishikawa(T: Map, x0, sched: Schedule, tol: float = 1e-8, max_iters: int = 1000,
                 seed: int = 0, guard: bool = True) -> Trace:
    """Iterate from ``x0`` until d(T x_n, x_n) <= tol or n == max_iters.

    A domain violation mid-run (map guard or non-unique geodesic) ends the
    trace with ``stop_reason="guard_violation"`` instead of raising. When
    ``guard`` is set and the map has a known fixed set, the D_K/4 check is
    recorded on the trace together with d(x_n, p) for each row; a failed
    check is flagged, not enforced.
    """
    if not (tol > 0 or max_iters > 0):
        raise ValueError("need tol > 0 or max_iters > 0")
    sp = T.space
    x = sp.validate(x0)
    report = None
    if guard and T.known_fixed_set is not None:
        report = guard_domain(T, x)
    p = None if report is None or report.nearest_fixed_point is None else np.array(report.nearest_fixed_point)

    rows = []
    stop = None
    n = 0
    while stop is None:
        t, s = schedule_terms(sched, n)
        dp = None if p is None else float(sp.dist(x, p))
        try:
            Tx = T(x)
        except DomainError:
            rows.append(TraceRow(n, t, s, _tup(x), None, math.nan, dp))
            stop = "guard_violation"
            break
        r = float(sp.dist(Tx, x))
        if r <= tol or n >= max_iters:
            try:
                y = combine(sp, s, Tx, x)
            except DomainError:
                y = None
            rows.append(TraceRow(n, t, s, _tup(x), None if y is None else _tup(y), r, dp))
            stop = "tolerance" if r <= tol else "max_iters"
            break
        try:
            step = _step(T, x, Tx, t, s)
        except DomainError:
            rows.append(TraceRow(n, t, s, _tup(x), None, r, dp))
            stop = "guard_violation"
            break
        rows.append(TraceRow(n, t, s, _tup(x), _tup(step.y), r, dp))
        x = step.x_next
        n += 1

    return Trace(
        space_spec=sp.spec(),
        map_spec=T.spec(),
        schedule_spec=sched.spec(),
        seed=int(seed),
        rows=tuple(rows),
        stop_reason=stop,
        guard=report,
        x0=_tup(sp.validate(x0)),
    )


def run_mann(T: Map, x0, t_family: Family, tol: float = 1e-8, max_iters: int = 1000, seed: int = 0,
             guard: bool = True) -> Trace:
    """Dedicated Mann loop x_{n+1} = t_n T(x_n) (+) (1 - t_n) x_n.

    Kept separate from :func:`run_ishikawa` so the two can be compared.
    """
    sp = T.space
    sched = mann(t_family)
    x = sp.validate(x0)
    report = guard_domain(T, x) if guard and T.known_fixed_set is not None else None
    p = None if report is None or report.nearest_fixed_point is None else np.array(report.nearest_fixed_point)
    rows = []
    n = 0
    while True:
        t = t_family(n)
        dp = None if p is None else float(sp.dist(x, p))
        try:
            Tx = T(x)
        except DomainError:
            rows.append(TraceRow(n, t, 0.0, _tup(x), None, math.nan, dp))
            stop = "guard_violation"
            break
        r = float(sp.dist(Tx, x))
        rows.append(TraceRow(n, t, 0.0, _tup(x), _tup(x), r, dp))
        if r <= tol:
            stop = "tolerance"
            break
        if n >= max_iters:
            stop = "max_iters"
            break
        try:
            x = combine(sp, t, Tx, x)
        except DomainError:
            stop = "guard_violation"
            break
        n += 1
    return Trace(sp.spec(), T.spec(), sched.spec(), int(seed), tuple(rows), stop, report, _tup(sp.validate(x0)))
