"""Step-size sequences {t_n}, {s_n} and an analytic classifier for their series conditions.

Every family knows the leading asymptotics of both ``u_n`` and ``1 - u_n``
in the form ``coef * n**(-power)``. Products of families multiply
coefficients and add powers, and a series of such terms converges iff the
coefficient is zero or the power exceeds one. No partial sum is ever used
as evidence of convergence or divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ArgumentError, ConstructionError, ScheduleExhausted
from .expr import ExpressionError, evaluate

Tri = Optional[bool]  # True / False / None (unknown)


@dataclass(frozen=True)
class Tail:
    """u_n ~ coef * n**(-power) as n -> infinity; coef == 0 means u_n == 0 eventually."""

    coef: float
    power: float

    def __mul__(self, other: "Tail") -> "Tail":
        if self.coef == 0 or other.coef == 0:
            return Tail(0.0, 0.0)
        return Tail(self.coef * other.coef, self.power + other.power)

    @property
    def summable(self) -> bool:
        return self.coef == 0 or self.power > 1

    @property
    def limit(self) -> float:
        return self.coef if self.power == 0 else 0.0


class Family:
    def __call__(self, n: int) -> float:
        raise NotImplementedError

    def tail(self) -> Optional[Tail]:
        raise NotImplementedError

    def co_tail(self) -> Optional[Tail]:
        """Asymptotics of 1 - u_n."""
        raise NotImplementedError


def _num(x) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Constant(Family):
    c: float

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ConstructionError(f"constant({self.c}) leaves [0, 1]")

    def __call__(self, n):
        return float(self.c)

    def tail(self):
        return Tail(float(self.c), 0.0)

    def co_tail(self):
        return Tail(1.0 - self.c, 0.0)

    def __str__(self):
        return f"constant({_num(self.c)})"


@dataclass(frozen=True)
class Harmonic(Family):
    """a / (n + b)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.b > 0 and 0.0 <= self.a <= self.b):
            raise ConstructionError(f"harmonic({self.a}, {self.b}) needs b > 0 and 0 <= a <= b")

    def __call__(self, n):
        return self.a / (n + self.b)

    def tail(self):
        return Tail(float(self.a), 1.0)

    def co_tail(self):
        return Tail(1.0, 0.0)

    def __str__(self):
        return f"harmonic({_num(self.a)}, {_num(self.b)})"


@dataclass(frozen=True)
class Power(Family):
    """a / (n + b)**p."""

    a: float
    b: float
    p: float

    def __post_init__(self):
        if not (self.b > 0 and self.a >= 0 and self.p >= 0):
            raise ConstructionError(f"power({self.a}, {self.b}, {self.p}) needs b > 0, a >= 0, p >= 0")
        if self.a / self.b**self.p > 1.0:
            raise ConstructionError(f"power({self.a}, {self.b}, {self.p}) exceeds 1 at n = 0")

    def __call__(self, n):
        return self.a / (n + self.b) ** self.p

    def tail(self):
        if self.p == 0:
            return Tail(float(self.a), 0.0)
        return Tail(float(self.a), float(self.p))

    def co_tail(self):
        if self.p == 0:
            return Tail(1.0 - self.a, 0.0)
        return Tail(1.0, 0.0)

    def __str__(self):
        return f"power({_num(self.a)}, {_num(self.b)}, {_num(self.p)})"


@dataclass(frozen=True)
class OneMinus(Family):
    inner: Family

    def __call__(self, n):
        return 1.0 - self.inner(n)

    def tail(self):
        return self.inner.co_tail()

    def co_tail(self):
        return self.inner.tail()

    def __str__(self):
        return f"one_minus({self.inner})"


@dataclass(frozen=True)
class Table(Family):
    """Explicit leading values, then ``tail_rule`` (indexed by the global n) if given."""

    values: tuple
    tail_rule: Optional[Family] = None

    def __call__(self, n):
        if n < len(self.values):
            v = float(self.values[n])
            if not 0.0 <= v <= 1.0:
                raise ArgumentError(f"table entry {n} = {v!r} leaves [0, 1]")
            return v
        if self.tail_rule is None:
            raise ScheduleExhausted(f"table of {len(self.values)} values has no entry {n} and no tail rule")
        return self.tail_rule(n)

    def tail(self):
        return None if self.tail_rule is None else self.tail_rule.tail()

    def co_tail(self):
        return None if self.tail_rule is None else self.tail_rule.co_tail()

    def __str__(self):
        vals = ", ".join(_num(v) for v in self.values)
        if self.tail_rule is None:
            return f"table([{vals}])"
        return f"table([{vals}], tail={self.tail_rule})"


def _table(values, tail=None):
    if not isinstance(values, list):
        raise ConstructionError("table() needs a list of values")
    return Table(tuple(float(v) for v in values), tail)


def _one_minus(inner):
    if not isinstance(inner, Family):
        raise ConstructionError("one_minus() needs a schedule family")
    return OneMinus(inner)


FAMILIES = {
    "constant": Constant,
    "harmonic": Harmonic,
    "power": Power,
    "one_minus": _one_minus,
    "table": _table,
}


def parse_family(text: str) -> Family:
    """Parse e.g. ``"one_minus(harmonic(1, 2))"`` into a family."""
    try:
        out = evaluate(text, FAMILIES)
    except ExpressionError as exc:
        raise ConstructionError(f"bad schedule family {text!r}: {exc}") from exc
    except TypeError as exc:
        raise ConstructionError(f"bad schedule family {text!r}: {exc}") from exc
    if not isinstance(out, Family):
        raise ConstructionError(f"{text!r} is not a schedule family")
    return out


@dataclass(frozen=True)
class Schedule:
    t: Family
    s: Family

    def terms(self, n: int) -> tuple[float, float]:
        return schedule_terms(self, n)

    def spec(self) -> dict:
        return {"t": str(self.t), "s": str(self.s)}

    @classmethod
    def parse(cls, t: str, s: str) -> "Schedule":
        return cls(parse_family(t), parse_family(s))


def mann(t: Family) -> Schedule:
    return Schedule(t, Constant(0.0))


def schedule_terms(sched: Schedule, n: int) -> tuple[float, float]:
    if n < 0:
        raise ArgumentError(f"schedule index must be nonnegative, got {n}")
    t, s = sched.t(n), sched.s(n)
    for name, v in (("t", t), ("s", s)):
        if not 0.0 <= v <= 1.0:
            raise ArgumentError(f"{name}_{n} = {v!r} leaves [0, 1]")
    return t, s


# ------------------------------------------------------------ classification


def tri_and(*xs: Tri) -> Tri:
    if any(x is False for x in xs):
        return False
    if any(x is None for x in xs):
        return None
    return True


@dataclass(frozen=True)
class ConditionReport:
    sum_t1t_divergent: Tri
    sum_t1t_s_finite: Tri
    sum_1t_s_finite: Tri
    limsup_s_lt_1: Tri

    @property
    def theorem_t1_applicable(self) -> Tri:
        return tri_and(self.sum_t1t_divergent, self.sum_t1t_s_finite)

    @property
    def theorem_t2_applicable(self) -> Tri:
        return tri_and(self.sum_t1t_divergent, self.sum_1t_s_finite, self.limsup_s_lt_1)

    def as_dict(self) -> dict:
        return {
            "sum_t1t_divergent": self.sum_t1t_divergent,
            "sum_t1t_s_finite": self.sum_t1t_s_finite,
            "sum_1t_s_finite": self.sum_1t_s_finite,
            "limsup_s_lt_1": self.limsup_s_lt_1,
            "theorem_t1_applicable": self.theorem_t1_applicable,
            "theorem_t2_applicable": self.theorem_t2_applicable,
        }


def classify_schedule(sched: Schedule) -> ConditionReport:
    """Decide the four series/limsup conditions from family asymptotics.

    Returns ``None`` for any condition that depends on a table without a
    classified tail rule.
    """
    t, one_minus_t, s = sched.t.tail(), sched.t.co_tail(), sched.s.tail()
    t1t = None if t is None or one_minus_t is None else t * one_minus_t
    div = None if t1t is None else not t1t.summable
    t1ts = None if t1t is None or s is None else (t1t * s).summable
    ts = None if one_minus_t is None or s is None else (one_minus_t * s).summable
    lim = None if s is None else s.limit < 1.0
    return ConditionReport(div, t1ts, ts, lim)


PRODUCTS = ("t1t", "t1t_s", "1t_s")


def partial_sums(sched: Schedule, which: str, N: int) -> float:
    """Sum over n < N of t(1-t), t(1-t)s or (1-t)s."""
    if which not in PRODUCTS:
        raise ArgumentError(f"which must be one of {PRODUCTS}, got {which!r}")
    if N < 1:
        raise ArgumentError(f"N must be positive, got {N}")
    terms = []
    for n in range(N):
        t, s = schedule_terms(sched, n)
        if which == "t1t":
            terms.append(t * (1.0 - t))
        elif which == "t1t_s":
            terms.append(t * (1.0 - t) * s)
        else:
            terms.append((1.0 - t) * s)
    return math.fsum(terms)
