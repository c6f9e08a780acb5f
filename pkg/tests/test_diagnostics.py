import itertools
import math

import numpy as np
import pytest

from catiter import diagnostics as D
from catiter.errors import ArgumentError, DomainError, IntegrityError, UnsupportedError
from catiter.geometry import Region, estimate_k
from catiter.iteration import Trace, TraceRow, run_ishikawa
from catiter.maps import Rotation, construct_map
from catiter.schedules import Schedule
from catiter.spaces import Euclidean, Sphere


@pytest.fixture(scope="module")
def sphere_run():
    sp = Sphere(1.0, 2)
    T = Rotation(sp, plane=(0, 1), angle=math.pi / 2)
    tr = run_ishikawa(T, sp.polar_point(math.pi / 8, 0.3), Schedule.parse("one_minus(harmonic(1, 2))", "harmonic(1, 2)"),
                      tol=1e-6, max_iters=100_000)
    return sp, T, tr


@pytest.fixture(scope="module")
def negate_run():
    e = Euclidean(dim=1)
    T = construct_map({"kind": "custom", "name": "negate"}, e)
    return e, T, run_ishikawa(T, [1.0], Schedule.parse("constant(0.5)", "constant(0.5)"), tol=1e-10)


def constant_trace(space, q, n=5):
    q = tuple(float(c) for c in q)
    rows = tuple(TraceRow(i, 0.5, 0.5, q, q, 0.0, 0.0) for i in range(n))
    return Trace(space.spec(), {}, {}, 0, rows, "tolerance", None, q)


def test_residual_series(negate_run, sphere):
    e, T, tr = negate_run
    r = D.residual_series(tr, T)
    assert np.allclose(r, [2 * abs(x[0]) for x in (row.x for row in tr.rows)])
    assert np.all(D.residual_series(constant_trace(sphere, sphere.origin())) == 0)
    bad = Trace(tr.space_spec, tr.map_spec, tr.schedule_spec, 0,
                (TraceRow(0, 0.5, 0.5, (1.0,), (0.0,), 7.0, None),), "max_iters", None, (1.0,))
    with pytest.raises(IntegrityError):
        D.residual_series(bad, T)


def test_fejer(sphere, sphere_run, negate_run):
    q = sphere.origin()
    rep = D.fejer_report(constant_trace(sphere, q), sphere, [q])
    assert rep.satisfied and rep.min_slack == 0.0
    sp, T, tr = sphere_run
    refs = D.fixed_point_sample(T, tr.x0, 20, np.random.default_rng(0))
    assert all(sp.dist(p, np.array(tr.x0)) < math.pi / 2 for p in refs)
    assert D.fejer_report(tr, sp, refs, 1e-12).satisfied
    # expansive negative control
    e = Euclidean(dim=1)
    T2 = construct_map({"kind": "custom", "name": "scale", "factor": 2.0}, e)
    bad = run_ishikawa(T2, [1.0], Schedule.parse("constant(0.5)", "constant(0.5)"), max_iters=5)
    rep = D.fejer_report(bad, e, [np.zeros(1)])
    assert not rep.satisfied
    assert rep.per_step_slack[rep.witness] == rep.min_slack == -16.0


def test_lemma_checks(sphere_run, negate_run):
    sp, T, tr = sphere_run
    assert D.lemma_l2_check(tr, sp, T).satisfied
    assert D.lemma_l7_step_check(tr, sp, T).satisfied
    e, N, ntr = negate_run
    rep = D.lemma_l2_check(ntr, e, N, C=2.0)
    assert rep.per_step_slack[0] >= 0
    factor = 1 + 4 * (2.0 / math.sin(2.0)) * 0.25 * 0.5
    assert rep.per_step_slack[0] == pytest.approx(factor * ntr.rows[0].residual - ntr.rows[1].residual)
    with pytest.raises(DomainError):
        D.lemma_l2_check(ntr, e, N, C=math.pi)


def test_s_zero_means_nonincreasing(sphere):
    T = Rotation(sphere, plane=(0, 1), angle=math.pi / 2)
    tr = run_ishikawa(T, sphere.polar_point(0.35), Schedule.parse("harmonic(1, 2)", "constant(0)"), max_iters=300)
    rep = D.lemma_l2_check(tr, sphere, T)
    assert rep.satisfied
    assert np.all(np.diff(tr.residuals()) <= 1e-12)
    assert D.lemma_l7_step_check(tr, sphere, T).satisfied


def test_energy_bound(sphere_run, negate_run, sphere):
    sp, T, tr = sphere_run
    k = estimate_k(sp, Region(tuple(sp.origin()), math.pi / 8), 2000, seed=1)
    assert D.energy_bound_check(tr, sp, T, sp.origin(), 0.99 * k).satisfied
    e, N, ntr = negate_run
    assert D.energy_bound_check(ntr, e, N, [0.0], 2.0).satisfied
    const = constant_trace(sphere, sphere.origin())
    rep = D.energy_bound_check(const, sphere, T, sphere.origin(), 1.5)
    assert rep.satisfied and rep.min_slack == 0.0


def test_asymptotic_center_two_points():
    e = Euclidean(dim=1)
    rows = tuple(TraceRow(i, 0.5, 0.5, ((-1.0) ** i,), None, 0.0) for i in range(40))
    tr = Trace(e.spec(), {}, {}, 0, rows, "max_iters", None, (1.0,))
    est = D.asymptotic_center_estimate(tr, e, 10)
    assert est.center[0] == pytest.approx(0.0, abs=1e-3)
    assert est.radius == pytest.approx(1.0, abs=1e-3)
    assert est.search_residual <= 1e-3


def test_asymptotic_center_convergent(sphere_run):
    sp, T, tr = sphere_run
    est = D.asymptotic_center_estimate(tr, sp, len(tr) - 20)
    assert sp.dist(est.center, tr.xs()[-1]) <= 1e-5
    assert est.radius <= 1e-5


def test_asymptotic_center_matches_grid_oracle(sphere):
    a, b = sphere.polar_point(math.pi / 8, 0.0), sphere.polar_point(math.pi / 8, math.pi)
    rows = tuple(TraceRow(i, 0.5, 0.5, tuple(a if i % 2 else b), None, 0.0) for i in range(30))
    tr = Trace(sphere.spec(), {}, {}, 0, rows, "max_iters", None, tuple(b))
    est = D.asymptotic_center_estimate(tr, sphere, 0)
    # brute-force grid over the cap of colatitude <= pi/4
    best, arg = math.inf, None
    for th, ph in itertools.product(np.linspace(0, math.pi / 4, 121), np.linspace(0, 2 * math.pi, 241)):
        c = sphere.polar_point(th, ph)
        r = max(sphere.dist(c, a), sphere.dist(c, b))
        if r < best:
            best, arg = r, c
    assert est.radius <= best + 1e-6
    assert est.radius == pytest.approx(math.pi / 8, abs=1e-4)
    # centre lies on the bisecting great circle (equidistant from both points), i.e. at the pole here
    assert sphere.dist(est.center, a) == pytest.approx(sphere.dist(est.center, b), abs=1e-4)
    assert sphere.dist(est.center, arg) <= 0.03


def test_asymptotic_center_needs_two_points(sphere):
    with pytest.raises(ArgumentError):
        D.asymptotic_center_estimate(constant_trace(sphere, sphere.origin(), 3), sphere, 2)


def test_zhang():
    a = [1.0, 0.8, 0.8, 0.5, 0.1, 0.0]
    rep = D.zhang_convergence(a, [0.0] * len(a))
    assert rep.premise_holds and rep.converges_to_zero
    b = [1.0 / (n + 1) ** 2 for n in range(50)]
    prod = [1.0]
    for bn in b[:-1]:
        prod.append(prod[-1] * (1 + bn))
    rep = D.zhang_convergence(prod, b)
    assert rep.premise_holds and math.isfinite(rep.limit_estimate) and not rep.converges_to_zero
    bad = [1.0, 0.9, 0.8, 0.7, 0.6, 0.9, 0.5]
    rep = D.zhang_convergence(bad, [0.0] * len(bad))
    assert not rep.premise_holds and rep.witness_index == 4
    with pytest.raises(ArgumentError):
        D.zhang_convergence([1.0], [0.0])


def test_zhang_on_lemma_instantiation(sphere_run):
    sp, T, tr = sphere_run
    C = D.default_C(tr, sp)
    q = C / math.sin(C)
    b = [4 * q * r.t * (1 - r.t) * r.s for r in tr.rows]
    assert D.zhang_convergence(tr.residuals(), b, atol=1e-9).premise_holds


def test_delta_limit(sphere_run, negate_run, sphere):
    sp, T, tr = sphere_run
    rep = D.delta_limit_proxy(tr, sp, T)
    assert rep.dist_to_F <= 1e-6 and rep.radius_ok
    assert np.allclose(rep.limit, [0, 0, 1], atol=1e-5)
    e, N, ntr = negate_run
    assert abs(D.delta_limit_proxy(ntr, e, N).limit[0]) <= 1e-9
    const = constant_trace(sphere, sphere.origin())
    rep = D.delta_limit_proxy(const, sphere, T)
    assert rep.dist_to_F == 0.0 and rep.cauchy_tail == 0.0
    unfinished = run_ishikawa(T, sphere.polar_point(0.3), Schedule.parse("constant(0.5)", "constant(0)"), tol=1e-14,
                              max_iters=3)
    with pytest.raises(UnsupportedError):
        D.delta_limit_proxy(unfinished, sphere, T)


def test_compare_rescaled():
    s4, s1 = Sphere(4.0, 2), Sphere(1.0, 2)
    sched = Schedule.parse("one_minus(harmonic(1, 2))", "harmonic(1, 2)")
    a = run_ishikawa(Rotation(s4, angle=math.pi / 2), s4.polar_point(math.pi / 8, 0.3), sched, tol=1e-7, max_iters=500)
    b = run_ishikawa(Rotation(s1, angle=math.pi / 2), s1.polar_point(math.pi / 8, 0.3), sched, tol=2e-7, max_iters=500)
    rep = D.compare_rescaled(a, s4, b, s1, 2.0)
    assert rep.agrees(1e-9)
