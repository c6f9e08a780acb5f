import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catiter.errors import UnsupportedError
from catiter.iteration import guard_domain, ishikawa_step, mann_step, run_ishikawa, run_mann
from catiter.maps import Rotation, construct_map
from catiter.schedules import Constant, Schedule, mann, parse_family
from catiter.spaces import Euclidean, Sphere, Tripod


@pytest.fixture
def negate():
    return construct_map({"kind": "custom", "name": "negate"}, Euclidean(dim=1))


@pytest.fixture
def quarter_turn(sphere):
    return Rotation(sphere, plane=(0, 1), angle=math.pi / 2)


def test_hand_step(negate):
    st_ = ishikawa_step(negate, [1.0], 0.5, 0.5)
    assert np.allclose(st_.y, [0.0])
    assert np.allclose(st_.x_next, [0.5])


def test_step_at_fixed_point(quarter_turn, sphere):
    N = sphere.origin()
    step = ishikawa_step(quarter_turn, N, 0.3, 0.8)
    assert np.array_equal(step.y, N) and np.array_equal(step.x_next, N)


@given(st.floats(0.0, 1.0))
def test_t_zero_keeps_x(s):
    sp = Sphere(1.0, 2)
    T = Rotation(sp, plane=(0, 1), angle=math.pi / 2)
    x = sp.polar_point(0.4, 0.2)
    assert np.array_equal(ishikawa_step(T, x, 0.0, s).x_next, sp.validate(x))


@given(st.floats(0.0, 1.0))
def test_mann_step_is_s_zero(t):
    sp = Sphere(1.0, 2)
    T = Rotation(sp, plane=(0, 1), angle=math.pi / 2)
    x = sp.polar_point(0.4, 0.2)
    assert np.array_equal(ishikawa_step(T, x, t, 0.0).x_next, mann_step(T, x, t))


def test_fixed_start_stops_at_zero(quarter_turn, sphere):
    tr = run_ishikawa(quarter_turn, sphere.origin(), Schedule.parse("constant(0.5)", "constant(0.5)"))
    assert len(tr) == 1 and tr.rows[0].n == 0
    assert tr.stop_reason == "tolerance" and tr.final_residual == 0.0


def test_negate_run(negate):
    tr = run_ishikawa(negate, [1.0], Schedule.parse("constant(0.5)", "constant(0.5)"), tol=1e-8)
    xs = [r.x[0] for r in tr.rows]
    assert xs[:4] == [1.0, 0.5, 0.25, 0.125]
    assert tr.stop_reason == "tolerance"
    res = tr.residuals()
    assert np.allclose(res, 2 * np.abs(xs))
    assert np.all(np.diff(res) < 0)


def test_sphere_run_converges(quarter_turn, sphere):
    tr = run_ishikawa(quarter_turn, sphere.polar_point(math.pi / 8), Schedule.parse("constant(0.5)", "power(1, 1, 2)"),
                      tol=1e-8, max_iters=2000)
    assert tr.stop_reason == "tolerance" and tr.final_residual <= 1e-8
    assert np.allclose(tr.rows[-1].x, [0, 0, 1], atol=1e-8)


def test_max_iters_stop(quarter_turn, sphere):
    tr = run_ishikawa(quarter_turn, sphere.polar_point(0.3), Schedule.parse("constant(0.01)", "constant(0)"),
                      tol=1e-12, max_iters=5)
    assert tr.stop_reason == "max_iters" and tr.rows[-1].n == 5


def test_guard_violation_is_recorded(sphere):
    f = construct_map({"kind": "pull", "anchor": [0, 0, 1], "lam": 0.5, "guard_radius": 0.5}, sphere)
    tr = run_ishikawa(f, sphere.polar_point(1.0), Schedule.parse("constant(0.5)", "constant(0.5)"))
    assert tr.stop_reason == "guard_violation"
    assert math.isnan(tr.final_residual)


def test_guard_report(quarter_turn, sphere):
    g = guard_domain(quarter_turn, sphere.polar_point(math.pi / 8))
    assert g.d_x0_F == pytest.approx(math.pi / 8)
    assert g.threshold == pytest.approx(math.pi / 4) and g.passed
    assert np.allclose(g.nearest_fixed_point, [0, 0, 1])
    s4 = Sphere(4.0, 2)
    assert guard_domain(Rotation(s4, angle=1.0), s4.polar_point(0.1)).threshold == pytest.approx(math.pi / 8)
    e = Euclidean(dim=1)
    g = guard_domain(construct_map({"kind": "custom", "name": "negate"}, e), [1e6])
    assert g.threshold == math.inf and g.passed
    with pytest.raises(UnsupportedError):
        guard_domain(Rotation(sphere, angle=0.0), sphere.origin())


def test_failed_guard_is_flagged_not_enforced(quarter_turn, sphere):
    tr = run_ishikawa(quarter_turn, sphere.polar_point(1.0), Schedule.parse("constant(0.5)", "constant(0.5)"),
                      max_iters=20)
    assert tr.guard is not None and not tr.guard.passed
    assert len(tr) > 1


CASES = [
    ("euclidean", lambda: (construct_map({"kind": "custom", "name": "negate"}, Euclidean(dim=1)), [1.0])),
    ("sphere", lambda: (Rotation(Sphere(1.0, 2), angle=math.pi / 2), Sphere(1.0, 2).polar_point(0.4, 0.3))),
    ("tripod", lambda: (construct_map({"kind": "projection", "target": {"kind": "halfline", "leg": 1, "start": 0.5}},
                                      Tripod()), Tripod().point(0, 2.0))),
]


@pytest.mark.parametrize("name,make", CASES)
@pytest.mark.parametrize("t", ["constant(0.5)", "harmonic(1, 2)", "one_minus(harmonic(1, 2))"])
def test_mann_reduction_exact(name, make, t):
    T, x0 = make()
    fam = parse_family(t)
    a = run_ishikawa(T, x0, mann(fam), tol=1e-10, max_iters=300)
    b = run_mann(T, x0, fam, tol=1e-10, max_iters=300)
    assert [r.x for r in a.rows] == [r.x for r in b.rows]
    assert a.stop_reason == b.stop_reason


def test_trace_records_provenance(quarter_turn, sphere):
    sched = Schedule(Constant(0.5), Constant(0.25))
    tr = run_ishikawa(quarter_turn, sphere.polar_point(0.2), sched, seed=9, max_iters=3)
    assert tr.space_spec == sphere.spec()
    assert tr.map_spec == quarter_turn.spec()
    assert tr.schedule_spec == sched.spec()
    assert tr.seed == 9
