"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict; the lines are printed together at
the end of the pytest session (see ``conftest.py``) and also when this file
is run directly with ``python tests/test_acceptance.py``.
"""

import functools
import math
import time

import numpy as np
import pytest

from catiter import diagnostics as D
from catiter.geometry import (
    Region,
    comparison_check,
    comparison_suite,
    contraction_factor,
    contraction_suite,
    defect_suite,
    estimate_k,
)
from catiter.iteration import run_ishikawa, run_mann
from catiter.maps import Rotation, construct_map
from catiter.schedules import Schedule, classify_schedule, parse_family
from catiter.spaces import Euclidean, Hyperbolic, Product, Sphere, Tripod
from catiter.traceio import trace_to_csv, trace_meta, dumps_json

VERDICTS: dict[int, str] = {}
SAMPLES = 10_000


def record(n: int, title: str, ok: bool, detail: str) -> None:
    VERDICTS[n] = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


SPHERE = Sphere(1.0, 2)
ROT = Rotation(SPHERE, plane=(0, 1), angle=math.pi / 2)
X0 = SPHERE.polar_point(math.pi / 8, 0.0)
NORTH, SOUTH = np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])
RUN1 = Schedule.parse("constant(0.5)", "power(1, 1, 2)")
RUN2 = Schedule.parse("one_minus(harmonic(1, 2))", "harmonic(1, 2)")
MANN = Schedule.parse("constant(0.5)", "constant(0)")


def fresh_run(which: str):
    if which == "run1":
        return run_ishikawa(ROT, X0, RUN1, tol=1e-8, max_iters=2000, seed=7)
    if which == "run2":
        return run_ishikawa(ROT, X0, RUN2, tol=1e-6, max_iters=100_000, seed=7)
    if which == "mann":
        return run_ishikawa(ROT, SPHERE.polar_point(0.35, 0.4), MANN, tol=1e-12, max_iters=5000, seed=7)
    raise KeyError(which)


run = functools.lru_cache(maxsize=None)(fresh_run)


@functools.lru_cache(maxsize=None)
def sphere_k():
    return estimate_k(SPHERE, Region(tuple(NORTH), math.pi / 8), SAMPLES, seed=7)


def test_criterion_01_theorem_t1_run():
    tr = run("run1")
    cls = classify_schedule(RUN1)
    lim = D.delta_limit_proxy(tr, SPHERE, ROT)
    ok = (cls.theorem_t1_applicable is True and tr.stop_reason == "tolerance" and tr.final_residual <= 1e-8
          and tr.rows[-1].n <= 2000 and lim.dist_to_F <= 1e-6)
    record(1, "t1 desk-scale run", ok,
           f"t1={cls.theorem_t1_applicable}, n={tr.rows[-1].n}, residual={tr.final_residual:.3g}, "
           f"dist_to_F={lim.dist_to_F:.3g}")
    assert ok


def test_criterion_02_theorem_t2_run():
    tr = run("run2")
    cls = classify_schedule(RUN2)
    ok = cls.theorem_t2_applicable is True and tr.stop_reason == "tolerance" and tr.final_residual <= 1e-6
    record(2, "t2 desk-scale run", ok,
           f"t2={cls.theorem_t2_applicable}, n={tr.rows[-1].n}, residual={tr.final_residual:.3g}")
    assert ok


def test_criterion_03_fejer_both_poles():
    worst = {}
    for which in ("run1", "run2"):
        tr = run(which)
        for name, q in (("north", NORTH), ("south", SOUTH)):
            worst[(which, name)] = D.fejer_report(tr, SPHERE, [q], tol=1e-12).min_slack
    ok = min(worst.values()) >= -1e-12
    # reference set restricted to fixed points within D_K/2 of x0 (for information)
    local = min(D.fejer_report(run(w), SPHERE, D.fixed_point_sample(ROT, X0, 32, np.random.default_rng(7)), 1e-12)
                .min_slack for w in ("run1", "run2"))
    detail = ", ".join(f"{w}/{p}={v:.3g}" for (w, p), v in worst.items())
    record(3, "Fejer monotone vs both poles", ok, f"{detail}; vs F within pi/2 of x0: {local:.3g}")
    assert ok


def test_criterion_04_lemma_l2():
    slacks = {w: D.lemma_l2_check(run(w), SPHERE, ROT).min_slack for w in ("run1", "run2")}
    mann = run("mann")
    inc = float(np.max(np.diff(mann.residuals())))
    mann_l2 = D.lemma_l2_check(mann, SPHERE, ROT).min_slack
    ok = min(slacks.values()) >= -1e-9 and mann_l2 >= -1e-9 and inc <= 1e-12
    record(4, "lemma l2 per-step bound", ok,
           f"min slack run1={slacks['run1']:.3g} run2={slacks['run2']:.3g}; s=0 max increase={inc:.3g}")
    assert ok


def test_criterion_05_energy_bound():
    k = sphere_k()
    rep = D.energy_bound_check(run("run1"), SPHERE, ROT, NORTH, 0.99 * k, tol=1e-9)
    ok = rep.min_slack >= -1e-9
    record(5, "energy prefix bound", ok, f"k_hat={k:.6f}, min slack={rep.min_slack:.3g} over {len(rep.per_step_slack)} prefixes")
    assert ok


MANN_CASES = {
    "euclidean": lambda: (construct_map({"kind": "custom", "name": "negate"}, Euclidean(dim=1)), [1.0]),
    "sphere": lambda: (ROT, SPHERE.polar_point(0.4, 0.3)),
    "tripod": lambda: (construct_map({"kind": "projection", "target": {"kind": "halfline", "leg": 1, "start": 0.5}},
                                     Tripod()), Tripod().point(0, 2.0)),
}


def test_criterion_06_mann_reduction():
    bad = []
    for name, make in MANN_CASES.items():
        T, x0 = make()
        for t in ("constant(0.5)", "harmonic(1, 2)"):
            fam = parse_family(t)
            a = run_ishikawa(T, x0, Schedule(fam, parse_family("constant(0)")), tol=1e-10, max_iters=500)
            b = run_mann(T, x0, fam, tol=1e-10, max_iters=500)
            if [r.x for r in a.rows] != [r.x for r in b.rows]:
                bad.append(f"{name}/{t}")
    ok = not bad
    record(6, "Mann reduction (exact coordinates)", ok, "identical on euclidean, sphere, tripod" if ok else f"differs: {bad}")
    assert ok


def test_criterion_07_geometry_suites():
    own = {
        "sphere": (Sphere(1.0, 2), 1.0),
        "sphere K=4": (Sphere(4.0, 2), 4.0),
        "euclidean": (Euclidean(0.0, 2), 0.0),
        "hyperbolic": (Hyperbolic(-1.0, 2), -1.0),
    }
    weaker = {"tripod vs 0": (Tripod(), 0.0), "product vs 1": (Product(1.0, 2, 1), 1.0),
              "hyperbolic vs 0": (Hyperbolic(-1.0, 2), 0.0)}
    worst_own = max(abs(comparison_suite(sp, K, SAMPLES, seed=7).min_slack) for sp, K in own.values())
    worst_weak = min(comparison_suite(sp, K, SAMPLES, seed=7).min_slack for sp, K in weaker.values())
    tp = Tripod()
    eq = comparison_check(tp, 0.0, tp.point(0, 1.0), tp.point(1, 1.0), tp.point(2, 1.0), 0.5, 0.5).slack
    neg = comparison_suite(SPHERE, 0.5, SAMPLES, seed=7)
    ok = worst_own <= 1e-9 and worst_weak >= -1e-9 and eq >= 0.05 and (not neg.satisfied) and neg.witness is not None
    record(7, "comparison suites", ok,
           f"own-model max|slack|={worst_own:.3g}, other min slack={worst_weak:.3g}, tripod equilateral={eq:.3g}, "
           f"S2 vs K=0.5 min slack={neg.min_slack:.3g}")
    assert ok


def test_criterion_08_contraction():
    rep = contraction_suite(SPHERE, SAMPLES, seed=7)
    ts = np.linspace(0.0, 1.0, 100)
    Cs = np.linspace(0.0, math.pi, 102)[1:-1]
    grid = min(contraction_factor(t, C) - t for C in Cs for t in ts)
    ok = rep.min_slack >= -1e-9 and grid >= 0.0
    record(8, "sine contraction bound", ok, f"sampled min slack={rep.min_slack:.3g}, grid min (factor - t)={grid:.3g}")
    assert ok


def test_criterion_09_estimate_k():
    e = Euclidean(0.0, 2)
    ke = estimate_k(e, Region(tuple(e.origin()), math.pi / 8), SAMPLES, seed=7)
    ks = sphere_k()
    fresh = defect_suite(SPHERE, Region(tuple(NORTH), math.pi / 8), 0.99 * ks, SAMPLES, seed=8)
    ok = abs(ke - 2.0) <= 1e-6 and 0 < ks <= 2 and fresh.min_slack >= -1e-9
    record(9, "estimate_k", ok, f"euclidean={ke:.9f}, sphere={ks:.6f}, fresh-sample defect min={fresh.min_slack:.3g}")
    assert ok


def test_criterion_10_rescaling():
    s4 = Sphere(4.0, 2)
    a = run_ishikawa(Rotation(s4, angle=math.pi / 2), s4.polar_point(math.pi / 8, 0.3), RUN2, tol=0.0, max_iters=400)
    b = run_ishikawa(ROT, s4.scale_point(s4.polar_point(math.pi / 8, 0.3), 2.0), RUN2, tol=0.0, max_iters=400)
    rep = D.compare_rescaled(a, s4, b, SPHERE, 2.0)
    ok = rep.same_length and rep.max_dist_dev <= 1e-9 and rep.max_coord_dev <= 1e-9
    record(10, "rescaling K=4 vs K=1", ok,
           f"{rep.steps} steps, max distance dev={rep.max_dist_dev:.3g}, max coord dev={rep.max_coord_dev:.3g}")
    assert ok


CLASSIFICATION = [
    ("constant(0.5)", "power(1, 1, 2)", True, True),
    ("constant(0.5)", "constant(0.5)", False, False),
    ("one_minus(power(1, 1, 2))", "constant(0)", False, False),
    ("power(1, 1, 2)", "constant(0.5)", False, False),
    ("constant(0.5)", "constant(0.5)", False, False),
    ("constant(0)", "one_minus(power(1, 1, 2))", False, False),
]


def test_criterion_11_classifier():
    wrong = []
    implication = True
    for t, s, t1, t2 in CLASSIFICATION:
        rep = classify_schedule(Schedule.parse(t, s))
        if (rep.theorem_t1_applicable, rep.theorem_t2_applicable) != (t1, t2):
            wrong.append((t, s))
        if rep.sum_1t_s_finite and not rep.sum_t1t_s_finite:
            implication = False
    ok = not wrong and implication
    record(11, "schedule classifier", ok, f"{len(CLASSIFICATION) - len(wrong)}/{len(CLASSIFICATION)} combos match, "
                                          f"t2=>t1 summability {'holds' if implication else 'broken'}")
    assert ok


def _serialise(tr) -> bytes:
    return (trace_to_csv(tr) + dumps_json(trace_meta(tr))).encode("utf-8")


def test_criterion_12_determinism(tmp_path):
    from catiter.cli import main
    from pathlib import Path

    same = all(_serialise(fresh_run(name)) == _serialise(run(name)) for name in ("run1", "run2", "mann"))
    cfg = Path(__file__).resolve().parents[1] / "configs" / "sphere_t2.toml"
    main(["run", str(cfg), "--out-dir", str(tmp_path / "a"), "-q"])
    main(["run", str(cfg), "--out-dir", str(tmp_path / "b"), "-q"])
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    cli_same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    ok = same and cli_same
    record(12, "determinism", ok, f"library traces identical={same}, CLI artifacts identical={cli_same} ({len(files)} files)")
    assert ok


if __name__ == "__main__":
    import sys

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    import tempfile
    from pathlib import Path

    failures = 0
    for fn in tests:
        start = time.time()
        try:
            fn(Path(tempfile.mkdtemp())) if "tmp_path" in fn.__code__.co_varnames else fn()
        except AssertionError:
            failures += 1
        n = int(fn.__name__.split("_")[2])
        print(f"{VERDICTS.get(n, f'criterion {n:2d} ERROR')}  [{time.time() - start:.1f}s]")
    sys.exit(1 if failures else 0)
