import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from catiter.errors import IntegrityError
from catiter.iteration import GuardReport, Trace, TraceRow, run_ishikawa
from catiter.maps import Rotation, construct_map
from catiter.schedules import Schedule
from catiter.spaces import Sphere, Tripod
from catiter.traceio import read_trace, sidecar_path, trace_to_csv, traces_equal, write_trace

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def test_roundtrip_sphere_run(tmp_path):
    sp = Sphere(1.0, 2)
    tr = run_ishikawa(Rotation(sp, angle=math.pi / 2), sp.polar_point(0.3, 0.2),
                      Schedule.parse("constant(0.5)", "harmonic(1, 2)"), max_iters=50)
    path, meta = write_trace(tr, tmp_path / "a.csv")
    assert meta == sidecar_path(path)
    assert read_trace(path) == tr


def test_roundtrip_guard_violation(tmp_path):
    sp = Sphere(1.0, 2)
    f = construct_map({"kind": "pull", "anchor": [0, 0, 1], "lam": 0.5, "guard_radius": 0.5}, sp)
    tr = run_ishikawa(f, sp.polar_point(1.0), Schedule.parse("constant(0.5)", "constant(0.5)"))
    back = read_trace(write_trace(tr, tmp_path / "g.csv")[0])
    assert traces_equal(tr, back)
    assert back.rows[-1].y is None


def test_csv_layout(tmp_path):
    tp = Tripod()
    tr = run_ishikawa(construct_map({"kind": "rotation", "shift": 1}, tp), tp.point(0, 1.0),
                      Schedule.parse("constant(0.5)", "constant(0)"), max_iters=3)
    text = trace_to_csv(tr)
    assert text.splitlines()[0] == "n,t_n,s_n,x_0,x_1,y_0,y_1,residual,dist_to_p"
    assert "\r" not in text
    path, _ = write_trace(tr, tmp_path / "t.csv")
    assert path.read_bytes() == text.encode("utf-8")


@given(st.lists(st.tuples(finite, finite, finite, st.booleans()), min_size=1, max_size=20))
def test_roundtrip_property(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("rt")
    recs = tuple(TraceRow(i, 0.5, 0.25, (a, b), (b, a) if has_y else None, abs(c), None if has_y else abs(a))
                 for i, (a, b, c, has_y) in enumerate(rows))
    tr = Trace({"kind": "euclidean", "K": 0.0, "dim": 2}, {"kind": "custom"}, {"t": "x", "s": "y"}, 3, recs,
               "max_iters", GuardReport(1.0, math.inf, True, (0.0, 0.0)), (rows[0][0], rows[0][1]))
    assert read_trace(write_trace(tr, d / "p.csv")[0]) == tr


def test_truncated_file_detected(tmp_path):
    sp = Sphere(1.0, 2)
    tr = run_ishikawa(Rotation(sp, angle=1.0), sp.polar_point(0.3), Schedule.parse("constant(0.5)", "constant(0)"),
                      max_iters=5)
    path, _ = write_trace(tr, tmp_path / "a.csv")
    lines = path.read_text().splitlines(keepends=True)
    path.write_text("".join(lines[:-1]))
    with pytest.raises(IntegrityError):
        read_trace(path)


def test_no_temp_files_left(tmp_path):
    sp = Sphere(1.0, 2)
    tr = run_ishikawa(Rotation(sp, angle=1.0), sp.polar_point(0.3), Schedule.parse("constant(0.5)", "constant(0)"),
                      max_iters=2)
    write_trace(tr, tmp_path / "a.csv")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv", "a.json"]
