"""Trace files: a plot-ready CSV plus a JSON sidecar carrying provenance.

CSV columns are ``n, t_n, s_n, x_0..x_{w-1}, y_0..y_{w-1}, residual,
dist_to_p`` where ``w`` is the coordinate width of the space. Missing
values (no inner point after a guard violation, unguarded runs) are empty
cells. Floats are written with ``repr`` so that reading a file back gives
bit-identical values.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

from .errors import IntegrityError
from .iteration import GuardReport, Trace, TraceRow

FORMAT = "catiter-trace/1"


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name.removesuffix(".csv") + ".json")


def atomic_write(path, text: str) -> None:
    """Write ``text`` (UTF-8, LF newlines) to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _f(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _width(trace: Trace) -> int:
    return len(trace.rows[0].x) if trace.rows else len(trace.x0)


def trace_to_csv(trace: Trace) -> str:
    w = _width(trace)
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["n", "t_n", "s_n"] + [f"x_{i}" for i in range(w)] + [f"y_{i}" for i in range(w)]
                 + ["residual", "dist_to_p"])
    for r in trace.rows:
        y = [""] * w if r.y is None else [_f(c) for c in r.y]
        out.writerow([str(r.n), _f(r.t), _f(r.s)] + [_f(c) for c in r.x] + y + [_f(r.residual), _f(r.dist_to_p)])
    return buf.getvalue()


def trace_meta(trace: Trace) -> dict:
    return {
        "format": FORMAT,
        "space": trace.space_spec,
        "map": trace.map_spec,
        "schedule": trace.schedule_spec,
        "seed": trace.seed,
        "stop_reason": trace.stop_reason,
        "guard": None if trace.guard is None else trace.guard.as_dict(),
        "x0": list(trace.x0),
        "width": _width(trace),
        "rows": len(trace.rows),
    }


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_trace(trace: Trace, path) -> tuple[Path, Path]:
    path = Path(path)
    atomic_write(path, trace_to_csv(trace))
    meta = sidecar_path(path)
    atomic_write(meta, dumps_json(trace_meta(trace)))
    return path, meta


def _opt(cell: str):
    return None if cell == "" else float(cell)


def read_trace(path) -> Trace:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    if meta.get("format") != FORMAT:
        raise IntegrityError(f"{path}: unknown trace format {meta.get('format')!r}")
    w = int(meta["width"])
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != 5 + 2 * w:
            raise IntegrityError(f"{path}: header has {len(header)} columns, expected {5 + 2 * w}")
        for cells in reader:
            x = tuple(float(c) for c in cells[3:3 + w])
            ycells = cells[3 + w:3 + 2 * w]
            y = None if all(c == "" for c in ycells) else tuple(float(c) for c in ycells)
            rows.append(TraceRow(int(cells[0]), float(cells[1]), float(cells[2]), x, y,
                                 float(cells[3 + 2 * w]), _opt(cells[4 + 2 * w])))
    if len(rows) != meta["rows"]:
        raise IntegrityError(f"{path}: {len(rows)} rows but sidecar declares {meta['rows']}")
    guard = None if meta["guard"] is None else GuardReport.from_dict(meta["guard"])
    return Trace(meta["space"], meta["map"], meta["schedule"], int(meta["seed"]), tuple(rows),
                 meta["stop_reason"], guard, tuple(float(c) for c in meta["x0"]))


def traces_equal(a: Trace, b: Trace) -> bool:
    """Field-wise equality that treats NaN residuals as equal."""
    if (a.space_spec, a.map_spec, a.schedule_spec, a.seed, a.stop_reason, a.guard, a.x0) != \
            (b.space_spec, b.map_spec, b.schedule_spec, b.seed, b.stop_reason, b.guard, b.x0):
        return False
    if len(a.rows) != len(b.rows):
        return False
    for r, s in zip(a.rows, b.rows):
        same_res = r.residual == s.residual or (math.isnan(r.residual) and math.isnan(s.residual))
        if not same_res or (r.n, r.t, r.s, r.x, r.y, r.dist_to_p) != (s.n, s.t, s.s, s.x, s.y, s.dist_to_p):
            return False
    return True
