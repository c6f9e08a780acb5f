"""Config-driven runs, sweeps and geometry verification.

Every entry point writes its artifacts atomically and returns an
:class:`Outcome` whose ``status`` follows the CLI contract: 0 when every
enabled check passed, 1 when some check failed. Configuration problems
raise :class:`ConfigError` (status 2 at the CLI).
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as diag
from .config import ExperimentConfig, EstimateConfig, SweepConfig, VerifyConfig
from .errors import CatIterError, ConfigError, DomainError, IntegrityError, UnsupportedError
from .geometry import (
    Region,
    comparison_suite,
    contraction_suite,
    defect_suite,
    estimate_k,
    estimate_k_witness,
)
from .iteration import Trace, run_ishikawa
from .maps import Map, construct_map, nonexpansiveness_probe
from .schedules import Schedule, classify_schedule
from .spaces import Space, construct_space, validate_point
from .traceio import atomic_write, dumps_json, write_trace

OUT_DIR_ENV = "CATITER_OUT_DIR"

# config name -> name used in reports and failure messages
CHECK_NAMES = {
    "residual": "residual",
    "probe": "nonexpansiveness_probe",
    "fejer": "fejer",
    "lemma_l2": "lemma_l2_check",
    "lemma_l7": "lemma_l7_step_check",
    "zhang": "zhang_convergence",
    "energy": "energy_bound_check",
    "delta_limit": "delta_limit_proxy",
}


def resolve_out_dir(flag: Optional[str], configured: Optional[str]) -> Path:
    """--out-dir beats the config file, which beats $CATITER_OUT_DIR, which beats ./out."""
    for cand in (flag, configured, os.environ.get(OUT_DIR_ENV)):
        if cand:
            return Path(cand)
    return Path("out")


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_text(title: str, sections: dict) -> str:
    lines = [title, "=" * len(title)]
    for head, body in sections.items():
        lines.append("")
        lines.append(f"[{head}]")
        for k, v in body.items():
            if isinstance(v, dict):
                v = ", ".join(f"{a}={_fmt(b)}" for a, b in v.items())
            lines.append(f"{k}: {_fmt(v)}")
    return "\n".join(lines) + "\n"


@dataclass
class Outcome:
    status: int
    report: dict
    failed: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)
    trace: Optional[Trace] = None


# ------------------------------------------------------------ runs


def build_space(spec: dict) -> Space:
    try:
        return construct_space(spec)
    except CatIterError as exc:
        raise ConfigError(f"[space] {exc}") from exc


def build_map(spec: dict, space: Space) -> Map:
    try:
        return construct_map(spec, space)
    except CatIterError as exc:
        raise ConfigError(f"[map] {exc}") from exc


def build_schedule(t: str, s: str) -> Schedule:
    try:
        return Schedule.parse(t, s)
    except CatIterError as exc:
        raise ConfigError(f"[schedule] {exc}") from exc


def build_x0(spec: dict, space: Space) -> np.ndarray:
    try:
        if "coords" in spec:
            return validate_point(space, spec["coords"])
        if space.kind != "sphere":
            raise ConfigError(f"[x0] colatitude/longitude needs a sphere, not {space.kind}; use coords")
        return space.polar_point(float(spec["colatitude"]), float(spec.get("longitude", 0.0)))
    except ConfigError:
        raise
    except CatIterError as exc:
        raise ConfigError(f"[x0] {exc}") from exc


def _cat1_scale(space: Space, d: float) -> float:
    """Metric scale bringing the run into the CAT(1) setting with d(x0, p) <= pi/8 where possible."""
    if space.K > 0:
        return math.sqrt(space.K)
    return min(1.0, (math.pi / 8) / d) if d > 0 else 1.0


def _applicable(cfg: ExperimentConfig, T: Map, trace: Trace) -> tuple:
    out = ["residual", "lemma_l7"]
    g = trace.guard
    if g is not None and g.nearest_fixed_point is not None:
        out += ["fejer", "energy", "delta_limit"]
        C = cfg.options.get("C", diag.default_C(trace, T.space) if T.space.K > 0 else 2.0 * g.d_x0_F)
        if 0.0 < C < math.pi:
            out += ["lemma_l2", "zhang"]
    return tuple(c for c in CHECK_NAMES if c in out)


def _lemma_C(cfg: ExperimentConfig, trace: Trace, space: Space) -> float:
    if "C" in cfg.options:
        return float(cfg.options["C"])
    if trace.guard is None:
        raise UnsupportedError("run is unguarded; set diagnostics.C")
    return diag.default_C(trace, space) if space.K > 0 else 2.0 * trace.guard.d_x0_F


def _run_check(name: str, cfg: ExperimentConfig, space: Space, T: Map, trace: Trace) -> dict:
    opt = cfg.options
    tol = float(opt.get("tol", 1e-9))
    if name == "residual":
        try:
            diag.residual_series(trace, T, tol)
        except IntegrityError as exc:
            return {"satisfied": False, "error": str(exc)}
        return {"satisfied": trace.stop_reason == "tolerance", "stop_reason": trace.stop_reason,
                "final_residual": trace.final_residual, "tol": cfg.tol}
    if name == "probe":
        region = None
        if T.domain_guard is None:
            g = trace.guard
            if g is not None and g.nearest_fixed_point is not None and g.d_x0_F > 0:
                region = Region(g.nearest_fixed_point, g.d_x0_F)
            else:
                r = float(opt.get("probe_radius", min(1.0, space.geodesic_bound / 4)))
                region = Region(trace.x0, r)
        rep = nonexpansiveness_probe(T, region, int(opt.get("probe_samples", 2000)), cfg.seed)
        return {"satisfied": rep.nonexpansive, **rep.as_dict()}
    if name == "lemma_l7":
        return diag.lemma_l7_step_check(trace, space, T, tol).as_dict()

    g = trace.guard
    if g is None or g.nearest_fixed_point is None:
        raise UnsupportedError("needs a known fixed-point set and a guarded run")
    p = np.array(g.nearest_fixed_point)
    if name == "fejer":
        rng = np.random.default_rng(cfg.seed)
        refs = diag.fixed_point_sample(T, trace.x0, int(opt.get("fejer_samples", 32)), rng)
        rep = diag.fejer_report(trace, space, refs, float(opt.get("fejer_tol", 1e-12)))
        return {**rep.as_dict(), "reference_points": len(refs)}
    if name in ("lemma_l2", "zhang"):
        C = _lemma_C(cfg, trace, space)
        rep = diag.lemma_l2_check(trace, space, T, C, tol)
        if name == "lemma_l2":
            return {**rep.as_dict(), "C": C}
        r = diag._valid_residuals(trace)
        q = C / math.sin(C)
        b = [4.0 * q * row.t * (1.0 - row.t) * row.s for row in trace.rows[:len(r)]]
        z = diag.zhang_convergence(r, b, tol=max(cfg.tol, 1e-12), atol=tol)
        return {"satisfied": z.premise_holds, "premise_holds": z.premise_holds, "witness_index": z.witness_index,
                "limit_estimate": z.limit_estimate, "converges_to_zero": z.converges_to_zero}
    if name == "energy":
        scale = _cat1_scale(space, g.d_x0_F)
        unit = space.rescaled(scale) if scale != 1.0 else space
        radius = min(g.d_x0_F * scale, math.pi / 8) or math.pi / 8
        region = Region(tuple(space.scale_point(p, scale)), radius)
        k_hat = estimate_k(unit, region, int(opt.get("k_samples", 10_000)), cfg.seed)
        k = 0.99 * k_hat
        rep = diag.energy_bound_check(trace, space, T, p, k, tol)
        return {**rep.as_dict(), "k_estimate": k_hat, "k_used": k, "k_region_radius": radius}
    if name == "delta_limit":
        try:
            rep = diag.delta_limit_proxy(trace, space, T, int(opt.get("tail", 10)))
        except UnsupportedError as exc:
            return {"satisfied": False, "error": str(exc)}
        ok = rep.dist_to_F <= float(opt.get("limit_tol", 1e-6)) and rep.radius_ok
        return {"satisfied": ok, **rep.as_dict()}
    raise ConfigError(f"unknown diagnostic {name!r}")


def execute(cfg: ExperimentConfig):
    """Build everything from ``cfg`` and run the iteration (no files written)."""
    space = build_space(cfg.space)
    T = build_map(cfg.map, space)
    sched = build_schedule(cfg.t, cfg.s)
    x0 = build_x0(cfg.x0, space)
    try:
        trace = run_ishikawa(T, x0, sched, tol=cfg.tol, max_iters=cfg.max_iters, seed=cfg.seed)
    except (DomainError, ValueError) as exc:
        if isinstance(exc, CatIterError) and not isinstance(exc, DomainError):
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"cannot start the run: {exc}") from exc
    return space, T, sched, trace


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> Outcome:
    out_dir = Path(out_dir) if out_dir is not None else resolve_out_dir(None, cfg.out_dir)
    space, T, sched, trace = execute(cfg)
    enabled = cfg.diagnostics if cfg.diagnostics is not None else _applicable(cfg, T, trace)

    checks, failed = {}, []
    for name in enabled:
        label = CHECK_NAMES[name]
        try:
            res = _run_check(name, cfg, space, T, trace)
        except CatIterError as exc:
            res = {"satisfied": False, "error": f"{type(exc).__name__}: {exc}"}
        checks[label] = res
        if not res["satisfied"]:
            failed.append(label)

    trace_path, meta_path = write_trace(trace, out_dir / f"{cfg.name}.trace.csv")
    cls = classify_schedule(sched)
    report = {
        "config": cfg.as_dict(),
        "run": {"iterations": trace.rows[-1].n, "stop_reason": trace.stop_reason,
                "final_residual": trace.final_residual,
                "guard": None if trace.guard is None else trace.guard.as_dict()},
        "classification": cls.as_dict(),
        "checks": checks,
        "failed": failed,
        "status": 1 if failed else 0,
        "trace": trace_path.name,
    }
    text_sections = {"run": report["run"], "classification": report["classification"]}
    for label, res in checks.items():
        text_sections[f"check {label}"] = {"result": "PASS" if res["satisfied"] else "FAIL",
                                           **{k: v for k, v in res.items() if k != "satisfied"}}
    text_sections["summary"] = {"status": report["status"], "failed": ", ".join(failed) or "none",
                                "trace": trace_path.name}
    txt = out_dir / f"{cfg.name}.report.txt"
    js = out_dir / f"{cfg.name}.report.json"
    atomic_write(txt, render_text(f"run {cfg.name}", clean(text_sections)))
    atomic_write(js, dumps_json(clean(report)))
    paths = {"trace": str(trace_path), "trace_meta": str(meta_path), "report_txt": str(txt), "report_json": str(js)}
    return Outcome(report["status"], report, failed, paths, trace)


# ------------------------------------------------------------ sweeps


_POINT_KEYS = ("center", "anchor", "point")
_LENGTH_KEYS = ("radius", "guard_radius", "start")


def scale_map_spec(spec, space: Space, scale: float):
    """The same map described in the metric multiplied by ``scale``."""
    if isinstance(spec, list):
        return [scale_map_spec(v, space, scale) for v in spec]
    if not isinstance(spec, dict):
        return spec
    out = {}
    for k, v in spec.items():
        if k in _POINT_KEYS:
            out[k] = [float(c) for c in space.scale_point(np.asarray(v, dtype=float), scale)]
        elif k in _LENGTH_KEYS:
            out[k] = float(v) * scale
        else:
            out[k] = scale_map_spec(v, space, scale)
    return out


def sweep_cells(sw: SweepConfig) -> list[dict]:
    names = list(sw.axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*(sw.axes[n] for n in names))]


def cell_config(base: ExperimentConfig, cell: dict, index: int) -> ExperimentConfig:
    kw = {"name": f"{base.name}_cell{index:03d}"}
    if "t" in cell:
        kw["t"] = cell["t"]
    if "s" in cell:
        kw["s"] = cell["s"]
    if "colatitude" in cell:
        kw["x0"] = {"colatitude": cell["colatitude"], "longitude": base.x0.get("longitude", 0.0)}
    if "K" in cell:
        kw["space"] = {**base.space, "K": cell["K"]}
    return replace(base, **kw)


def _rescale_pair(cfg: ExperimentConfig, trace: Trace, space: Space) -> dict:
    if space.K <= 0:
        return {"rescale_scale": math.nan, "rescale_max_dist_dev": math.nan, "rescale_max_coord_dev": math.nan,
                "rescale_agrees": None}
    scale = math.sqrt(space.K)
    unit_space = space.rescaled(scale)
    x0 = space.scale_point(np.array(trace.x0), scale)
    paired = replace(cfg, space=unit_space.spec(), map=scale_map_spec(cfg.map, space, scale),
                     x0={"coords": [float(c) for c in x0]}, tol=cfg.tol * scale)
    _, _, _, trace_1 = execute(paired)
    rep = diag.compare_rescaled(trace, space, trace_1, unit_space, scale)
    return {"rescale_scale": scale, "rescale_max_dist_dev": rep.max_dist_dev,
            "rescale_max_coord_dev": rep.max_coord_dev, "rescale_agrees": rep.agrees(1e-9)}


def _run_cell(args) -> dict:
    cfg, cell, index, out_dir, rescale = args
    try:
        outcome = run_experiment(cfg, out_dir)
    except ConfigError as exc:
        return {"cell": index, **cell, "status": 2, "error": str(exc)}
    rep = outcome.report
    cls = rep["classification"]
    fejer = rep["checks"].get("fejer", {}).get("min_slack", math.nan)
    row = {
        "cell": index,
        "t": cfg.t,
        "s": cfg.s,
        "colatitude": cfg.x0.get("colatitude", math.nan),
        "K": float(cfg.space.get("K", math.nan)),
        "t1_applicable": cls["theorem_t1_applicable"],
        "t2_applicable": cls["theorem_t2_applicable"],
        "iterations": rep["run"]["iterations"],
        "stop_reason": rep["run"]["stop_reason"],
        "final_residual": rep["run"]["final_residual"],
        "fejer_min_slack": fejer,
        "status": outcome.status,
        "failed": ";".join(outcome.failed),
    }
    if rescale:
        row.update(_rescale_pair(cfg, outcome.trace, build_space(cfg.space)))
    return row


SUMMARY_COLUMNS = ("cell", "t", "s", "colatitude", "K", "t1_applicable", "t2_applicable", "iterations",
                   "stop_reason", "final_residual", "fejer_min_slack", "status", "failed")
RESCALE_COLUMNS = ("rescale_scale", "rescale_max_dist_dev", "rescale_max_coord_dev", "rescale_agrees")


def _cell_str(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str) and v not in ("inf", "-inf", "nan"):
        return v
    return str(v)


def run_sweep(sw: SweepConfig, out_dir: Optional[Path] = None) -> Outcome:
    out_dir = Path(out_dir) if out_dir is not None else resolve_out_dir(None, sw.base.out_dir)
    if sw.size > sw.cap:
        raise ConfigError(f"sweep has {sw.size} cells, above the cap of {sw.cap}")
    cells = sweep_cells(sw)
    # validate every cell up front so a bad axis value is a config error, not a half-finished sweep
    cfgs = [cell_config(sw.base, c, i) for i, c in enumerate(cells)]
    for cfg in cfgs:
        space = build_space(cfg.space)
        build_map(cfg.map, space)
        build_schedule(cfg.t, cfg.s)
        build_x0(cfg.x0, space)
    jobs = [(cfg, cell, i, out_dir / "cells", sw.rescale_check) for i, (cfg, cell) in enumerate(zip(cfgs, cells))]
    if sw.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=sw.workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]

    columns = SUMMARY_COLUMNS + (RESCALE_COLUMNS if sw.rescale_check else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell_str(clean(r.get(c))) for c in columns])
    summary = out_dir / f"{sw.base.name}.summary.csv"
    atomic_write(summary, buf.getvalue())

    failed = [f"cell{r['cell']:03d}" for r in rows if r["status"] != 0]
    bad_rescale = [f"cell{r['cell']:03d}:rescale" for r in rows if sw.rescale_check and r.get("rescale_agrees") is False]
    failed += bad_rescale
    report = {"cells": len(rows), "axes": sw.axes, "failed": failed, "status": 1 if failed else 0,
              "summary": summary.name, "rows": rows}
    paths = {"summary": str(summary)}
    js = out_dir / f"{sw.base.name}.sweep.json"
    txt = out_dir / f"{sw.base.name}.sweep.txt"
    atomic_write(js, dumps_json(clean(report)))
    atomic_write(txt, render_text(f"sweep {sw.base.name}", clean({
        "sweep": {"cells": len(rows), "axes": sw.axes, "summary": summary.name},
        "result": {"status": report["status"], "failed": ", ".join(failed) or "none"},
    })))
    paths.update(report_json=str(js), report_txt=str(txt))
    return Outcome(report["status"], report, failed, paths)


# ------------------------------------------------------------ geometry verification


def verify_geometry(vc: VerifyConfig, out_dir: Optional[Path] = None) -> Outcome:
    out_dir = Path(out_dir) if out_dir is not None else resolve_out_dir(None, vc.out_dir)
    space = build_space(vc.space)
    model_K = space.K if vc.model_K is None else float(vc.model_K)
    # contraction and defect suites live in the CAT(1) setting
    unit = space.rescaled(math.sqrt(space.K)) if space.K > 1 else space
    suites = {}
    k_hat = None
    for name in vc.suites:
        try:
            if name == "comparison":
                rep = comparison_suite(space, model_K, vc.samples, vc.seed, tol=vc.tol)
            elif name == "contraction":
                rep = contraction_suite(unit, vc.samples, vc.seed, vc.tol)
            else:
                region = Region(tuple(unit.origin()), vc.region_radius)
                k_hat, _ = estimate_k_witness(unit, region, vc.samples, vc.seed)
                rep = defect_suite(unit, region, 0.99 * k_hat, vc.samples, vc.seed + 1, vc.tol)
            suites[name] = rep.as_dict()
        except CatIterError as exc:
            suites[name] = {"name": name, "satisfied": False, "error": f"{type(exc).__name__}: {exc}"}
    failed = [n for n, r in suites.items() if not r["satisfied"]]
    report = {"space": space.spec(), "model_K": model_K, "samples": vc.samples, "seed": vc.seed,
              "k_estimate": k_hat, "suites": suites, "failed": failed, "status": 1 if failed else 0}
    js = out_dir / f"{vc.name}.report.json"
    txt = out_dir / f"{vc.name}.report.txt"
    sections = {"setup": {"space": space.spec(), "model_K": model_K, "samples": vc.samples, "seed": vc.seed}}
    for n, r in suites.items():
        sections[f"suite {n}"] = {"result": "PASS" if r["satisfied"] else "FAIL",
                                  **{k: v for k, v in r.items() if k not in ("name", "satisfied")}}
    sections["summary"] = {"k_estimate": k_hat, "status": report["status"], "failed": ", ".join(failed) or "none"}
    atomic_write(js, dumps_json(clean(report)))
    atomic_write(txt, render_text(f"verify {vc.name}", clean(sections)))
    return Outcome(report["status"], report, failed, {"report_json": str(js), "report_txt": str(txt)})


def run_estimate_k(ec: EstimateConfig, out_dir: Optional[Path] = None) -> Outcome:
    out_dir = Path(out_dir) if out_dir is not None else resolve_out_dir(None, ec.out_dir)
    space = build_space(ec.space)
    try:
        center = space.origin() if ec.center is None else validate_point(space, ec.center)
        k_hat, w = estimate_k_witness(space, Region(tuple(float(c) for c in center), ec.radius), ec.samples, ec.seed)
    except CatIterError as exc:
        raise ConfigError(f"[estimate] {exc}") from exc
    report = {"space": space.spec(), "center": [float(c) for c in center], "radius": ec.radius,
              "samples": ec.samples, "seed": ec.seed, "k_estimate": k_hat,
              "witness": {"x": w.x, "y": w.y, "z": w.z, "t": w.t} if w is not None else None, "status": 0}
    js = out_dir / f"{ec.name}.report.json"
    txt = out_dir / f"{ec.name}.report.txt"
    atomic_write(js, dumps_json(clean(report)))
    atomic_write(txt, render_text(f"estimate-k {ec.name}", clean({"estimate": {k: v for k, v in report.items()
                                                                              if k != "witness"}})))
    return Outcome(0, report, [], {"report_json": str(js), "report_txt": str(txt)})
