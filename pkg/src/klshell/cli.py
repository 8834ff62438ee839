"""Command-line front end: ``klshell run`` and ``klshell compare``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import modelfile
from .constitutive import MODELS, UnknownModelError
from .continuation import VARIANTS, PathTracingError, trace
from .modelfile import ModelFileError
from .nurbs import GeometryInputError
from .postprocess import PointTracker, field_samples, write_field_dump
from .presets import PRESETS, UnknownPresetError, preset
from .solver import SingularMatrixError

log = logging.getLogger("klshell")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _document(args) -> dict:
    if args.preset:
        kwargs = {}
        if args.thickness is not None:
            kwargs["thickness"] = args.thickness
        if args.elements is not None:
            kwargs["elements"] = args.elements
        try:
            doc = preset(args.preset, **kwargs)
        except TypeError as exc:
            raise ModelFileError(f"preset {args.preset!r} does not accept {sorted(kwargs)}") from exc
    elif args.model:
        doc = modelfile.load(args.model)
    else:
        raise ModelFileError("give a model file or --preset")
    solver = doc.setdefault("solver", {})
    if args.increments is not None:
        solver["max_increments"] = args.increments
    if args.tol is not None:
        solver["force_tolerance"] = args.tol
    if args.method is not None:
        solver["method"] = args.method
    return doc


def write_path_csv(path, result, monitors) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["increment", "lpf", *monitors, "iterations", "arc_length", "inertia", "seconds"])
        for p in result.points:
            w.writerow([p.increment, _fmt(p.lpf), *(_fmt(p.monitors[m]) for m in monitors),
                        p.iterations, _fmt(p.arc_length), _fmt(p.inertia), _fmt(p.seconds)])


def write_track_csv(path, tracker) -> None:
    if not tracker.records:
        return
    keys = list(tracker.records[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for rec in tracker.records:
            w.writerow([_fmt(rec[k]) for k in keys])


def environment_stamp(threads) -> dict:
    import scipy

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "platform": platform.platform(), "threads": threads}


def run_analysis(doc, constitutive=None, variant=None, track=True):
    """Build and trace one model; returns ``(analysis, result, trackers, seconds)``."""
    analysis = modelfile.build(doc, constitutive=constitutive, variant=variant)
    trackers = {}
    if track:
        for name, (xi, eta) in doc.get("points", {}).items():
            trackers[name] = PointTracker(analysis.model, xi, eta)

    def on_point(point, state):
        for t in trackers.values():
            t(point, state)

    t0 = time.perf_counter()
    result = trace(analysis.problem, analysis.method, analysis.settings, analysis.steps, on_point)
    return analysis, result, trackers, time.perf_counter() - t0


def cmd_run(args) -> int:
    doc = _document(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    analysis, result, trackers, seconds = run_analysis(doc, args.constitutive, args.variant)
    monitors = [m["name"] for m in analysis.model.monitors]
    outputs = doc.get("outputs", ["path", "report"])
    write_path_csv(out / "path.csv", result, monitors)
    for name, tracker in trackers.items():
        write_track_csv(out / f"point_{name}.csv", tracker)
    if "fields" in outputs and result.final_state is not None:
        recs = field_samples(analysis.model, result.final_state, grid=doc.get("field_grid", 5),
                             lpf=result.points[-1].lpf)
        write_field_dump(recs, out / "fields.ndjson")
    report = {
        "name": doc.get("name", args.model or args.preset),
        "constitutive": analysis.model.constitutive,
        "method": analysis.method,
        "variant": analysis.settings.variant,
        "status": result.status,
        "message": result.message,
        "increments": [
            {"increment": p.increment, "lpf": p.lpf, "monitors": p.monitors, "iterations": p.iterations,
             "arc_length": p.arc_length, "inertia": p.inertia, "seconds": p.seconds}
            for p in result.points
        ],
        "totals": {"increments": len(result.points) - 1, "iterations": result.total_iterations, "seconds": seconds},
        "environment": environment_stamp(args.threads),
    }
    (out / "report.json").write_text(json.dumps(report, indent=1))
    last = result.points[-1]
    print(f"{report['name']} [{analysis.model.constitutive}] status={result.status} lpf={last.lpf:.6g} "
          + " ".join(f"{k}={v:.10g}" for k, v in last.monitors.items()))
    if result.status == "failed":
        print(f"solver failure: {result.message}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _monotone_prefix(lpf):
    d = np.diff(lpf)
    bad = np.nonzero(d <= 0)[0]
    return lpf.size if bad.size == 0 else int(bad[0]) + 1


def cmd_compare(args) -> int:
    doc = _document(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = {}
    for model in MODELS:
        try:
            analysis, result, _, seconds = run_analysis(doc, model, args.variant, track=False)
            runs[model] = (result, seconds)
            print(f"{model}: status={result.status} increments={len(result.points) - 1} seconds={seconds:.3f}")
        except Exception as exc:  # recorded, the other models still run
            log.error("model %s failed: %s", model, exc)
            runs[model] = (None, float("nan"))
    monitors = [m["name"] for m in doc.get("monitors", [])]
    ref = runs["Da"][0]
    summary = {"models": {}, "time_ratio_vs_D0": {}}
    t0 = runs["D0"][1]
    for model, (res, secs) in runs.items():
        entry = {"seconds": secs, "status": None if res is None else res.status}
        if res is not None and ref is not None:
            entry["final"] = res.points[-1].monitors
            entry["final_lpf"] = res.points[-1].lpf
            entry["relative_difference"] = {
                m: (res.points[-1].monitors[m] - ref.points[-1].monitors[m]) / ref.points[-1].monitors[m]
                if ref.points[-1].monitors[m] != 0 else 0.0 for m in monitors
            }
        summary["models"][model] = entry
        summary["time_ratio_vs_D0"][model] = secs / t0 if t0 == t0 and t0 > 0 else None
    if ref is not None:
        lam = ref.lpf[:_monotone_prefix(ref.lpf)]
        with open(out / "compare.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["lpf"]
            for m in monitors:
                header += [f"{m}_{k}" for k in MODELS] + [f"{m}_rel_{k}" for k in MODELS if k != "Da"]
            w.writerow(header)
            cols = []
            for m in monitors:
                vals = {}
                for k in MODELS:
                    res = runs[k][0]
                    if res is None:
                        vals[k] = np.full(lam.size, np.nan)
                        continue
                    n = _monotone_prefix(res.lpf)
                    vals[k] = np.interp(lam, res.lpf[:n], res.monitor(m)[:n], left=np.nan, right=np.nan)
                cols += [vals[k] for k in MODELS]
                with np.errstate(divide="ignore", invalid="ignore"):
                    cols += [np.where(vals["Da"] != 0, (vals[k] - vals["Da"]) / vals["Da"], 0.0)
                             for k in MODELS if k != "Da"]
            for i, lp in enumerate(lam):
                w.writerow([_fmt(lp)] + [_fmt(c[i]) for c in cols])
    (out / "compare.json").write_text(json.dumps(summary, indent=1))
    failed = [k for k, (res, _) in runs.items() if res is None or res.status == "failed"]
    return EXIT_SOLVER if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="klshell", description="Isogeometric Kirchhoff-Love shell analysis")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "compare"):
        p = sub.add_parser(name)
        p.add_argument("model", nargs="?", help="model file (JSON)")
        p.add_argument("--preset", choices=PRESETS)
        p.add_argument("--thickness", type=float, help="preset thickness variant")
        p.add_argument("--elements", type=int, help="preset elements per direction")
        p.add_argument("--variant", choices=VARIANTS)
        p.add_argument("--method", choices=["linear", "newton", "arc_length"])
        p.add_argument("--increments", type=int)
        p.add_argument("--tol", type=float, help="relative force tolerance")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default="out")
        if name == "run":
            p.add_argument("--constitutive", choices=MODELS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s")
    limiter = None
    if args.threads is not None:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(args.threads)
    try:
        return cmd_run(args) if args.command == "run" else cmd_compare(args)
    except (ModelFileError, UnknownPresetError, UnknownModelError, GeometryInputError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PathTracingError, SingularMatrixError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
