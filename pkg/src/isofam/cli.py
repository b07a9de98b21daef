"""Command-line client of the analysis service.

Thin by construction: commands build the service request models and
dispatch them either in-process (default) or to a running server via
``--server URL``; the CLI itself only parses flags and writes report
files.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import pydantic

from .charts import load_chart_file
from .errors import ChartValidationError, NumericalError


def _chart_source(args, label_attr="chart", file_attr="chart_file") -> dict:
    label = getattr(args, label_attr, None)
    path = getattr(args, file_attr, None)
    if (label is None) == (path is None):
        raise ChartValidationError(f"provide exactly one of --{label_attr.replace('_', '-')}, "
                                   f"--{file_attr.replace('_', '-')}")
    if label:
        return {"label": label}
    from .charts import chart_to_dict

    return {"definition": chart_to_dict(load_chart_file(path))}


def _dispatch(args, path: str, request_model, payload: dict) -> dict:
    req = request_model(**payload)
    if args.server:
        import httpx

        resp = httpx.post(args.server.rstrip("/") + path, json=req.model_dump(), timeout=3600.0)
        if resp.status_code == 400:
            raise ChartValidationError(resp.json().get("detail", resp.text))
        if resp.status_code == 422:
            raise NumericalError(resp.json().get("detail", resp.text))
        resp.raise_for_status()
        return resp.json()
    from .service import handlers

    handler = {
        "/analyze": handlers.handle_analyze,
        "/family": handlers.handle_family,
        "/moduli": handlers.handle_moduli,
        "/polar": handlers.handle_polar,
        "/congruence": handlers.handle_congruence,
        "/check": handlers.handle_check,
    }[path]
    return handler(req).model_dump()


def _emit(args, report: dict, stem: str) -> None:
    """Write the JSON report (and CSV blocks) or print to stdout."""
    csv_blocks: dict[str, str] = {}
    if isinstance(report.get("csv"), str) and report["csv"]:
        csv_blocks[stem] = report.pop("csv")
    if isinstance(report.get("points_csv"), dict):
        for theta, text in (report.pop("points_csv") or {}).items():
            csv_blocks[f"{stem}-theta-{theta}"] = text
    else:
        report.pop("points_csv", None)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if not args.out:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fmt = getattr(args, "format", "both")
    if fmt in ("json", "both"):
        p = out / f"{stem}.json"
        p.write_text(text)
        print(f"wrote {p}")
    if fmt in ("csv", "both"):
        for name, csv_text in csv_blocks.items():
            p = out / f"{name}.csv"
            p.write_text(csv_text)
            print(f"wrote {p}")


def _label_of(source: dict) -> str:
    return source.get("label") or source["definition"].get("label", "chart")


def cmd_analyze(args) -> int:
    from .service.models import AnalyzeRequest

    src = _chart_source(args)
    rep = _dispatch(args, "/analyze", AnalyzeRequest, {
        "chart": src, "grid": args.grid, "rank_tol": args.tol_rank, "circ_tol": args.tol_circ,
    })
    if rep["status"] == "ok":
        s = rep["summary"]
        print(f"{_label_of(src)}: isotropic={s['isotropic']} max_dev={s['max_dev']:.3e} "
              f"ranks={s['rank_pattern']} l0_cells={len(s['l0_cells'])}")
    else:
        d = rep["diagnostic"]
        print(f"{_label_of(src)}: {rep['status']} trace={d['trace_norm']:.3e} at {d['point']}")
    _emit(args, rep, f"analyze-{_label_of(src)}")
    return 0


def cmd_family(args) -> int:
    from .service.models import FamilyRequest

    src = _chart_source(args)
    rep = _dispatch(args, "/family", FamilyRequest, {
        "chart": src, "grid": args.grid, "thetas": args.theta or [0.0],
        "substeps": args.substeps, "include_points": args.points, "jobs": args.jobs,
    })
    for m in rep["members"]:
        print(f"theta={m['theta']:.4f}: isometry={m['isometry_deviation']:.2e} "
              f"meanH={m['mean_curvature_residual']:.2e} congruent={m['congruent_to_base']} "
              f"residual={m['congruence_residual_to_base']:.2e}")
    _emit(args, rep, f"family-{_label_of(src)}")
    return 0


def cmd_moduli(args) -> int:
    from .service.models import ModuliRequest

    src = _chart_source(args)
    rep = _dispatch(args, "/moduli", ModuliRequest, {
        "chart": src, "steps": args.steps, "close_tol": args.tol_close,
        "path_steps": args.path_steps,
    })
    r = rep["report"]
    print(f"{_label_of(src)}: classification={r['classification']} "
          f"detected={[round(t, 8) for t in r['detected_thetas']]}")
    _emit(args, rep, f"moduli-{_label_of(src)}")
    return 0


def cmd_polar(args) -> int:
    from .service.models import PolarRequest

    src = _chart_source(args)
    rep = _dispatch(args, "/polar", PolarRequest, {
        "chart": src, "grid": args.grid, "thetas": args.theta or [],
    })
    s = rep["summary"]
    print(f"{_label_of(src)} polar: conformality_dev={s['max_conformality_dev']:.3e} "
          f"isotropy_dev={s['polar_isotropy_max_dev']:.3e}")
    _emit(args, rep, f"polar-{_label_of(src)}")
    return 0


def cmd_congruence(args) -> int:
    from .service.models import CongruenceRequest

    src = _chart_source(args)
    payload = {"chart_a": src, "grid": args.grid, "theta": args.theta}
    if args.other or args.other_file:
        payload["chart_b"] = _chart_source(args, "other", "other_file")
        payload["theta"] = None
    rep = _dispatch(args, "/congruence", CongruenceRequest, payload)
    r = rep["result"]
    print(f"verdict={r['verdict']} residual={r['residual_rms']:.3e}")
    _emit(args, rep, f"congruence-{_label_of(src)}")
    return 0


def cmd_check(args) -> int:
    from .service.models import CheckRequest

    charts = None if args.all or not args.chart else list(args.chart)
    rep = _dispatch(args, "/check", CheckRequest, {
        "charts": charts, "grid": args.grid, "moduli_steps": args.steps,
        "family_grid": args.family_grid,
    })
    for row in rep["rows"]:
        mark = "PASS" if row["passed"] else "FAIL"
        print(f"[{mark}] {row['chart']:>22} {row['name']:<38} "
              f"{row['value']:.3e} {row['comparator']} {row['threshold']:.1e}")
    print("all passed" if rep["passed"] else "FAILURES present")
    _emit(args, rep, "check")
    return 0 if rep["passed"] else 2


def cmd_catalog(args) -> int:
    if args.server:
        import httpx

        path = f"/catalog/{args.label}" if args.label else "/catalog"
        rep = httpx.get(args.server.rstrip("/") + path, timeout=600.0).json()
    else:
        from .service import handlers

        rep = handlers.handle_catalog(args.label).model_dump()
    for e in rep["entries"]:
        exp = e["expected"]
        print(f"{e['label']:>22}: {e['ambient']['kind']} N={e['ambient']['dim']} "
              f"isotropic={exp['isotropic']} ranks={exp['ranks']} periodic={exp['periodic']}")
    if args.out:
        _emit(args, rep, "catalog")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_common(p, grid_default=64):
    p.add_argument("--chart", help="catalog label")
    p.add_argument("--chart-file", help="chart definition JSON file")
    p.add_argument("--grid", type=int, default=grid_default, help="grid resolution per axis")
    p.add_argument("--out", help="output directory (default: print JSON to stdout)")
    p.add_argument("--format", choices=["json", "csv", "both"], default="both")
    p.add_argument("--server", help="base URL of a running isofam service")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for multi-theta runs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isofam",
                                 description="isotropic-surface analysis toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="flags, ranks, curvature ellipses, isotropy verdict")
    _add_common(p)
    p.add_argument("--tol-rank", type=float, default=1e-7)
    p.add_argument("--tol-circ", type=float, default=1e-6)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("family", help="integrate associated-family members g_theta")
    _add_common(p)
    p.add_argument("--theta", type=float, action="append", help="angle (repeatable)")
    p.add_argument("--substeps", type=int, default=2)
    p.add_argument("--points", action="store_true", help="include sampled points as CSV")
    p.set_defaults(fn=cmd_family)

    p = sub.add_parser("moduli", help="scan theta for closing family members")
    _add_common(p)
    p.add_argument("--steps", type=int, default=360)
    p.add_argument("--path-steps", type=int, default=256)
    p.add_argument("--tol-close", type=float, default=1e-6)
    p.set_defaults(fn=cmd_moduli)

    p = sub.add_parser("polar", help="polar surface, conformality and isotropy")
    _add_common(p)
    p.add_argument("--theta", type=float, action="append",
                   help="also compare the conformal factor of the theta-member polar")
    p.set_defaults(fn=cmd_polar)

    p = sub.add_parser("congruence", help="Procrustes congruence of two immersions")
    _add_common(p)
    p.add_argument("--other", help="catalog label of the second chart")
    p.add_argument("--other-file", help="definition file of the second chart")
    p.add_argument("--theta", type=float, help="compare against the theta family member")
    p.set_defaults(fn=cmd_congruence)

    p = sub.add_parser("check", help="run the invariant battery over the catalog")
    p.add_argument("--chart", action="append", help="catalog label (repeatable)")
    p.add_argument("--all", action="store_true", help="all catalog charts (default)")
    p.add_argument("--grid", type=int, default=32)
    p.add_argument("--steps", type=int, default=120, help="moduli scan steps")
    p.add_argument("--family-grid", type=int, default=48)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=["json", "csv", "both"], default="json")
    p.add_argument("--server")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("catalog", help="list built-in charts")
    p.add_argument("--label")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv", "both"], default="json")
    p.add_argument("--server")
    p.set_defaults(fn=cmd_catalog)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8410)
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ChartValidationError, pydantic.ValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
