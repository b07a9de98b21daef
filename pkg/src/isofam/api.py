"""Report-building operations shared by the service handlers and the CLI.

Every function returns plain JSON-serializable dicts (plus CSV text for
tabular payloads) with a reproducibility header: the same chart, config
and package version produce byte-identical serialized reports.
"""

from __future__ import annotations

import io
from math import pi

import numpy as np

from . import __version__
from .catalog import CatalogEntry, catalog_get, catalog_labels
from .charts import GridSpec, SurfaceChart, chart_from_dict, chart_to_dict, load_chart_file
from .congruence import SampledImmersion, congruence_test, height_independence, takahashi_residual
from .errors import ChartValidationError, NonMinimalChartError
from .family import (
    FamilyParams,
    integrate_family,
    moduli_scan,
    monodromy_distances,
)
from .flags import isotropy_report, third_form_crosscheck
from .polar import polar_surface
from .verify import connection_convergence, verify_sampled_member

SCHEMA_VERSION = 1


def _clean(obj):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _header(command: str, config: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": command,
        "config": _clean(config),
    }


def resolve_chart(label: str | None = None, chart_file: str | None = None,
                  definition: dict | None = None) -> tuple[SurfaceChart, CatalogEntry | None]:
    sources = [s for s in (label, chart_file, definition) if s]
    if len(sources) != 1:
        raise ChartValidationError("provide exactly one of: catalog label, chart file, chart definition")
    if label:
        entry = catalog_get(label)
        return entry.chart, entry
    if chart_file:
        return load_chart_file(chart_file), None
    return chart_from_dict(definition), None


def _family_mode(chart: SurfaceChart, entry: CatalogEntry | None) -> str:
    if entry is not None and entry.expected.get("family_mode"):
        return entry.expected["family_mode"]
    # probe the center point: adapted frames need circular ellipses
    from .flags import curvature_ellipse, osculating_flag

    (u0, u1), (v0, v1) = chart.domain
    flag = osculating_flag(chart, (np.array([(u0 + u1) / 2]), np.array([(v0 + v1) / 2])))
    for k in range(1, flag.m + 1):
        if chart.ambient.generic_ranks[k - 1] == 2:
            if float(curvature_ellipse(flag, k).circularity_dev[0]) > 1e-6:
                return "generic"
    return "adapted"


# -- analyze -----------------------------------------------------------------


def analyze_report(chart: SurfaceChart, grid_n: int, rank_tol: float = 1e-7,
                   circ_tol: float = 1e-6) -> dict:
    config = {"chart": chart.label, "grid": grid_n, "rank_tol": rank_tol, "circ_tol": circ_tol}
    out = _header("analyze", config)
    grid = GridSpec(grid_n, grid_n)
    try:
        rep = isotropy_report(chart, grid, rank_tol=rank_tol, circ_tol=circ_tol)
    except NonMinimalChartError as exc:
        out["status"] = "rejected-nonminimal"
        out["diagnostic"] = {"point": list(exc.point), "trace_norm": exc.trace_norm}
        out["summary"] = None
        out["csv"] = ""
        return out
    out["status"] = "ok"
    out["summary"] = _clean(rep.summary())
    out["csv"] = _isotropy_csv(rep)
    return out


def _isotropy_csv(rep) -> str:
    m = rep.ranks.shape[-1]
    buf = io.StringIO()
    cols = ["u", "v"] + [f"rank_{k}" for k in range(1, m + 1)] + \
        [f"kappa_{k}" for k in range(1, m + 1)] + \
        [f"circ_dev_{k}" for k in range(1, m + 1)] + ["regular"]
    buf.write(",".join(cols) + "\n")
    nu, nv = rep.u.shape
    for i in range(nu):
        for j in range(nv):
            row = [repr(float(rep.u[i, j])), repr(float(rep.v[i, j]))]
            row += [str(int(rep.ranks[i, j, k])) for k in range(m)]
            row += [_fmt(rep.kappas[i, j, k]) for k in range(m)]
            row += [_fmt(rep.circ_dev[i, j, k]) for k in range(m)]
            row.append(str(int(rep.regular[i, j])))
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _fmt(x) -> str:
    x = float(x)
    return "nan" if not np.isfinite(x) else repr(x)


def _points_csv(u, v, pts) -> str:
    buf = io.StringIO()
    D = pts.shape[-1]
    buf.write(",".join(["u", "v"] + [f"x{k}" for k in range(D)]) + "\n")
    uu, vv = u.ravel(), v.ravel()
    flat = pts.reshape(-1, D)
    for i in range(flat.shape[0]):
        buf.write(",".join([repr(float(uu[i])), repr(float(vv[i]))] +
                           [repr(float(x)) for x in flat[i]]) + "\n")
    return buf.getvalue()


# -- family ------------------------------------------------------------------


def family_report(chart: SurfaceChart, entry, grid_n: int, thetas: list[float],
                  substeps: int = 2, include_points: bool = False, jobs: int = 1) -> dict:
    config = {"chart": chart.label, "grid": grid_n, "thetas": list(thetas),
              "substeps": substeps, "include_points": include_points}
    out = _header("family", config)
    grid = GridSpec(grid_n, grid_n)
    mode = _family_mode(chart, entry)
    base = SampledImmersion.from_chart(chart, grid)

    def run_one(theta: float) -> dict:
        res = integrate_family(chart, grid, FamilyParams(theta), substeps=substeps, mode=mode)
        ver = verify_sampled_member(chart, grid, res.points, theta)
        cong = congruence_test(base, SampledImmersion(base.u, base.v, res.points, chart.ambient))
        member = {
            "theta": theta,
            "drift": res.drift,
            "path_defect": res.path_defect,
            "isometry_deviation": ver.metric_deviation,
            "mean_curvature_residual": ver.mean_curvature_residual,
            "isotropy_max_dev": ver.isotropy_max_dev,
            "congruence_residual_to_base": cong.residual,
            "congruent_to_base": cong.congruent,
        }
        return member, res

    members = []
    points_csv = {}
    if jobs > 1 and len(thetas) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, thetas))
    else:
        results = [run_one(t) for t in thetas]
    for theta, (member, res) in zip(thetas, results):
        members.append(member)
        if include_points:
            U, V = grid.nodes(chart)
            points_csv[f"{theta:.6f}"] = _points_csv(U, V, res.points)
    out["mode"] = mode
    out["members"] = _clean(members)
    out["points_csv"] = points_csv if include_points else None
    return out


# -- moduli ------------------------------------------------------------------


def moduli_report(chart: SurfaceChart, entry, steps: int = 360, close_tol: float = 1e-6,
                  path_steps: int = 256, congruence_classes: bool = True,
                  class_grid: int = 32) -> dict:
    config = {"chart": chart.label, "steps": steps, "close_tol": close_tol,
              "path_steps": path_steps, "congruence_classes": congruence_classes,
              "class_grid": class_grid}
    out = _header("moduli", config)
    mode = _family_mode(chart, entry)
    scan = moduli_scan(chart, steps=steps, close_tol=close_tol, path_steps=path_steps, mode=mode)
    classes: list[list[float]] = []
    if congruence_classes and scan.detected and scan.classification == "finite":
        classes = _congruence_classes(chart, entry, scan.detected, class_grid)
    out["report"] = _clean({
        "theta_grid": scan.theta_grid,
        "distance_curves": scan.distances.T,  # one curve per generator
        "generators": [list(g) for g in chart.periods],
        "detected_thetas": scan.detected,
        "refined_distances": scan.refined_distances,
        "classification": scan.classification,
        "congruence_classes": classes,
    })
    return out


def _congruence_classes(chart, entry, thetas: list[float], grid_n: int) -> list[list[float]]:
    grid = GridSpec(grid_n, grid_n)
    mode = _family_mode(chart, entry)
    samples = []
    for th in thetas:
        res = integrate_family(chart, grid, FamilyParams(th), substeps=2, mode=mode)
        U, V = grid.nodes(chart)
        samples.append(SampledImmersion(U, V, res.points, chart.ambient))
    classes: list[list[float]] = []
    reps: list[int] = []
    for i, th in enumerate(thetas):
        placed = False
        for ci, r in enumerate(reps):
            if congruence_test(samples[r], samples[i], verdict_tol=1e-4).congruent:
                classes[ci].append(th)
                placed = True
                break
        if not placed:
            classes.append([th])
            reps.append(i)
    return classes


# -- polar -------------------------------------------------------------------


def polar_report(chart: SurfaceChart, entry, grid_n: int = 64, thetas: list[float] | None = None,
                 substeps: int = 2) -> dict:
    thetas = thetas or []
    config = {"chart": chart.label, "grid": grid_n, "thetas": list(thetas), "substeps": substeps}
    out = _header("polar", config)
    grid = GridSpec(grid_n, grid_n)
    rep = polar_surface(chart, grid)
    iso = isotropy_report(rep.chart, grid)
    U, V = grid.nodes(chart)
    out["summary"] = _clean({
        "max_conformality_dev": rep.max_conformality_dev,
        "conformal_factor_mean": float(rep.conformal_factor[~rep.excluded].mean()),
        "conformal_factor_min": float(rep.conformal_factor[~rep.excluded].min()),
        "conformal_factor_max": float(rep.conformal_factor[~rep.excluded].max()),
        "excluded_cells": [list(map(int, c)) for c in np.argwhere(rep.excluded)],
        "polar_isotropy_max_dev": iso.max_dev,
        "polar_rank_pattern": iso.summary()["rank_pattern"],
    })
    # conformal factors of the family polars, from the transported frames
    factor_rows = []
    mode = _family_mode(chart, entry)
    for th in thetas:
        res = integrate_family(chart, grid, FamilyParams(th), substeps=substeps, mode=mode)
        lam_th = _polar_factor_from_samples(chart, grid, res.polar_points)
        base = rep.conformal_factor[rep.excluded == False]  # noqa: E712
        inner = _interior_slice(lam_th["margin"])
        lam_base = rep.conformal_factor[inner, inner]
        dev = float(np.max(np.abs(lam_th["factor"] - lam_base)) / np.max(np.abs(lam_base)))
        factor_rows.append({"theta": th, "max_factor_deviation_vs_base": dev})
    out["family_factors"] = _clean(factor_rows)
    out["csv"] = _points_csv(U, V, rep.points)
    return out


def _interior_slice(margin: int) -> slice:
    return slice(margin, -margin) if margin else slice(None)


def _polar_factor_from_samples(chart, grid: GridSpec, polar_points: np.ndarray) -> dict:
    """Conformal factor of a sampled polar field by finite differences."""
    from .fdtools import sample_partials
    from .flags import osculating_flag

    hu, hv = grid.steps(chart)
    partials, margin = sample_partials(polar_points, hu, hv, 1, acc=6)
    xu, xv = partials[(1, 0)], partials[(0, 1)]
    Gs = np.empty(xu.shape[:-1] + (2, 2))
    Gs[..., 0, 0] = np.sum(xu * xu, axis=-1)
    Gs[..., 0, 1] = Gs[..., 1, 0] = np.sum(xu * xv, axis=-1)
    Gs[..., 1, 1] = np.sum(xv * xv, axis=-1)
    U, V = grid.nodes(chart)
    sl = _interior_slice(margin)
    flag = osculating_flag(chart, (U[sl, sl], V[sl, sl]))
    from .polar import conformality_from_metrics

    lam, dev = conformality_from_metrics(Gs, flag.coord_coeffs)
    return {"factor": lam, "dev": dev, "margin": margin}


# -- congruence --------------------------------------------------------------


def congruence_report(chart_a: SurfaceChart, entry_a, grid_n: int,
                      chart_b: SurfaceChart | None = None,
                      theta: float | None = None, substeps: int = 2) -> dict:
    config = {"chart_a": chart_a.label,
              "chart_b": chart_b.label if chart_b is not None else None,
              "theta": theta, "grid": grid_n, "substeps": substeps}
    out = _header("congruence", config)
    grid = GridSpec(grid_n, grid_n)
    A = SampledImmersion.from_chart(chart_a, grid)
    if (chart_b is None) == (theta is None):
        raise ChartValidationError("provide exactly one of: a second chart, or a family angle theta")
    if chart_b is not None:
        if chart_b.domain != chart_a.domain:
            raise ChartValidationError("congruence of two charts needs identical parameter domains")
        B = SampledImmersion.from_chart(chart_b, grid)
    else:
        mode = _family_mode(chart_a, entry_a)
        res = integrate_family(chart_a, grid, FamilyParams(theta), substeps=substeps, mode=mode)
        B = SampledImmersion(A.u, A.v, res.points, chart_a.ambient)
    result = congruence_test(A, B)
    out["result"] = _clean(result.to_dict())
    out["result"]["verdict"] = "congruent" if result.congruent else "noncongruent"
    return out


# -- catalog -----------------------------------------------------------------


def catalog_report(label: str | None = None) -> dict:
    out = _header("catalog", {"label": label})
    if label:
        entry = catalog_get(label)
        out["entries"] = [_entry_dict(entry, with_definition=True)]
    else:
        out["entries"] = [_entry_dict(catalog_get(lbl)) for lbl in catalog_labels()]
    return out


def _entry_dict(entry: CatalogEntry, with_definition: bool = False) -> dict:
    d = {
        "label": entry.label,
        "ambient": {"kind": entry.chart.ambient.kind, "dim": entry.chart.ambient.ambient_dim},
        "domain": [list(entry.chart.domain[0]), list(entry.chart.domain[1])],
        "periods": [list(p) for p in entry.chart.periods],
        "expected": _clean({k: list(v) if isinstance(v, tuple) else v
                            for k, v in entry.expected.items()}),
    }
    if with_definition:
        d["definition"] = chart_to_dict(entry.chart)
    return d


# -- check battery -----------------------------------------------------------


def check_report(labels: list[str] | None = None, grid_n: int = 32,
                 moduli_steps: int = 120, family_grid: int = 48) -> dict:
    config = {"charts": labels, "grid": grid_n, "moduli_steps": moduli_steps,
              "family_grid": family_grid}
    out = _header("check", config)
    labels = labels or catalog_labels()
    rows: list[dict] = []
    for lbl in labels:
        entry = catalog_get(lbl)
        rows.extend(_check_chart(entry, grid_n, moduli_steps, family_grid))
    out["rows"] = _clean(rows)
    out["passed"] = bool(all(r["passed"] for r in rows))
    return out


def _row(name, chart, value, threshold, comparator="<"):
    ok = value < threshold if comparator == "<" else value > threshold
    return {"name": name, "chart": chart, "value": value,
            "threshold": threshold, "comparator": comparator, "passed": bool(ok)}


def _check_chart(entry: CatalogEntry, grid_n: int, moduli_steps: int, family_grid: int) -> list[dict]:
    chart = entry.chart
    exp = entry.expected
    lbl = entry.label
    rows = []
    grid = GridSpec(grid_n, grid_n)

    if not exp["minimal"]:
        try:
            isotropy_report(chart, grid)
            rows.append(_row("nonminimal-rejected", lbl, 0.0, 0.5, ">"))
        except NonMinimalChartError as exc:
            rows.append(_row("nonminimal-rejected(trace)", lbl, exc.trace_norm, 1e-3, ">"))
        tak = [takahashi_residual(chart, GridSpec(n, n)).residual_max for n in (grid_n, 2 * grid_n)]
        rows.append(_row("takahashi-off-minimal-floor", lbl, min(tak), 1e-2, ">"))
        return rows

    rep = isotropy_report(chart, grid)
    s = rep.summary()
    rows.append(_row("minimality-residual", lbl, s["minimality_residual_max"], 1e-10))
    rows.append(_row("ranks-match", lbl,
                     float(np.sum(np.abs(np.array(s["rank_pattern"]) - np.array(exp["ranks"])))),
                     0.5))
    if exp["isotropic"]:
        rows.append(_row("isotropy-max-dev", lbl, s["max_dev"], 1e-8))
    else:
        rows.append(_row("anisotropy-floor", lbl, s["max_dev"], 0.1, ">"))
    if exp["substantial"]:
        rows.append(_row("substantial", lbl, 0.0 if s["substantial_everywhere"] else 1.0, 0.5))

    if exp.get("l0_points"):
        expected_cells = len(exp["l0_points"])
        cells = s["l0_cells"]
        isolated = all(
            sum(abs(a - b) for a, b in zip(c1, c2)) > 2
            for i, c1 in enumerate(cells) for c2 in cells[i + 1:]
        )
        rows.append(_row("l0-isolated-cells", lbl,
                         abs(len(cells) - expected_cells) + (0.0 if isolated else 1.0), 0.5))

    if exp["m"] >= 2:
        rng = np.random.default_rng(5)
        (u0, u1), (v0, v1) = chart.domain
        uu = u0 + (u1 - u0) * (0.1 + 0.8 * rng.random(20))
        vv = v0 + (v1 - v0) * (0.1 + 0.8 * rng.random(20))
        rows.append(_row("alpha3-two-routes", lbl, third_form_crosscheck(chart, uu, vv), 1e-6))

    mode = exp.get("family_mode")
    if mode:
        res0 = integrate_family(chart, GridSpec(family_grid, family_grid), FamilyParams(0.0),
                                substeps=2, mode=mode)
        gridf = GridSpec(family_grid, family_grid)
        base = SampledImmersion.from_chart(chart, gridf)
        c0 = congruence_test(base, SampledImmersion(base.u, base.v, res0.points, chart.ambient))
        rows.append(_row("family-theta0-reconstruction", lbl, c0.residual, 1e-6))

        theta = pi / 3 if lbl != "equilateral-s5" else pi / 4
        res = integrate_family(chart, gridf, FamilyParams(theta), substeps=2, mode=mode)
        ver = verify_sampled_member(chart, gridf, res.points, theta,
                                    check_isotropy=exp["isotropic"])
        rows.append(_row("family-isometry", lbl, ver.metric_deviation, 1e-5))
        rows.append(_row("family-minimality", lbl, ver.mean_curvature_residual, 1e-5))
        if exp["isotropic"]:
            rows.append(_row("family-isotropy", lbl, ver.isotropy_max_dev, 1e-5))
        c = congruence_test(base, SampledImmersion(base.u, base.v, res.points, chart.ambient))
        even_codim = (chart.ambient.ambient_dim % 2 == 0)
        if exp["isotropic"] and exp["substantial"]:
            if even_codim:
                rows.append(_row("fact2-even-codim-congruent", lbl, c.residual, 1e-5))
            else:
                rows.append(_row("fact3-odd-codim-noncongruent", lbl, c.residual, 1e-2, ">"))

    if chart.ambient.is_sphere and exp["minimal"]:
        tak = [takahashi_residual(chart, GridSpec(n, n)).residual_max
               for n in (grid_n, 2 * grid_n - 1)]
        ratio = tak[0] / max(tak[1], 1e-300)
        rows.append(_row("takahashi-second-order(ratio)", lbl, ratio, 3.0, ">"))

    if (chart.ambient.is_sphere and chart.ambient.ambient_dim % 2 == 1
            and exp["isotropic"] and exp["substantial"]):
        prep = polar_surface(chart, grid)
        rows.append(_row("fact6-polar-conformal", lbl, prep.max_conformality_dev, 1e-6))
        iso_polar = isotropy_report(prep.chart, grid)
        rows.append(_row("fact6-polar-isotropic", lbl, iso_polar.max_dev, 1e-6))

    if chart.doubly_periodic and exp["minimal"] and exp.get("family_mode"):
        scan = moduli_scan(chart, steps=moduli_steps, mode=exp["family_mode"])
        has_zero = any(abs(t) < 1e-6 for t in scan.detected)
        rows.append(_row("moduli-contains-theta0", lbl, 0.0 if has_zero else 1.0, 0.5))
        rows.append(_row("moduli-classification-finite", lbl,
                         0.0 if scan.classification == "finite" else 1.0, 0.5))

    if lbl == "equilateral-s5":
        conv = connection_convergence(chart, GridSpec(16, 16))
        worst = max(max(r.values()) for r in conv["identity_residuals"])
        rows.append(_row("connection-identities", lbl, worst, 1e-6))
        rows.append(_row("connection-fd-second-order(ratio)", lbl,
                         conv["convergence_ratio"], 3.0, ">"))
    return rows


# -- height independence (used by acceptance and check) ----------------------


def heights_sigma_min(chart: SurfaceChart, entry, theta: float, grid_n: int,
                      substeps: int = 2) -> float:
    grid = GridSpec(grid_n, grid_n)
    mode = _family_mode(chart, entry)
    base = SampledImmersion.from_chart(chart, grid)
    res = integrate_family(chart, grid, FamilyParams(theta), substeps=substeps, mode=mode)
    other = SampledImmersion(base.u, base.v, res.points, chart.ambient)
    return height_independence([base, other])
