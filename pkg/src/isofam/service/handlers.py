"""Service handlers: one plain function per endpoint.

The FastAPI routes and the local CLI dispatch both call these, so the
CLI works with or without a running server.
"""

from __future__ import annotations

from .. import api
from .models import (
    AnalyzeRequest,
    AnalyzeResponse,
    CatalogResponse,
    CheckRequest,
    CheckResponse,
    CongruenceRequest,
    CongruenceResponse,
    FamilyRequest,
    FamilyResponse,
    ModuliRequest,
    ModuliResponse,
    PolarRequest,
    PolarResponse,
)


def _chart(source) -> tuple:
    return api.resolve_chart(label=source.label, definition=source.definition)


def handle_analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    chart, _ = _chart(req.chart)
    return AnalyzeResponse(**api.analyze_report(chart, req.grid, req.rank_tol, req.circ_tol))


def handle_family(req: FamilyRequest) -> FamilyResponse:
    chart, entry = _chart(req.chart)
    return FamilyResponse(
        **api.family_report(chart, entry, req.grid, req.thetas, req.substeps,
                            req.include_points, req.jobs)
    )


def handle_moduli(req: ModuliRequest) -> ModuliResponse:
    chart, entry = _chart(req.chart)
    return ModuliResponse(
        **api.moduli_report(chart, entry, req.steps, req.close_tol, req.path_steps,
                            req.congruence_classes, req.class_grid)
    )


def handle_polar(req: PolarRequest) -> PolarResponse:
    chart, entry = _chart(req.chart)
    return PolarResponse(**api.polar_report(chart, entry, req.grid, req.thetas, req.substeps))


def handle_congruence(req: CongruenceRequest) -> CongruenceResponse:
    chart_a, entry_a = _chart(req.chart_a)
    chart_b = _chart(req.chart_b)[0] if req.chart_b is not None else None
    return CongruenceResponse(
        **api.congruence_report(chart_a, entry_a, req.grid, chart_b, req.theta, req.substeps)
    )


def handle_check(req: CheckRequest) -> CheckResponse:
    return CheckResponse(
        **api.check_report(req.charts, req.grid, req.moduli_steps, req.family_grid)
    )


def handle_catalog(label: str | None = None) -> CatalogResponse:
    return CatalogResponse(**api.catalog_report(label))
