"""FastAPI application wrapping the analysis package."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ChartValidationError, NumericalError
from . import handlers
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

app = FastAPI(
    title="isofam",
    version=__version__,
    description="Higher fundamental forms, isotropy certificates, associated "
    "families, monodromy/moduli scans and congruence tests for surface charts.",
)


@app.exception_handler(ChartValidationError)
async def _validation_error(request: Request, exc: ChartValidationError):
    return JSONResponse(status_code=400, content={"error": "validation", "detail": str(exc)})


@app.exception_handler(NumericalError)
async def _numerical_error(request: Request, exc: NumericalError):
    return JSONResponse(status_code=422, content={"error": "numerical", "detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    return handlers.handle_analyze(req)


@app.post("/family", response_model=FamilyResponse)
def family(req: FamilyRequest) -> FamilyResponse:
    return handlers.handle_family(req)


@app.post("/moduli", response_model=ModuliResponse)
def moduli(req: ModuliRequest) -> ModuliResponse:
    return handlers.handle_moduli(req)


@app.post("/polar", response_model=PolarResponse)
def polar(req: PolarRequest) -> PolarResponse:
    return handlers.handle_polar(req)


@app.post("/congruence", response_model=CongruenceResponse)
def congruence(req: CongruenceRequest) -> CongruenceResponse:
    return handlers.handle_congruence(req)


@app.post("/check", response_model=CheckResponse)
def check(req: CheckRequest) -> CheckResponse:
    return handlers.handle_check(req)


@app.get("/catalog", response_model=CatalogResponse)
def catalog() -> CatalogResponse:
    return handlers.handle_catalog()


@app.get("/catalog/{label}", response_model=CatalogResponse)
def catalog_entry(label: str) -> CatalogResponse:
    return handlers.handle_catalog(label)
