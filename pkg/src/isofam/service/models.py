"""Pydantic request/response models of the analysis service."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class ChartSource(BaseModel):
    """A catalog label or an inline chart definition (exactly one)."""

    label: str | None = None
    definition: dict | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.label is None) == (self.definition is None):
            raise ValueError("provide exactly one of label, definition")
        return self


class AnalyzeRequest(BaseModel):
    chart: ChartSource
    grid: int = Field(default=64, ge=8)
    rank_tol: float = Field(default=1e-7, gt=0)
    circ_tol: float = Field(default=1e-6, gt=0)


class AnalyzeResponse(BaseModel):
    schema_version: int
    version: str
    command: str
    config: dict
    status: str
    summary: dict | None
    diagnostic: dict | None = None
    csv: str


class FamilyRequest(BaseModel):
    chart: ChartSource
    grid: int = Field(default=64, ge=8)
    thetas: list[float] = Field(default_factory=lambda: [0.0])
    substeps: int = Field(default=2, ge=1, le=16)
    include_points: bool = False
    jobs: int = Field(default=1, ge=1, le=64)


class FamilyResponse(BaseModel):
    schema_version: int
    version: str
    command: str
    config: dict
    mode: str
    members: list[dict]
    points_csv: dict[str, str] | None


class ModuliRequest(BaseModel):
    chart: ChartSource
    steps: int = Field(default=360, ge=8)
    close_tol: float = Field(default=1e-6, gt=0)
    path_steps: int = Field(default=256, ge=16)
    congruence_classes: bool = True
    class_grid: int = Field(default=32, ge=8)


class ModuliResponse(BaseModel):
    schema_version: int
    version: str
    command: str
    config: dict
    report: dict


class PolarRequest(BaseModel):
    chart: ChartSource
    grid: int = Field(default=64, ge=8)
    thetas: list[float] = Field(default_factory=list)
    substeps: int = Field(default=2, ge=1, le=16)


class PolarResponse(BaseModel):
    schema_version: int
    version: str
    command: str
    config: dict
    summary: dict
    family_factors: list[dict]
    csv: str


class CongruenceRequest(BaseModel):
    chart_a: ChartSource
    chart_b: ChartSource | None = None
    theta: float | None = None
    grid: int = Field(default=64, ge=8)
    substeps: int = Field(default=2, ge=1, le=16)

    @model_validator(mode="after")
    def _one_target(self):
        if (self.chart_b is None) == (self.theta is None):
            raise ValueError("provide exactly one of chart_b, theta")
        return self


class CongruenceResponse(BaseModel):
    schema_version: int
    version: str
    command: str
    config: dict
    result: dict


class CheckRequest(BaseModel):
    charts: list[str] | None = None
    grid: int = Field(default=32, ge=8)
    moduli_steps: int = Field(default=120, ge=8)
    family_grid: int = Field(default=48, ge=8)


class CheckResponse(BaseModel):
    schema_version: int
    version: str
    command: str
    config: dict
    rows: list[dict]
    passed: bool


class CatalogResponse(BaseModel):
    schema_version: int
    version: str
    command: str
    config: dict
    entries: list[dict]
