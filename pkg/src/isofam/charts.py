"""Surface charts, ambient descriptors, first fundamental form and frames."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ChartValidationError, DegenerateMetricError, GaugeError
from .formulas import Expr, expr_from_dict
from .jets import Jet2

SPHERE_NORM_TOL = 1e-12


@dataclass(frozen=True)
class AmbientSpace:
    """Round unit sphere S^N in R^{N+1}, or Euclidean R^N."""

    kind: str
    ambient_dim: int

    def __post_init__(self):
        if self.kind not in ("sphere", "euclidean"):
            raise ChartValidationError(
                f"ambient kind {self.kind!r} not supported (sphere of curvature one or euclidean)"
            )
        if self.ambient_dim < 3:
            raise ChartValidationError("ambient dimension must be at least 3")

    @property
    def is_sphere(self) -> bool:
        return self.kind == "sphere"

    @property
    def embedding_dim(self) -> int:
        return self.ambient_dim + 1 if self.is_sphere else self.ambient_dim

    @property
    def max_normal_order(self) -> int:
        """m = floor((N-1)/2): number of higher normal bundles of a substantial surface."""
        return (self.ambient_dim - 1) // 2

    @property
    def generic_ranks(self) -> tuple[int, ...]:
        """Generic normal-bundle ranks (2, ..., 2) with a final 1 when N is odd."""
        m = self.max_normal_order
        ranks = [2] * m
        if self.ambient_dim % 2 == 1:
            ranks[-1] = 1
        return tuple(ranks)


class ExprFormula:
    """Chart coordinates given by expression trees."""

    def __init__(self, coords: list[Expr]):
        self.coords = list(coords)

    def eval_jets(self, u: np.ndarray, v: np.ndarray, order: int) -> Jet2:
        ju = Jet2.variable(np.asarray(u, dtype=float), "u", order)
        jv = Jet2.variable(np.asarray(v, dtype=float), "v", order)
        return Jet2.stack([c.jet(ju, jv) for c in self.coords], axis=-1)

    def to_dict(self) -> list[dict]:
        return [c.to_dict() for c in self.coords]


@dataclass
class SurfaceChart:
    """A parametrized patch with exact jet access and ambient descriptor."""

    label: str
    ambient: AmbientSpace
    formula: object  # anything with eval_jets(u, v, order) -> Jet2 (..., D)
    domain: tuple[tuple[float, float], tuple[float, float]]
    periods: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        (u0, u1), (v0, v1) = self.domain
        if not (u1 > u0 and v1 > v0):
            raise ChartValidationError("chart domain must be a nondegenerate rectangle")
        self.periods = tuple(tuple(float(x) for x in p) for p in (self.periods or ()))

    @property
    def doubly_periodic(self) -> bool:
        return len(self.periods) == 2

    def contains(self, u, v, slack: float = 1e-9) -> np.ndarray:
        (u0, u1), (v0, v1) = self.domain
        su = slack * (u1 - u0)
        sv = slack * (v1 - v0)
        return (u >= u0 - su) & (u <= u1 + su) & (v >= v0 - sv) & (v <= v1 + sv)


def jet_eval(chart: SurfaceChart, point, order: int, check_domain: bool = True) -> Jet2:
    """Jets of the embedding coordinates about ``point`` (batched).

    For sphere charts the degree-0 part is verified to have unit norm.
    """
    if order < 1:
        raise ChartValidationError("jet order must be >= 1")
    u = np.asarray(point[0], dtype=float)
    v = np.asarray(point[1], dtype=float)
    if check_domain and not np.all(chart.contains(u, v)):
        raise ChartValidationError(f"point outside chart domain {chart.domain}")
    jets = chart.formula.eval_jets(u, v, order)
    if chart.ambient.is_sphere:
        norms = np.linalg.norm(jets.value, axis=-1)
        err = np.max(np.abs(norms - 1.0))
        if err > SPHERE_NORM_TOL * 100:
            raise ChartValidationError(
                f"sphere chart {chart.label!r} leaves the unit sphere by {err:.2e}"
            )
    return jets


def first_fundamental_form(chart: SurfaceChart, point) -> np.ndarray:
    """Induced metric [[<x_u,x_u>, <x_u,x_v>], [., <x_v,x_v>]] (batched)."""
    jets = jet_eval(chart, point, 1)
    xu = jets.partial(1, 0)
    xv = jets.partial(0, 1)
    g = np.empty(xu.shape[:-1] + (2, 2))
    g[..., 0, 0] = np.sum(xu * xu, axis=-1)
    g[..., 0, 1] = g[..., 1, 0] = np.sum(xu * xv, axis=-1)
    g[..., 1, 1] = np.sum(xv * xv, axis=-1)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if np.any(det <= 0) or np.any(g[..., 0, 0] <= 0):
        raise DegenerateMetricError(f"metric degenerate on chart {chart.label!r}")
    return g


def frame_from_partials(xu: np.ndarray, xv: np.ndarray):
    """Gram-Schmidt tangent frame from coordinate derivatives.

    Returns (e1, e2, C, g) where columns of C express e_i in the
    coordinate basis: e_i = C[0, i] d_u + C[1, i] d_v.
    """
    g = np.empty(xu.shape[:-1] + (2, 2))
    g[..., 0, 0] = np.sum(xu * xu, axis=-1)
    g[..., 0, 1] = g[..., 1, 0] = np.sum(xu * xv, axis=-1)
    g[..., 1, 1] = np.sum(xv * xv, axis=-1)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if np.any(det <= 0):
        raise DegenerateMetricError("non-immersion point (det g <= 0)")
    n1 = np.sqrt(g[..., 0, 0])
    e1 = xu / n1[..., None]
    w = xv - np.sum(xv * e1, axis=-1, keepdims=True) * e1
    n2 = np.linalg.norm(w, axis=-1)
    if np.any(n2 == 0):
        raise DegenerateMetricError("tangent directions collinear")
    e2 = w / n2[..., None]
    C = np.zeros(xu.shape[:-1] + (2, 2))
    C[..., 0, 0] = 1.0 / n1
    C[..., 0, 1] = -g[..., 0, 1] / (g[..., 0, 0] * n2)
    C[..., 1, 1] = 1.0 / n2
    return e1, e2, C, g


def complex_structure_matrix(g: np.ndarray) -> np.ndarray:
    """J on the coordinate basis: rotation by +pi/2 for the (u, v) orientation."""
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    s = np.sqrt(det)
    J = np.empty_like(g)
    J[..., 0, 0] = -g[..., 0, 1] / s
    J[..., 0, 1] = -g[..., 1, 1] / s
    J[..., 1, 0] = g[..., 0, 0] / s
    J[..., 1, 1] = g[..., 0, 1] / s
    return J


@dataclass
class TangentData:
    point: tuple
    metric: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    coord_coeffs: np.ndarray  # e_i = C[0,i] d_u + C[1,i] d_v
    j_matrix: np.ndarray  # J on the coordinate basis

    @property
    def E(self) -> np.ndarray:
        return self.e1 - 1j * self.e2

    def j_apply(self, w: np.ndarray) -> np.ndarray:
        """Apply J to an ambient tangent vector (given as e1/e2 combination)."""
        a = np.sum(w * self.e1, axis=-1, keepdims=True)
        b = np.sum(w * self.e2, axis=-1, keepdims=True)
        return a * self.e2 - b * self.e1


def tangent_data(chart: SurfaceChart, point, gauge: TangentData | None = None) -> TangentData:
    """Oriented orthonormal tangent frame, J and E at ``point`` (batched).

    Gram-Schmidt on (d_u, d_v) is deterministic, so the frame varies
    continuously wherever the chart is an immersion; when a ``gauge``
    frame from a neighboring point is supplied the overlap is checked.
    """
    jets = jet_eval(chart, point, 1)
    xu = jets.partial(1, 0)
    xv = jets.partial(0, 1)
    e1, e2, C, g = frame_from_partials(xu, xv)
    td = TangentData(point, g, e1, e2, C, complex_structure_matrix(g))
    if gauge is not None:
        if np.any(np.sum(td.e1 * gauge.e1, axis=-1) <= 0) or np.any(
            np.sum(td.e2 * gauge.e2, axis=-1) <= 0
        ):
            raise GaugeError("tangent frame flipped relative to the supplied gauge")
    return td


def hodge_star(form: np.ndarray) -> np.ndarray:
    """Hodge operator on 1-forms given on (e1, e2): (*w)(X) = -w(JX)."""
    form = np.asarray(form)
    return np.stack([-form[..., 1], form[..., 0]], axis=-1)


@dataclass(frozen=True)
class GridSpec:
    nu: int
    nv: int

    def __post_init__(self):
        if self.nu < 8 or self.nv < 8:
            raise ChartValidationError("grid resolution must be at least 8")

    def nodes(self, chart: SurfaceChart):
        (u0, u1), (v0, v1) = chart.domain
        u = np.linspace(u0, u1, self.nu)
        v = np.linspace(v0, v1, self.nv)
        return np.meshgrid(u, v, indexing="ij")

    def steps(self, chart: SurfaceChart) -> tuple[float, float]:
        (u0, u1), (v0, v1) = chart.domain
        return (u1 - u0) / (self.nu - 1), (v1 - v0) / (self.nv - 1)


def validate_periods(chart: SurfaceChart, order: int = 3, samples: int = 5, tol: float = 1e-10) -> float:
    """Max mismatch of the jet between p and p + sigma over each generator."""
    if not chart.periods:
        return 0.0
    rng = np.random.default_rng(7)
    (u0, u1), (v0, v1) = chart.domain
    u = u0 + (u1 - u0) * rng.random(samples)
    v = v0 + (v1 - v0) * rng.random(samples)
    worst = 0.0
    base = jet_eval(chart, (u, v), order, check_domain=False)
    for du, dv in chart.periods:
        shifted = jet_eval(chart, (u + du, v + dv), order, check_domain=False)
        worst = max(worst, float(np.max(np.abs(base.c - shifted.c))))
    if worst > tol:
        raise ChartValidationError(
            f"declared periods of chart {chart.label!r} fail by {worst:.2e}"
        )
    return worst


# -- chart definition files -------------------------------------------------


def chart_to_dict(chart: SurfaceChart) -> dict:
    if not isinstance(chart.formula, ExprFormula):
        raise ChartValidationError("only closed-form charts serialize to definition files")
    return {
        "label": chart.label,
        "ambient": {"kind": chart.ambient.kind, "dim": chart.ambient.ambient_dim},
        "domain": [list(chart.domain[0]), list(chart.domain[1])],
        "periods": [list(p) for p in chart.periods] or None,
        "coords": chart.formula.to_dict(),
    }


def chart_from_dict(d: dict) -> SurfaceChart:
    try:
        ambient = AmbientSpace(d["ambient"]["kind"], int(d["ambient"]["dim"]))
        coords = [expr_from_dict(c) for c in d["coords"]]
        if len(coords) != ambient.embedding_dim:
            raise ChartValidationError(
                f"chart has {len(coords)} coordinates, ambient needs {ambient.embedding_dim}"
            )
        domain = (tuple(d["domain"][0]), tuple(d["domain"][1]))
        periods = tuple(tuple(p) for p in (d.get("periods") or ()))
        return SurfaceChart(
            label=d.get("label", "unnamed"),
            ambient=ambient,
            formula=ExprFormula(coords),
            domain=domain,
            periods=periods,
        )
    except (KeyError, TypeError) as exc:
        raise ChartValidationError(f"malformed chart definition: {exc}") from exc


def load_chart_file(path: str) -> SurfaceChart:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ChartValidationError(f"cannot read chart file {path}: {exc}") from exc
    return chart_from_dict(data)
