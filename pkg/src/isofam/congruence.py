"""Congruence by orthogonal Procrustes, height independence, Takahashi check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import GridSpec, SurfaceChart, jet_eval
from .errors import ChartValidationError
from .jets import Jet2, jdot, jinv

CONGRUENCE_VERDICT_TOL = 1e-6


@dataclass
class SampledImmersion:
    """Ambient samples of an immersion over a shared parameter grid."""

    u: np.ndarray
    v: np.ndarray
    points: np.ndarray  # (..., D)
    ambient: object

    @classmethod
    def from_chart(cls, chart: SurfaceChart, grid: GridSpec) -> "SampledImmersion":
        U, V = grid.nodes(chart)
        pts = jet_eval(chart, (U, V), 1, check_domain=False).value
        return cls(U, V, pts, chart.ambient)

    def flat(self) -> np.ndarray:
        return self.points.reshape(-1, self.points.shape[-1])


@dataclass
class CongruenceResult:
    matrix: np.ndarray  # orthogonal Q of the embedding space
    translation: np.ndarray  # zero for sphere ambients
    residual: float  # rms of |Q a + t - b|
    scale: float
    congruent: bool
    verdict_tol: float

    def to_dict(self) -> dict:
        return {
            "residual_rms": self.residual,
            "scale": self.scale,
            "congruent": bool(self.congruent),
            "verdict_tol": self.verdict_tol,
            "isometry_matrix": self.matrix.tolist(),
            "translation": self.translation.tolist(),
            "det": float(np.linalg.det(self.matrix)),
        }


def _check_same_grid(A: SampledImmersion, B: SampledImmersion):
    if A.points.shape != B.points.shape or not (
        np.allclose(A.u, B.u, atol=1e-12) and np.allclose(A.v, B.v, atol=1e-12)
    ):
        raise ChartValidationError("congruence test needs identical parameter grids")
    if A.ambient.kind != B.ambient.kind or A.ambient.embedding_dim != B.ambient.embedding_dim:
        raise ChartValidationError("congruence test needs matching ambient spaces")


def congruence_test(
    A: SampledImmersion, B: SampledImmersion, verdict_tol: float = CONGRUENCE_VERDICT_TOL
) -> CongruenceResult:
    """Best ambient isometry Q (plus translation for Euclidean ambients).

    Minimizes |Q a - b| in least squares over the full orthogonal group
    (reflections allowed) via SVD of the cross-covariance; sphere
    isometries fix the origin, so no translation there.
    """
    _check_same_grid(A, B)
    a = A.flat()
    b = B.flat()
    if A.ambient.is_sphere:
        mu_a = np.zeros(a.shape[-1])
        mu_b = np.zeros(b.shape[-1])
    else:
        mu_a = a.mean(axis=0)
        mu_b = b.mean(axis=0)
    a0 = a - mu_a
    b0 = b - mu_b
    H = a0.T @ b0
    U, _, Vt = np.linalg.svd(H)
    Q = (U @ Vt).T  # maps a to b
    t = mu_b - Q @ mu_a
    resid = float(np.sqrt(np.mean(np.sum((a @ Q.T + t - b) ** 2, axis=-1))))
    scale = 1.0 if A.ambient.is_sphere else float(np.sqrt(np.mean(np.sum(a0**2, axis=-1))))
    scale = max(scale, 1e-300)
    return CongruenceResult(
        matrix=Q,
        translation=t,
        residual=resid,
        scale=scale,
        congruent=resid < verdict_tol * scale,
        verdict_tol=verdict_tol,
    )


def height_independence(surfaces: list[SampledImmersion]) -> float:
    """Smallest singular value of the stacked height-function matrix.

    Columns are all ambient coordinate functions of all surfaces sampled
    over the common grid, normalized by sqrt(#nodes); a value bounded
    away from zero certifies that no nontrivial relation
    sum_j <g_j, v_j> = 0 holds on the sample.
    """
    if len(surfaces) < 1:
        raise ChartValidationError("need at least one surface")
    first = surfaces[0]
    for s in surfaces[1:]:
        _check_same_grid(first, s)
    if not first.ambient.is_sphere:
        raise ChartValidationError("height independence is a sphere-ambient test")
    cols = np.concatenate([s.flat() for s in surfaces], axis=1)
    n, m = cols.shape
    if n < m:
        raise ChartValidationError(f"underdetermined: {n} grid nodes for {m} height functions")
    return float(np.linalg.svd(cols / np.sqrt(n), compute_uv=False)[-1])


# -- Laplace-Beltrami eigenvalue check ---------------------------------------


def _metric_inverse_jets(chart: SurfaceChart, U, V):
    """Exact g^{ij} and the first-order coefficients b^i of the Laplacian.

    Delta h = g^{ij} d_i d_j h + b^i d_i h with
    b^i = (1/sqrt g) d_j(sqrt g g^{ij}); the metric enters through exact
    jets so only the h-derivatives are discretized.
    """
    jets = jet_eval(chart, (U, V), 2, check_domain=False)
    xu = jets.partial_jet(1, 0, order=1)
    xv = jets.partial_jet(0, 1, order=1)
    g00, g01, g11 = jdot(xu, xu), jdot(xu, xv), jdot(xv, xv)
    det = g00 * g11 - g01 * g01
    inv_det = jinv(det)
    gi = {
        (0, 0): g11 * inv_det,
        (0, 1): g01 * inv_det * (-1.0),
        (1, 1): g00 * inv_det,
    }
    gi[(1, 0)] = gi[(0, 1)]
    from .jets import jsqrt

    sq = jsqrt(det)
    inv_sq = jinv(sq)
    b = []
    for i in range(2):
        acc = None
        for j in range(2):
            term = sq * gi[(i, j)]
            dterm = term.partial(1, 0) if j == 0 else term.partial(0, 1)
            acc = dterm if acc is None else acc + dterm
        b.append(inv_sq.value * acc)
    ginv_vals = np.stack(
        [np.stack([gi[(0, 0)].value, gi[(0, 1)].value], -1),
         np.stack([gi[(1, 0)].value, gi[(1, 1)].value], -1)],
        -2,
    )
    return ginv_vals, np.stack(b, -1)


@dataclass
class TakahashiReport:
    grid: GridSpec
    residual_max: float
    residual_field: np.ndarray
    margin: int


def takahashi_residual(chart: SurfaceChart, grid: GridSpec, acc: int = 2) -> TakahashiReport:
    """Max over the grid interior of |Delta h + 2 h| per coordinate.

    Minimal surfaces in the unit sphere have coordinate functions that
    are eigenfunctions of the Laplace operator with eigenvalue 2; the
    residual converges at second order in the grid step, and stays
    bounded away from zero off minimal charts.
    """
    if not chart.ambient.is_sphere:
        raise ChartValidationError("the eigenvalue-2 identity lives on sphere ambients")
    U, V = grid.nodes(chart)
    pts = jet_eval(chart, (U, V), 1, check_domain=False).value
    hu, hv = grid.steps(chart)
    from .fdtools import sample_partials

    partials, margin = sample_partials(pts, hu, hv, 2, acc=acc)
    sl = (slice(margin, -margin), slice(margin, -margin))
    ginv, b = _metric_inverse_jets(chart, U[sl], V[sl])
    lap = (
        ginv[..., 0, 0, None] * partials[(2, 0)]
        + 2.0 * ginv[..., 0, 1, None] * partials[(1, 1)]
        + ginv[..., 1, 1, None] * partials[(0, 2)]
        + b[..., 0, None] * partials[(1, 0)]
        + b[..., 1, None] * partials[(0, 1)]
    )
    resid = lap + 2.0 * partials[(0, 0)]
    field = np.max(np.abs(resid), axis=-1)
    return TakahashiReport(grid, float(field.max()), field, margin)
