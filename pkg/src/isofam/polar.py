"""Polar surface: the unit field spanning the last normal bundle.

For an isotropic substantial surface in an odd-dimensional sphere the
last normal bundle is a line bundle; its unit section is itself an
isotropic immersion with metric conformal to the base.  The section is
realized as the generalized cross product of a spanning set of the
penultimate osculating space, built in jet arithmetic, so the polar is
a first-class chart with exact derivatives of every order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import GridSpec, SurfaceChart
from .errors import ChartValidationError, NumericalError
from .flags import adapted_frame_values, osculating_flag
from .jets import Jet2, jcross_rows, jnormalize


class PolarFormula:
    """Jet-evaluable formula of the polar map of an isotropic chart.

    The spanning rows are the position, the first derivatives and two
    pivot partials per intermediate normal bundle; the cross product is
    orthogonal to their span regardless of conditioning, and each row is
    rescaled by its norm at the base point (a constant absorbed by the
    final normalization).  The global sign matches the positively
    oriented adapted frame.
    """

    def __init__(self, base: SurfaceChart, probe=None):
        amb = base.ambient
        if not amb.is_sphere or amb.ambient_dim % 2 == 0:
            raise ChartValidationError("polar surface needs a sphere ambient of odd dimension")
        self.base = base
        self.n = amb.max_normal_order
        if probe is None:
            (u0, u1), (v0, v1) = base.domain
            probe = (np.array([0.5 * (u0 + u1)]), np.array([0.5 * (v0 + v1)]))
        flag = osculating_flag(base, probe)
        if not np.all(flag.regular) or not np.all(flag.substantial):
            raise NumericalError("polar construction needs a regular substantial probe point")
        self.pivots = {}
        for lev in flag.levels[:-1]:
            self.pivots[lev.s] = _best_pair(lev.alpha_coord[0])
        # orient against the adapted frame's cross-product convention
        frame, normals, _ = adapted_frame_values(flag)
        raw = self._raw_cross_values(probe)
        self.sign = 1.0 if float(np.sum(raw[0] * normals[-1][0])) >= 0 else -1.0

    def _raw_cross_values(self, point) -> np.ndarray:
        jets = self.eval_jets(point[0], point[1], 1, _skip_sign=True)
        return jets.value

    def eval_jets(self, u, v, order: int, _skip_sign: bool = False) -> Jet2:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        base_jets = self.base.formula.eval_jets(u, v, order + self.n)
        rows_jets = [base_jets.partial_jet(0, 0, order), base_jets.partial_jet(1, 0, order),
                     base_jets.partial_jet(0, 1, order)]
        for s in sorted(self.pivots):
            i, j = self.pivots[s]
            rows_jets.append(base_jets.partial_jet(s - i, i, order))
            rows_jets.append(base_jets.partial_jet(s - j, j, order))
        D = self.base.ambient.embedding_dim
        rows = []
        for rj in rows_jets:
            scale = np.linalg.norm(rj.value, axis=-1)
            if np.any(scale < 1e-12):
                raise NumericalError(
                    "polar spanning set degenerates (non-regular point in the evaluation set)"
                )
            rj = rj * (1.0 / scale)[..., None]
            rows.append([rj.component(k) for k in range(D)])
        cross = Jet2.stack(jcross_rows(rows), axis=-1)
        out = jnormalize(cross)
        if not _skip_sign and self.sign < 0:
            out = -out
        return out


def _best_pair(vecs: np.ndarray) -> tuple[int, int]:
    """Pivot pair with the best-conditioned span (largest sigma_min)."""
    best, best_score = (0, 1), -1.0
    for i in range(vecs.shape[0]):
        for j in range(i + 1, vecs.shape[0]):
            s = np.linalg.svd(np.stack([vecs[i], vecs[j]]), compute_uv=False)
            if s[-1] > best_score:
                best, best_score = (i, j), float(s[-1])
    return best


def polar_chart(base: SurfaceChart, probe=None) -> SurfaceChart:
    return SurfaceChart(
        label=base.label + "-polar",
        ambient=base.ambient,
        formula=PolarFormula(base, probe),
        domain=base.domain,
        periods=base.periods,
    )


@dataclass
class PolarReport:
    chart: SurfaceChart  # the polar as a jet-evaluable chart
    points: np.ndarray  # g* samples
    conformal_factor: np.ndarray  # (nu, nv)
    conformality_dev: np.ndarray  # (nu, nv)
    excluded: np.ndarray  # bool mask of suspected non-regular base cells
    max_conformality_dev: float


def conformality_from_metrics(metric_polar: np.ndarray, coeffs_base: np.ndarray):
    """Conformal factor and deviation of g* in the base orthonormal frame.

    M = C^T G* C is the polar metric on (e1, e2); conformality means
    M = lambda I, so the deviation is |M - (tr M / 2) I| / (tr M / 2).
    """
    M = np.einsum("...ki,...kl,...lj->...ij", coeffs_base, metric_polar, coeffs_base)
    lam = 0.5 * (M[..., 0, 0] + M[..., 1, 1])
    dev = np.linalg.norm(M - lam[..., None, None] * np.eye(2), axis=(-2, -1)) / np.abs(lam)
    return lam, dev


def polar_surface(base: SurfaceChart, grid: GridSpec, probe=None) -> PolarReport:
    """Sample the polar surface and its conformal-factor field over a grid."""
    star = polar_chart(base, probe)
    U, V = grid.nodes(base)
    base_flag = osculating_flag(base, (U.ravel(), V.ravel()))
    excluded = (~base_flag.regular).reshape(U.shape)
    jets = star.formula.eval_jets(U, V, 1)
    pts = jets.value
    xu = jets.partial(1, 0)
    xv = jets.partial(0, 1)
    Gstar = np.empty(U.shape + (2, 2))
    Gstar[..., 0, 0] = np.sum(xu * xu, axis=-1)
    Gstar[..., 0, 1] = Gstar[..., 1, 0] = np.sum(xu * xv, axis=-1)
    Gstar[..., 1, 1] = np.sum(xv * xv, axis=-1)
    C = base_flag.coord_coeffs.reshape(U.shape + (2, 2))
    lam, dev = conformality_from_metrics(Gstar, C)
    ok = ~excluded
    max_dev = float(np.max(dev[ok])) if ok.any() else float("nan")
    return PolarReport(
        chart=star,
        points=pts,
        conformal_factor=lam,
        conformality_dev=dev,
        excluded=excluded,
        max_conformality_dev=max_dev,
    )
