"""Independent checks of integrated (sampled-only) family members.

The integrator transports frames whose structure equations encode the
target metric and rotated second fundamental form by construction, so
verification must not reuse them: here every quantity is rebuilt from
the raw ambient samples by high-order centered differences, and the
osculating-flag machinery runs on those approximate jets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import GridSpec, SurfaceChart, jet_eval
from .fdtools import sample_partials
from .flags import _report_from_flag, flags_from_partials

FD_RANK_TOL = 1e-5


def connection_convergence(chart: SurfaceChart, grid: GridSpec, fd_step: float = 2e-3) -> dict:
    """Connection-identity residuals plus the FD error against the exact forms.

    The identity residuals on homogeneous charts cancel the truncation
    term and sit at round-off, so second-order convergence of the frame
    differentiation is demonstrated on the forms themselves, against the
    jet-differentiated (exact) tables.
    """
    from .family import FamilyParams, build_connection_tables
    from .flags import connection_forms, connection_identity_residuals, osculating_flag

    om_u, om_v = build_connection_tables(chart, grid, FamilyParams(0.0))
    U, V = grid.nodes(chart)
    C = osculating_flag(chart, (U, V)).coord_coeffs
    ex = []
    for i in range(2):
        om_ei = C[..., 0, i, None, None] * om_u + C[..., 1, i, None, None] * om_v
        start = 1 if chart.ambient.is_sphere else 0
        ex.append(np.swapaxes(om_ei[..., start:, start:], -1, -2))
    out = {"fd_steps": [fd_step, fd_step / 2], "identity_residuals": [], "fd_errors": []}
    for h in (fd_step, fd_step / 2):
        forms = connection_forms(chart, grid, fd_step=h)
        out["identity_residuals"].append(connection_identity_residuals(forms))
        err = max(
            float(np.max(np.abs(forms.omega[..., i, :, :] - ex[i]))) for i in range(2)
        )
        out["fd_errors"].append(err)
    out["convergence_ratio"] = out["fd_errors"][0] / max(out["fd_errors"][1], 1e-300)
    return out


@dataclass
class SampledMemberReport:
    theta: float
    margin: int
    metric_deviation: float  # vs the base chart metric (isometry)
    mean_curvature_residual: float  # |trace of alpha^2|
    isotropy_max_dev: float
    ranks: np.ndarray
    sphere_norm_error: float

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "metric_deviation": self.metric_deviation,
            "mean_curvature_residual": self.mean_curvature_residual,
            "isotropy_max_dev": self.isotropy_max_dev,
            "sphere_norm_error": self.sphere_norm_error,
        }


def verify_sampled_member(
    chart: SurfaceChart,
    grid: GridSpec,
    points: np.ndarray,
    theta: float,
    acc: int = 6,
    rank_tol: float = FD_RANK_TOL,
    check_isotropy: bool = True,
) -> SampledMemberReport:
    """Isometry, minimality and isotropy of g_theta samples on the grid interior."""
    hu, hv = grid.steps(chart)
    max_order = chart.ambient.max_normal_order + 1 if check_isotropy else 2
    partials, margin = sample_partials(points, hu, hv, max_order, acc=acc)
    inner = partials[(0, 0)].shape[:2]

    U, V = grid.nodes(chart)
    sl = (slice(margin, -margin), slice(margin, -margin))
    Ui, Vi = U[sl], V[sl]

    xu, xv = partials[(1, 0)], partials[(0, 1)]
    g_fd = np.empty(inner + (2, 2))
    g_fd[..., 0, 0] = np.sum(xu * xu, axis=-1)
    g_fd[..., 0, 1] = g_fd[..., 1, 0] = np.sum(xu * xv, axis=-1)
    g_fd[..., 1, 1] = np.sum(xv * xv, axis=-1)
    base_jets = jet_eval(chart, (Ui, Vi), 1, check_domain=False)
    bu, bv = base_jets.partial(1, 0), base_jets.partial(0, 1)
    g_ref = np.empty_like(g_fd)
    g_ref[..., 0, 0] = np.sum(bu * bu, axis=-1)
    g_ref[..., 0, 1] = g_ref[..., 1, 0] = np.sum(bu * bv, axis=-1)
    g_ref[..., 1, 1] = np.sum(bv * bv, axis=-1)
    metric_dev = float(np.max(np.abs(g_fd - g_ref)) / np.max(np.abs(g_ref)))

    sphere_err = 0.0
    if chart.ambient.is_sphere:
        sphere_err = float(np.max(np.abs(np.linalg.norm(points, axis=-1) - 1.0)))

    flat = {k: p.reshape(-1, p.shape[-1]) for k, p in partials.items()}
    flag = flags_from_partials(flat, chart.ambient, rank_tol)
    mean_curv = float(flag.minimality_residual.max()) / 2.0

    iso_dev = float("nan")
    ranks = flag.ranks.reshape(inner + (flag.ranks.shape[-1],))
    if check_isotropy:
        report = _report_from_flag(flag, grid, Ui, Vi, circ_tol=1e-5)
        iso_dev = report.max_dev

    return SampledMemberReport(
        theta=theta,
        margin=margin,
        metric_deviation=metric_dev,
        mean_curvature_residual=mean_curv,
        isotropy_max_dev=iso_dev,
        ranks=ranks,
        sphere_norm_error=sphere_err,
    )
