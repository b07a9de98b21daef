"""Osculating flags, higher fundamental forms, curvature ellipses, isotropy.

The s-th fundamental form is computed by projecting the s-th order
partial derivatives of the immersion onto the orthogonal complement of
the span of all lower-order derivatives (plus the position vector for
sphere ambients).  One jet evaluation per point supplies every level;
the inductive covariant-derivative definition is kept as a
finite-difference cross-check (``third_form_recursive``).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .charts import (
    GridSpec,
    SurfaceChart,
    complex_structure_matrix,
    frame_from_partials,
    jet_eval,
)
from .errors import InconsistentFlagError, NonMinimalChartError, NumericalError
from .jets import jcross_rows

DEFAULT_RANK_TOL = 1e-7
DEFAULT_CIRC_TOL = 1e-6
MINIMALITY_TOL = 1e-8


def chart_partials(chart: SurfaceChart, u, v, max_order: int) -> dict:
    """Partial-derivative arrays d^a_u d^b_v x, (a, b) with a+b <= max_order."""
    jets = jet_eval(chart, (u, v), max_order, check_domain=False)
    out = {}
    for d in range(max_order + 1):
        for b in range(d + 1):
            out[(d - b, b)] = jets.partial(d - b, b)
    return out


def _project_out(vecs: np.ndarray, basis_list: list[np.ndarray]) -> np.ndarray:
    """Remove components of row vectors along each (orthonormal) basis block."""
    for bas in basis_list:
        coef = np.einsum("...nd,...rd->...nr", vecs, bas)
        vecs = vecs - np.einsum("...nr,...rd->...nd", coef, bas)
    return vecs


def _frame_values(vecs: np.ndarray, C: np.ndarray, s: int) -> np.ndarray:
    """Symmetric-form values on the orthonormal frame.

    ``vecs[..., i, :]`` holds the form on coordinate slots with i copies
    of d_v; returns the same layout with q copies of e2 instead.
    """
    c1u, c1v = C[..., 0, 0], C[..., 1, 0]
    c2u, c2v = C[..., 0, 1], C[..., 1, 1]
    out = np.zeros_like(vecs)
    for q in range(s + 1):
        p = s - q
        acc = np.zeros(vecs.shape[:-2] + vecs.shape[-1:])
        for j in range(p + 1):
            for l in range(q + 1):
                w = (
                    comb(p, j)
                    * comb(q, l)
                    * c1u ** (p - j)
                    * c1v**j
                    * c2u ** (q - l)
                    * c2v**l
                )
                acc = acc + w[..., None] * vecs[..., j + l, :]
        out[..., q, :] = acc
    return out


@dataclass
class FlagLevel:
    """Data of one normal space N_{s-1} (form order s)."""

    s: int
    alpha_coord: np.ndarray  # (..., s+1, D), index = number of d_v slots
    alpha_frame: np.ndarray  # (..., s+1, D), index = number of e2 slots
    singular_values: np.ndarray
    rank: np.ndarray
    basis: np.ndarray  # (..., r, D), rows beyond the detected rank zeroed


@dataclass
class FlagBatch:
    """Osculating flags at a batch of points."""

    chart: SurfaceChart | None
    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    coord_coeffs: np.ndarray
    metric: np.ndarray
    j_coord: np.ndarray
    levels: list[FlagLevel]
    ranks: np.ndarray  # (..., m)
    regular: np.ndarray  # ranks match the generic pattern
    substantial: np.ndarray  # flag fills the ambient
    minimality_residual: np.ndarray
    ambient: object

    @property
    def m(self) -> int:
        return len(self.levels)

    def level(self, k: int) -> FlagLevel:
        """Normal space N_k (1-based order, form order k+1)."""
        return self.levels[k - 1]


def flags_from_partials(partials: dict, ambient, rank_tol: float = DEFAULT_RANK_TOL,
                        chart: SurfaceChart | None = None, u=None, v=None) -> FlagBatch:
    m = ambient.max_normal_order
    x = partials[(0, 0)]
    xu, xv = partials[(1, 0)], partials[(0, 1)]
    e1, e2, C, g = frame_from_partials(xu, xv)
    basis_list = []
    if ambient.is_sphere:
        basis_list.append((x / np.linalg.norm(x, axis=-1, keepdims=True))[..., None, :])
    basis_list.append(np.stack([e1, e2], axis=-2))

    scale1 = np.sqrt(g[..., 0, 0] + g[..., 1, 1])
    expected = ambient.generic_ranks
    levels = []
    ranks = []
    for s in range(2, m + 2):
        raw = np.stack([partials[(s - i, i)] for i in range(s + 1)], axis=-2)
        vecs = _project_out(_project_out(raw, basis_list), basis_list)
        _, svals, Vt = np.linalg.svd(vecs, full_matrices=False)
        floor = 1e-10 * scale1**s
        top = svals[..., 0]
        nontrivial = top > floor
        rel = svals > (rank_tol * np.maximum(top, floor))[..., None]
        rank = np.where(nontrivial, rel.sum(axis=-1), 0)
        if np.any(rank > 2):
            bad = np.argwhere(rank > 2)
            raise InconsistentFlagError(
                f"normal space rank {int(rank.max())} > 2 at level {s - 1} "
                f"(first offending batch index {tuple(bad[0])}); "
                "chart is not a minimal substantial surface of this kind"
            )
        keep = rel & nontrivial[..., None]
        basis = Vt * keep[..., : Vt.shape[-2], None]
        basis_list.append(basis)
        frame_vals = _frame_values(vecs, C, s)
        levels.append(FlagLevel(s, vecs, frame_vals, svals, rank, basis))
        ranks.append(rank)

    ranks_arr = np.stack(ranks, axis=-1)
    expected_arr = np.array(expected)
    regular = np.all(ranks_arr == expected_arr, axis=-1)
    substantial = ranks_arr.sum(axis=-1) + 2 + (1 if ambient.is_sphere else 0) == ambient.embedding_dim

    lvl2 = levels[0].alpha_frame
    trace = lvl2[..., 0, :] + lvl2[..., 2, :]
    min_res = np.linalg.norm(trace, axis=-1)

    return FlagBatch(
        chart=chart,
        u=np.asarray(u) if u is not None else None,
        v=np.asarray(v) if v is not None else None,
        x=x,
        e1=e1,
        e2=e2,
        coord_coeffs=C,
        metric=g,
        j_coord=complex_structure_matrix(g),
        levels=levels,
        ranks=ranks_arr,
        regular=regular,
        substantial=substantial,
        minimality_residual=min_res,
        ambient=ambient,
    )


def osculating_flag(chart: SurfaceChart, point, rank_tol: float = DEFAULT_RANK_TOL) -> FlagBatch:
    """Flag(s) at one point or a batch of points of a chart."""
    u = np.asarray(point[0], dtype=float)
    v = np.asarray(point[1], dtype=float)
    m = chart.ambient.max_normal_order
    partials = chart_partials(chart, u, v, m + 1)
    return flags_from_partials(partials, chart.ambient, rank_tol, chart=chart, u=u, v=v)


def higher_form_apply(flag: FlagBatch, s: int, directions) -> np.ndarray:
    """Evaluate the s-th fundamental form on tangent vectors.

    Directions are 2-vectors in the orthonormal frame (e1, e2).
    """
    if not 2 <= s <= flag.m + 1:
        raise ValueError(f"form order {s} outside 2..{flag.m + 1}")
    if len(directions) != s:
        raise ValueError(f"need {s} direction vectors")
    vals = flag.levels[s - 2].alpha_frame
    out = np.zeros(vals.shape[:-2] + vals.shape[-1:])
    for bits in np.ndindex(*(2,) * s):
        w = 1.0
        for j, b in enumerate(bits):
            w = w * np.asarray(directions[j], dtype=float)[..., b]
        out = out + np.asarray(w)[..., None] * vals[..., sum(bits), :]
    return out


@dataclass
class EllipseData:
    order: int
    xi1: np.ndarray
    xi2: np.ndarray
    samples: np.ndarray  # (..., phi, D)
    semi_axes: np.ndarray  # (..., 2), a >= b
    circularity_dev: np.ndarray  # (a - b) / a
    radius: np.ndarray  # semi-major axis
    center_norm: np.ndarray
    degenerate: np.ndarray  # alpha^{k+1} vanishes


def curvature_ellipse(flag: FlagBatch, k: int, phi_samples: int = 64) -> EllipseData:
    """Sample and fit the k-th order curvature ellipse.

    The image of the unit tangent circle under the (k+1)-th fundamental
    form is sampled over phi, centered, and fitted by SVD; singular
    values of the centered sample matrix give the semi-axes exactly for
    a true ellipse.
    """
    if not 1 <= k <= flag.m:
        raise ValueError(f"ellipse order {k} outside 1..{flag.m}")
    if phi_samples < 8:
        raise ValueError("phi_samples must be at least 8")
    s = k + 1
    frame_vals = flag.levels[k - 1].alpha_frame
    phi = np.linspace(0.0, 2.0 * np.pi, phi_samples, endpoint=False)
    weights = np.stack(
        [comb(s, q) * np.cos(phi) ** (s - q) * np.sin(phi) ** q for q in range(s + 1)],
        axis=-1,
    )  # (phi, s+1)
    samples = np.einsum("pq,...qd->...pd", weights, frame_vals)
    center = samples.mean(axis=-2, keepdims=True)
    sv = np.linalg.svd(samples - center, compute_uv=False)[..., :2]
    axes = sv * np.sqrt(2.0 / phi_samples)
    a, b = axes[..., 0], axes[..., 1]
    scale = np.linalg.norm(frame_vals, axis=(-2, -1)) + 1e-300
    degenerate = a < 1e-10 * scale
    dev = np.where(degenerate, 0.0, (a - b) / np.where(degenerate, 1.0, a))
    return EllipseData(
        order=k,
        xi1=frame_vals[..., 0, :],
        xi2=frame_vals[..., 1, :],
        samples=samples,
        semi_axes=axes,
        circularity_dev=dev,
        radius=a,
        center_norm=np.linalg.norm(center[..., 0, :], axis=-1),
        degenerate=degenerate,
    )


@dataclass
class IsotropyReport:
    grid: GridSpec
    u: np.ndarray
    v: np.ndarray
    ranks: np.ndarray  # (nu, nv, m)
    circ_dev: np.ndarray  # (nu, nv, m), NaN where N_k is not a plane
    kappas: np.ndarray  # (nu, nv, m) ellipse radii
    regular: np.ndarray
    substantial: np.ndarray
    minimality_residual: np.ndarray
    max_dev: float
    suspected_nonregular: list[tuple[int, int]]
    isotropic: bool
    circ_tol: float

    def summary(self) -> dict:
        return {
            "max_dev": self.max_dev,
            "isotropic": bool(self.isotropic),
            "minimality_residual_max": float(self.minimality_residual.max()),
            "l0_cells": [list(map(int, c)) for c in self.suspected_nonregular],
            "rank_pattern": [int(r) for r in np.median(
                self.ranks.reshape(-1, self.ranks.shape[-1]), axis=0)],
            "substantial_everywhere": bool(np.all(self.substantial)),
            "circ_tol": self.circ_tol,
        }


def isotropy_report(
    chart: SurfaceChart,
    grid: GridSpec,
    rank_tol: float = DEFAULT_RANK_TOL,
    circ_tol: float = DEFAULT_CIRC_TOL,
    minimality_tol: float = MINIMALITY_TOL,
) -> IsotropyReport:
    """Per-point circularity of every plane normal bundle over a grid.

    Rejects non-minimal charts (isotropy presupposes minimality); points
    where some N_k drops rank are flagged as suspected members of the
    non-regular set.
    """
    U, V = grid.nodes(chart)
    flag = osculating_flag(chart, (U.ravel(), V.ravel()), rank_tol)
    worst = int(np.argmax(flag.minimality_residual))
    if flag.minimality_residual[worst] > minimality_tol:
        raise NonMinimalChartError(
            (U.ravel()[worst], V.ravel()[worst]), flag.minimality_residual[worst]
        )
    return _report_from_flag(flag, grid, U, V, circ_tol)


def _report_from_flag(flag: FlagBatch, grid, U, V, circ_tol) -> IsotropyReport:
    m = flag.m
    shape = U.shape
    dev = np.full(shape + (m,), np.nan)
    kap = np.full(shape + (m,), np.nan)
    for k in range(1, m + 1):
        ell = curvature_ellipse(flag, k)
        rank = flag.levels[k - 1].rank
        plane = (rank == 2).reshape(shape)
        dk = ell.circularity_dev.reshape(shape)
        kk = ell.radius.reshape(shape)
        dev[..., k - 1] = np.where(plane, dk, np.nan)
        kap[..., k - 1] = kk
    regular = flag.regular.reshape(shape)
    plane_devs = dev[regular] if regular.any() else dev[:0]
    finite = plane_devs[np.isfinite(plane_devs)]
    max_dev = float(finite.max()) if finite.size else 0.0
    suspects = [tuple(map(int, ij)) for ij in np.argwhere(~regular)]
    return IsotropyReport(
        grid=grid,
        u=U,
        v=V,
        ranks=flag.ranks.reshape(shape + (m,)),
        circ_dev=dev,
        kappas=kap,
        regular=regular,
        substantial=flag.substantial.reshape(shape),
        minimality_residual=flag.minimality_residual.reshape(shape),
        max_dev=max_dev,
        suspected_nonregular=suspects,
        isotropic=max_dev < circ_tol,
        circ_tol=circ_tol,
    )


# -- adapted frames ----------------------------------------------------------


def conjugate_axes(xi1: np.ndarray, xi2: np.ndarray):
    """Semi-axes of the ellipse with conjugate semi-diameters (xi1, xi2).

    |E(psi)|^2 = [cos sin] G [cos sin]^T with G the 2x2 Gram matrix, so
    the semi-axes are the square roots of its eigenvalues.
    """
    g11 = np.sum(xi1 * xi1, axis=-1)
    g22 = np.sum(xi2 * xi2, axis=-1)
    g12 = np.sum(xi1 * xi2, axis=-1)
    mean = 0.5 * (g11 + g22)
    disc = np.sqrt(np.maximum(0.25 * (g11 - g22) ** 2 + g12**2, 0.0))
    a = np.sqrt(np.maximum(mean + disc, 0.0))
    b = np.sqrt(np.maximum(mean - disc, 0.0))
    return a, b


ADAPTED_FRAME_GATE = 1e-3


def adapted_frame_values(
    flag: FlagBatch,
    mode: str = "adapted",
    pivots: dict | None = None,
    gate: float = ADAPTED_FRAME_GATE,
):
    """Ordered normal frame (e_3, ..., e_{2n+1}) as value arrays.

    In ``adapted`` mode the pair spanning each plane bundle is
    xi1/kappa, xi2/kappa (requires circular ellipses); a final line
    bundle is spanned by the generalized cross product of the full
    frame, which also fixes its sign: the ambient frame is positively
    oriented.  ``generic`` mode orthonormalizes pivot derivative
    projections instead (any minimal chart).
    """
    amb = flag.ambient
    cols = []
    if amb.is_sphere:
        cols.append(flag.x / np.linalg.norm(flag.x, axis=-1, keepdims=True))
    cols += [flag.e1, flag.e2]
    normals = []
    kappas = []
    for lev in flag.levels:
        expected_rank = amb.generic_ranks[lev.s - 2]
        if expected_rank == 2:
            if mode == "adapted":
                xi1, xi2 = lev.alpha_frame[..., 0, :], lev.alpha_frame[..., 1, :]
                a, b = conjugate_axes(xi1, xi2)
                if np.any(a <= 0) or np.any((a - b) / np.maximum(a, 1e-300) > gate):
                    raise NumericalError(
                        f"adapted frame relations unsolvable at level {lev.s - 1}: "
                        "curvature ellipse is not a circle there"
                    )
                v1, v2 = xi1, xi2
            else:
                order = pivots[lev.s] if pivots else _default_pivots(lev)
                v1 = lev.alpha_coord[..., order[0], :]
                v2 = lev.alpha_coord[..., order[1], :]
            kappas.append(np.linalg.norm(v1, axis=-1))
            n1 = v1 / np.linalg.norm(v1, axis=-1, keepdims=True)
            w = v2 - np.sum(v2 * n1, axis=-1, keepdims=True) * n1
            wn = np.linalg.norm(w, axis=-1, keepdims=True)
            if np.any(wn <= 0):
                raise NumericalError("normal pair degenerate; cannot build adapted frame")
            n2 = w / wn
            normals += [n1, n2]
            cols += [n1, n2]
        else:
            rows = [[c[..., j] for j in range(c.shape[-1])] for c in cols]
            cr = np.stack(jcross_rows(rows), axis=-1)
            nrm = np.linalg.norm(cr, axis=-1, keepdims=True)
            if np.any(nrm < 1e-10):
                raise NumericalError("flag degenerates: last normal direction vanishes")
            last = cr / nrm
            kappas.append(np.linalg.norm(lev.alpha_frame[..., 0, :], axis=-1))
            normals.append(last)
            cols.append(last)
    frame = np.stack(cols, axis=-1)  # (..., D, ncols)
    return frame, normals, np.stack(kappas, axis=-1)


def _default_pivots(lev: FlagLevel) -> tuple[int, int]:
    norms = np.linalg.norm(lev.alpha_coord, axis=-1)
    norms = norms.mean(axis=tuple(range(norms.ndim - 1))) if norms.ndim > 1 else norms
    best, best_score = (0, 1), -1.0
    for i in range(len(norms)):
        for j in range(i + 1, len(norms)):
            score = min(norms[i], norms[j])
            if score > best_score:
                best, best_score = (i, j), score
    return best


def adapted_frame(chart: SurfaceChart, point, gate: float = ADAPTED_FRAME_GATE):
    """Spec-facing wrapper: normal frame + defining-relation residuals at a point."""
    flag = osculating_flag(chart, point)
    frame, normals, kappas = adapted_frame_values(flag, gate=gate)
    residuals = []
    pair_idx = 0
    for li, lev in enumerate(flag.levels):
        if flag.ambient.generic_ranks[lev.s - 2] == 2:
            kap = kappas[..., li]
            r1 = np.linalg.norm(
                lev.alpha_frame[..., 0, :] - kap[..., None] * normals[2 * pair_idx], axis=-1
            )
            r2 = np.linalg.norm(
                lev.alpha_frame[..., 1, :] - kap[..., None] * normals[2 * pair_idx + 1], axis=-1
            )
            residuals.append(np.maximum(r1, r2))
            pair_idx += 1
    res = np.max(np.stack(residuals, axis=-1), axis=-1) if residuals else np.zeros(flag.x.shape[:-1])
    return frame, normals, kappas, res


# -- connection forms --------------------------------------------------------


@dataclass
class ConnectionFormsField:
    """omega_{AB}(e_i) over a grid for the frame (e1, e2, e3, ..., e_{2n+1}).

    Indices are 0-based into that list; entries with A or B tangent are
    the second-fundamental-form 1-forms, normal-normal entries are the
    normal connection.  ``omega_E`` is the complex-linear extension
    evaluated on E = e1 - i e2.
    """

    grid: GridSpec
    omega: np.ndarray  # (..., 2, F, F); axis -3 indexes (e1, e2)
    omega_E: np.ndarray  # (..., F, F) complex
    fd_step: float
    n_normals: int

    def normal_block(self) -> np.ndarray:
        return self.omega[..., 2:, 2:]


def connection_forms(
    chart: SurfaceChart,
    grid: GridSpec,
    fd_step: float = 1e-3,
    mode: str = "adapted",
) -> ConnectionFormsField:
    """Connection forms of the adapted frame by central differencing.

    The frame field is evaluated at p +- h along each coordinate; the
    ambient derivative is projected onto the frame and antisymmetrized,
    so omega_{AB} = -omega_{BA} holds exactly.
    """
    U, V = grid.nodes(chart)
    u, v = U.ravel(), V.ravel()

    def frame_at(uu, vv):
        fl = osculating_flag(chart, (uu, vv))
        frame, _, _ = adapted_frame_values(fl, mode=mode)
        return frame, fl

    frame0, flag0 = frame_at(u, v)
    start = 1 if chart.ambient.is_sphere else 0
    E0 = frame0[..., start:]  # drop the position column
    h = fd_step
    dE = []
    for du, dv in ((h, 0.0), (0.0, h)):
        fp, _ = frame_at(u + du, v + dv)
        fm, _ = frame_at(u - du, v - dv)
        dE.append((fp[..., start:] - fm[..., start:]) / (2 * h))
    T_u = np.einsum("...da,...db->...ab", dE[0], E0)
    T_v = np.einsum("...da,...db->...ab", dE[1], E0)
    om_u = 0.5 * (T_u - np.swapaxes(T_u, -1, -2))
    om_v = 0.5 * (T_v - np.swapaxes(T_v, -1, -2))
    C = flag0.coord_coeffs
    om_e1 = C[..., 0, 0, None, None] * om_u + C[..., 1, 0, None, None] * om_v
    om_e2 = C[..., 0, 1, None, None] * om_u + C[..., 1, 1, None, None] * om_v
    omega = np.stack([om_e1, om_e2], axis=-3)
    shape = U.shape + omega.shape[-3:]
    omega = omega.reshape(shape)
    return ConnectionFormsField(
        grid=grid,
        omega=omega,
        omega_E=omega[..., 0, :, :] - 1j * omega[..., 1, :, :],
        fd_step=fd_step,
        n_normals=E0.shape[-1] - 2,
    )


def _star_pair(f: np.ndarray) -> np.ndarray:
    """Hodge star on a 1-form stored as values on (e1, e2) along axis -1."""
    return np.stack([-f[..., 1], f[..., 0]], axis=-1)


def connection_identity_residuals(forms: ConnectionFormsField) -> dict[str, float]:
    """Residuals of the adapted-frame connection identities.

    Frame labels are 1-based (1, 2 tangent; 2s+1, 2s+2 span the s-th
    plane bundle; 2n+1 the final line bundle).  Real identities relate a
    form to the Hodge star of another; complex ones are their E
    evaluations.
    """
    om = np.moveaxis(forms.omega, -3, -1)  # (..., F, F, 2)
    omE = forms.omega_E
    nn = forms.n_normals
    n = (nn + 1) // 2

    def f(a: int, b: int) -> np.ndarray:
        return om[..., a - 1, b - 1, :]

    def fE(a: int, b: int) -> np.ndarray:
        return omE[..., a - 1, b - 1]

    out: dict[str, float] = {}

    def put(name, resid):
        out[name] = float(np.max(np.abs(resid)))

    for s in range(1, n):
        put(f"con1a[s={s}]", f(2 * s, 2 * s + 1) + _star_pair(f(2 * s - 1, 2 * s + 1)))
        put(f"con1b[s={s}]", f(2 * s, 2 * s + 2) + _star_pair(f(2 * s - 1, 2 * s + 2)))
        put(f"con2a[s={s}]", f(2 * s - 1, 2 * s + 2) - _star_pair(f(2 * s - 1, 2 * s + 1)))
        put(f"con2b[s={s}]", f(2 * s, 2 * s + 2) - _star_pair(f(2 * s, 2 * s + 1)))
        put(f"coni-a[s={s}]", fE(2 * s - 1, 2 * s + 2) + 1j * fE(2 * s - 1, 2 * s + 1))
        put(f"coni-b[s={s}]", fE(2 * s, 2 * s + 1) - 1j * fE(2 * s - 1, 2 * s + 1))
        put(f"conii[s={s}]", fE(2 * s, 2 * s + 2) - fE(2 * s - 1, 2 * s + 1))
    put("con3", f(2 * n, 2 * n + 1) + _star_pair(f(2 * n - 1, 2 * n + 1)))
    put("coniii", fE(2 * n, 2 * n + 1) - 1j * fE(2 * n - 1, 2 * n + 1))
    return out


# -- inductive-definition cross-check ---------------------------------------


def third_form_recursive(chart: SurfaceChart, u, v, fd_step: float = 1e-4) -> np.ndarray:
    """alpha^3 on coordinate slots via the covariant recursion.

    The normal section alpha^2(d_i, d_j) is differenced along each
    coordinate and projected past the first normal space; independent of
    the jet projection route up to the finite-difference error.
    Returns shape (..., 4, D) indexed by the number of d_v slots.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    amb = chart.ambient

    def alpha2(uu, vv):
        partials = chart_partials(chart, uu, vv, 2)
        x = partials[(0, 0)]
        basis = []
        if amb.is_sphere:
            basis.append((x / np.linalg.norm(x, axis=-1, keepdims=True))[..., None, :])
        e1, e2, _, _ = frame_from_partials(partials[(1, 0)], partials[(0, 1)])
        basis.append(np.stack([e1, e2], axis=-2))
        raw = np.stack([partials[(2 - i, i)] for i in range(3)], axis=-2)
        return _project_out(_project_out(raw, basis), basis)

    h = fd_step
    d_u = (alpha2(u + h, v) - alpha2(u - h, v)) / (2 * h)
    d_v = (alpha2(u, v + h) - alpha2(u, v - h)) / (2 * h)

    flag = osculating_flag(chart, (u, v))
    basis = []
    if amb.is_sphere:
        basis.append((flag.x / np.linalg.norm(flag.x, axis=-1, keepdims=True))[..., None, :])
    basis.append(np.stack([flag.e1, flag.e2], axis=-2))
    basis.append(flag.levels[0].basis)
    d_u = _project_out(d_u, basis)
    d_v = _project_out(d_v, basis)
    out = np.stack(
        [d_u[..., 0, :], d_u[..., 1, :], d_u[..., 2, :], d_v[..., 2, :]], axis=-2
    )
    return out


def third_form_crosscheck(chart: SurfaceChart, u, v, fd_step: float = 1e-4) -> float:
    """Max deviation between the projection and recursion routes for alpha^3."""
    flag = osculating_flag(chart, (u, v))
    if flag.m < 2:
        raise ValueError("chart has no third fundamental form (m < 2)")
    direct = flag.levels[1].alpha_coord
    rec = third_form_recursive(chart, u, v, fd_step)
    return float(np.max(np.abs(direct - rec)))
