"""Associated family g_theta, period monodromies and the moduli scan.

The family member is produced by integrating the moving-frame structure
equations dF = F * Lambda along parameter paths, where Lambda carries
the dual forms, the Levi-Civita form, the second fundamental form
rotated by J_theta, the (theta-independent) normal connection, and the
sphere curvature coupling.  All Lambda ingredients are evaluated
exactly, at arbitrary points, from order-1 jets of the adapted frame;
theta enters only through an in-plane rotation of the tangent-normal
block, so node tables are built once and reused across every theta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.optimize import minimize_scalar

from .charts import GridSpec, SurfaceChart, complex_structure_matrix
from .errors import (
    ChartValidationError,
    CompatibilityError,
    GaugeError,
    NonMinimalChartError,
    NumericalError,
)
from .fdtools import sample_partials
from .flags import MINIMALITY_TOL, osculating_flag
from .jets import Jet2, jcross_rows, jdot, jinv, jinvsqrt, jnormalize, jproject_out


@dataclass(frozen=True)
class FamilyParams:
    """Rotation angle of the second fundamental form, theta in [0, pi)."""

    theta: float

    @property
    def j_theta(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array([[c, -s], [s, c]])


def choose_pivots(chart: SurfaceChart, sample: int = 9) -> dict[int, tuple[int, int]]:
    """Per-level derivative multi-indices used by the generic normal gauge.

    For each plane bundle, picks the pair of projected coordinate
    derivatives whose span stays best conditioned over a coarse domain
    sample (unit-row sigma_min, worst case); a uniformly degenerate
    level means no single smooth pivot gauge exists on the patch.
    """
    (u0, u1), (v0, v1) = chart.domain
    U, V = np.meshgrid(np.linspace(u0, u1, sample), np.linspace(v0, v1, sample), indexing="ij")
    flag = osculating_flag(chart, (U.ravel(), V.ravel()))
    out = {}
    for lev in flag.levels:
        if chart.ambient.generic_ranks[lev.s - 2] != 2:
            continue
        vecs = lev.alpha_coord
        unit = vecs / (np.linalg.norm(vecs, axis=-1, keepdims=True) + 1e-300)
        best, best_score = None, -1.0
        k = vecs.shape[-2]
        for i in range(k):
            for j in range(i + 1, k):
                pair = np.stack([unit[..., i, :], unit[..., j, :]], axis=-2)
                smin = np.linalg.svd(pair, compute_uv=False)[..., -1]
                score = float(smin.min())
                if score > best_score:
                    best, best_score = (i, j), score
        if best_score < 1e-3:
            raise GaugeError(
                f"no smooth pivot gauge for normal level {lev.s - 1} of chart {chart.label!r}"
            )
        out[lev.s] = best
    return out


def frame_jets(chart: SurfaceChart, u, v, mode: str = "adapted", pivots: dict | None = None):
    """Order-1 jets of the full adapted (or generic) orthonormal frame.

    Returns (cols, xu_jet, xv_jet, C, Jc): ``cols`` lists the frame
    vectors as jet vectors, starting with the position for sphere
    ambients; C holds the tangent-frame coordinates (values) and Jc the
    complex structure on the coordinate basis.
    """
    amb = chart.ambient
    m = amb.max_normal_order
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    jets = chart.formula.eval_jets(u, v, m + 2)
    pj = {}
    for d in range(m + 2):
        for b in range(d + 1):
            pj[(d - b, b)] = jets.partial_jet(d - b, b, order=1)
    x = pj[(0, 0)]
    xu, xv = pj[(1, 0)], pj[(0, 1)]

    cols: list[Jet2] = []
    basis: list[Jet2] = []
    if amb.is_sphere:
        xn = jnormalize(x)
        cols.append(xn)
        basis.append(xn)
    g00 = jdot(xu, xu)
    c1u = jinvsqrt(g00)
    e1 = xu * c1u.expand_dims(-1)
    w = xv - e1 * jdot(xv, e1).expand_dims(-1)
    n2inv = jinvsqrt(jdot(w, w))
    e2 = w * n2inv.expand_dims(-1)
    g01 = jdot(xu, xv)
    c2u = (g01 * jinv(g00) * n2inv) * (-1.0)
    c2v = n2inv
    cols += [e1, e2]
    basis += [e1, e2]

    # minimality gate: the rotated form only solves the structure
    # equations when the trace of alpha^2 vanishes
    lvl2 = [jproject_out(pj[(2 - i, i)], basis) for i in range(3)]
    tr = (
        lvl2[0] * (c1u * c1u).expand_dims(-1)
        + lvl2[0] * (c2u * c2u).expand_dims(-1)
        + lvl2[1] * (c2u * c2v * 2.0).expand_dims(-1)
        + lvl2[2] * (c2v * c2v).expand_dims(-1)
    )
    tr_norm = np.linalg.norm(tr.value, axis=-1)
    worst = int(np.argmax(tr_norm))
    if tr_norm.ravel()[worst] > MINIMALITY_TOL:
        raise NonMinimalChartError(
            (u.ravel()[worst], v.ravel()[worst]), tr_norm.ravel()[worst]
        )

    try:
        _build_normal_levels(chart, pj, pvecs_first=lvl2, basis=basis, cols=cols,
                             c1u=c1u, c2u=c2u, c2v=c2v, mode=mode, pivots=pivots)
    except FloatingPointError as exc:
        raise NumericalError(
            f"frame construction degenerates on chart {chart.label!r} "
            f"(non-substantial or non-regular points): {exc}"
        ) from exc

    C = np.zeros(u.shape + (2, 2))
    C[..., 0, 0] = c1u.value
    C[..., 0, 1] = c2u.value
    C[..., 1, 1] = c2v.value
    g = np.empty(u.shape + (2, 2))
    g[..., 0, 0] = g00.value
    g[..., 0, 1] = g[..., 1, 0] = g01.value
    g[..., 1, 1] = jdot(xv, xv).value
    Jc = complex_structure_matrix(g)
    return x, cols, xu, xv, C, Jc


def _build_normal_levels(chart, pj, pvecs_first, basis, cols, c1u, c2u, c2v, mode, pivots):
    amb = chart.ambient
    m = amb.max_normal_order
    pvecs = pvecs_first
    for s in range(2, m + 2):
        if s > 2:
            pvecs = [jproject_out(pj[(s - i, i)], basis) for i in range(s + 1)]
        expected = amb.generic_ranks[s - 2]
        if expected == 2:
            if mode == "adapted":
                # c1v = 0 identically, so the frame values collapse:
                # xi1 = c1u^s alpha(du..du), xi2 = c1u^{s-1}(c2u a0 + c2v a1)
                c1s = c1u
                for _ in range(s - 1):
                    c1s = c1s * c1u
                xi1 = pvecs[0] * c1s.expand_dims(-1)
                c1s1 = c1u
                for _ in range(s - 2):
                    c1s1 = c1s1 * c1u
                xi2 = (pvecs[0] * c2u.expand_dims(-1) + pvecs[1] * c2v.expand_dims(-1)) * c1s1.expand_dims(-1)
                v1, v2 = xi1, xi2
            else:
                piv = (pivots or {}).get(s) or (0, 1)
                v1, v2 = pvecs[piv[0]], pvecs[piv[1]]
            n1 = jnormalize(v1)
            n2 = jnormalize(jproject_out(v2, [n1]))
            cols += [n1, n2]
            basis += [n1, n2]
        else:
            rows = [[c.component(j) for j in range(chart.ambient.embedding_dim)] for c in cols]
            cr = Jet2.stack(jcross_rows(rows), axis=-1)
            last = jnormalize(cr)
            cols.append(last)
            basis.append(last)


@dataclass
class ConnectionTables:
    """Per-node structure-equation tables, split so Lambda(theta) assembles cheaply."""

    A0u: np.ndarray  # theta-independent block, d_u direction
    A1u: np.ndarray  # cos(theta) coefficient (tangent-normal block)
    A2u: np.ndarray  # sin(theta) coefficient (same block rotated by J)
    A0v: np.ndarray
    A1v: np.ndarray
    A2v: np.ndarray
    G0: np.ndarray  # full frame matrices at the nodes
    is_sphere: bool
    size: int

    def lam(self, theta: float, direction=(1.0, 0.0), idx=slice(None)) -> np.ndarray:
        c, s = np.cos(theta), np.sin(theta)
        cu, cv = direction
        out = 0.0
        if cu:
            out = out + cu * (self.A0u[idx] + c * self.A1u[idx] + s * self.A2u[idx])
        if cv:
            out = out + cv * (self.A0v[idx] + c * self.A1v[idx] + s * self.A2v[idx])
        return out


def connection_tables(
    chart: SurfaceChart, u, v, mode: str = "adapted", pivots: dict | None = None
) -> ConnectionTables:
    """Maurer-Cartan tables of the frame field at arbitrary points."""
    x, cols, xu, xv, C, Jc = frame_jets(chart, u, v, mode, pivots)
    vals = np.stack([c.value for c in cols], axis=-2)  # (..., nc, D)
    du = np.stack([c.partial(1, 0) for c in cols], axis=-2)
    dv = np.stack([c.partial(0, 1) for c in cols], axis=-2)
    T_u = np.einsum("...ad,...bd->...ba", du, vals)
    T_v = np.einsum("...ad,...bd->...ba", dv, vals)
    om_u = 0.5 * (T_u - np.swapaxes(T_u, -1, -2))
    om_v = 0.5 * (T_v - np.swapaxes(T_v, -1, -2))
    nc = vals.shape[-2]
    sphere = chart.ambient.is_sphere
    t0 = 1 if sphere else 0  # first tangent column
    tang = [t0, t0 + 1]
    norm_idx = list(range(t0 + 2, nc))
    mask = np.zeros((nc, nc))
    for i in tang:
        for a in norm_idx:
            mask[i, a] = mask[a, i] = 1.0
    P_u = om_u * mask
    P_v = om_v * mask
    S_u = om_u - P_u
    S_v = om_v - P_v
    PJ_u = Jc[..., 0, 0, None, None] * P_u + Jc[..., 1, 0, None, None] * P_v
    PJ_v = Jc[..., 0, 1, None, None] * P_u + Jc[..., 1, 1, None, None] * P_v

    frame = np.moveaxis(vals, -2, -1)  # (..., D, nc)
    if sphere:
        G0 = frame
        A0u, A1u, A2u = S_u, P_u, PJ_u
        A0v, A1v, A2v = S_v, P_v, PJ_v
        size = nc
    else:
        size = nc + 1
        batch = om_u.shape[:-2]

        def pad(block):
            out = np.zeros(batch + (size, size))
            out[..., :nc, :nc] = block
            return out

        A0u, A1u, A2u = pad(S_u), pad(P_u), pad(PJ_u)
        A0v, A1v, A2v = pad(S_v), pad(P_v), pad(PJ_v)
        A0u[..., :nc, nc] = np.einsum("...d,...ad->...a", xu.value, vals)
        A0v[..., :nc, nc] = np.einsum("...d,...ad->...a", xv.value, vals)
        G0 = np.zeros(batch + (size, size))
        G0[..., :nc, :nc] = frame
        G0[..., :nc, nc] = x.value
        G0[..., nc, nc] = 1.0
    return ConnectionTables(A0u, A1u, A2u, A0v, A1v, A2v, G0, sphere, size)


def _reorth(G: np.ndarray, is_sphere: bool, size: int):
    """Project back onto the (affine) orthogonal group; returns drift."""
    if is_sphere:
        U, s, Vt = np.linalg.svd(G)
        return U @ Vt, float(np.max(np.abs(s - 1.0)))
    nc = size - 1
    R = G[..., :nc, :nc]
    U, s, Vt = np.linalg.svd(R)
    out = G.copy()
    out[..., :nc, :nc] = U @ Vt
    out[..., nc, :nc] = 0.0
    out[..., nc, nc] = 1.0
    return out, float(np.max(np.abs(s - 1.0)))


def rk4_sweep(
    G: np.ndarray,
    stage_lam,
    n_coarse: int,
    substeps: int,
    h_coarse: float,
    is_sphere: bool,
    size: int,
    collect: bool = False,
):
    """RK4 for dG = G Lambda along uniformly spaced stage nodes.

    ``stage_lam(k)`` returns Lambda at fine node k (spacing h/2 between
    stage nodes); the frame is re-orthonormalized by polar projection
    after every coarse step, which preserves the fourth-order accuracy.
    """
    h = h_coarse / substeps
    out = [G] if collect else None
    drift = 0.0
    idx = 0
    for _ in range(n_coarse):
        for _ in range(substeps):
            L0 = stage_lam(idx)
            L1 = stage_lam(idx + 1)
            L2 = stage_lam(idx + 2)
            K1 = G @ L0
            K2 = (G + (0.5 * h) * K1) @ L1
            K3 = (G + (0.5 * h) * K2) @ L1
            K4 = (G + h * K3) @ L2
            G = G + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
            idx += 2
        G, d = _reorth(G, is_sphere, size)
        drift = max(drift, d)
        if collect:
            out.append(G)
    return (out, drift) if collect else (G, drift)


def _fine_count(n_intervals: int, substeps: int) -> int:
    return 2 * substeps * n_intervals + 1


def _tables_chunked(chart, u, v, mode, pivots, chunk=8192) -> ConnectionTables:
    u = np.asarray(u, float).ravel()
    v = np.asarray(v, float).ravel()
    parts = []
    for lo in range(0, u.size, chunk):
        parts.append(connection_tables(chart, u[lo : lo + chunk], v[lo : lo + chunk], mode, pivots))
    if len(parts) == 1:
        return parts[0]
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts], axis=0)
    return ConnectionTables(
        cat("A0u"), cat("A1u"), cat("A2u"), cat("A0v"), cat("A1v"), cat("A2v"),
        cat("G0"), parts[0].is_sphere, parts[0].size,
    )


@dataclass
class FamilyResult:
    theta: float
    grid: GridSpec
    points: np.ndarray  # (nu, nv, D)
    frames: np.ndarray  # (nu, nv, M, M)
    drift: float
    path_defect: float
    mode: str

    @property
    def polar_points(self) -> np.ndarray:
        """Transported last normal field (the polar of g_theta on odd spheres)."""
        return self.frames[..., :, -1]


class _TableCache:
    """Connection tables keyed by (chart id, grid geometry, mode).

    The chart object is stored alongside the tables so its id cannot be
    recycled while the entry is alive.
    """

    def __init__(self, maxsize: int = 4):
        self.maxsize = maxsize
        self.data: dict = {}

    def get(self, key, chart, builder):
        if key not in self.data:
            if len(self.data) >= self.maxsize:
                self.data.pop(next(iter(self.data)))
            self.data[key] = (chart, builder())
        return self.data[key][1]


_GRID_CACHE = _TableCache()
_PATH_CACHE = _TableCache(maxsize=8)


def integrate_family(
    chart: SurfaceChart,
    grid: GridSpec,
    params: FamilyParams,
    substeps: int = 2,
    mode: str = "adapted",
    pivots: dict | None = None,
) -> FamilyResult:
    """Sample g_theta over the grid by a base-row sweep then column sweeps."""
    (u0, u1), (v0, v1) = chart.domain
    hu, hv = grid.steps(chart)
    nu, nv = grid.nu, grid.nv
    if mode == "generic" and pivots is None:
        pivots = choose_pivots(chart)
    key = (id(chart), chart.label, grid, substeps, mode)

    def build():
        uf = np.linspace(u0, u1, _fine_count(nu - 1, substeps))
        row = _tables_chunked(chart, uf, np.full_like(uf, v0), mode, pivots)
        vf = np.linspace(v0, v1, _fine_count(nv - 1, substeps))
        uu = np.broadcast_to(np.linspace(u0, u1, nu)[None, :], (vf.size, nu))
        vv = np.broadcast_to(vf[:, None], (vf.size, nu))
        cols = _tables_chunked(chart, uu.ravel(), vv.ravel(), mode, pivots)
        cols = _reshape_tables(cols, (vf.size, nu))
        utop = np.linspace(u0, u1, _fine_count(nu - 1, substeps))
        top = _tables_chunked(chart, utop, np.full_like(utop, v1), mode, pivots)
        return row, cols, top

    row, cols, top = _GRID_CACHE.get(key, chart, build)
    theta = params.theta

    G = row.G0[0]
    row_states, drift1 = rk4_sweep(
        G,
        lambda k: row.lam(theta, (1.0, 0.0), k),
        nu - 1,
        substeps,
        hu,
        row.is_sphere,
        row.size,
        collect=True,
    )
    Grow = np.stack(row_states, axis=0)  # (nu, M, M)
    col_states, drift2 = rk4_sweep(
        Grow,
        lambda k: cols.lam(theta, (0.0, 1.0), k),
        nv - 1,
        substeps,
        hv,
        cols.is_sphere,
        cols.size,
        collect=True,
    )
    F = np.stack(col_states, axis=1)  # (nu, nv, M, M)

    # alternate route to the (u1, v1) corner: top row from the last
    # column state at u0; flatness of Lambda makes this path-independent
    G_alt, _ = rk4_sweep(
        F[0, -1],
        lambda k: top.lam(theta, (1.0, 0.0), k),
        nu - 1,
        substeps,
        hu,
        top.is_sphere,
        top.size,
    )
    defect = float(np.linalg.norm(G_alt - F[-1, -1], 2))

    if chart.ambient.is_sphere:
        points = F[..., :, 0]
    else:
        nc = cols.size - 1
        points = F[..., :nc, nc]
    return FamilyResult(
        theta=theta,
        grid=grid,
        points=points,
        frames=F,
        drift=max(drift1, drift2),
        path_defect=defect,
        mode=mode,
    )


def _reshape_tables(t: ConnectionTables, shape) -> ConnectionTables:
    rs = lambda a: a.reshape(shape + a.shape[1:])
    return ConnectionTables(
        rs(t.A0u), rs(t.A1u), rs(t.A2u), rs(t.A0v), rs(t.A1v), rs(t.A2v),
        rs(t.G0), t.is_sphere, t.size,
    )


@dataclass
class MonodromyRecord:
    theta: float
    generator: tuple[float, float]
    phi: np.ndarray
    dist_to_identity: float
    orthogonality_defect: float


def _affine_inv(G: np.ndarray, size: int) -> np.ndarray:
    nc = size - 1
    R = G[..., :nc, :nc]
    t = G[..., :nc, nc]
    out = np.zeros_like(G)
    Rt = np.swapaxes(R, -1, -2)
    out[..., :nc, :nc] = Rt
    out[..., :nc, nc] = -np.einsum("...ab,...b->...a", Rt, t)
    out[..., nc, nc] = 1.0
    return out


def _path_tables(chart, generator, base, path_steps, substeps, mode, pivots):
    key = (id(chart), chart.label, tuple(generator), tuple(base), path_steps, substeps, mode)

    def build():
        t = np.linspace(0.0, 1.0, _fine_count(path_steps, substeps))
        return _tables_chunked(
            chart, base[0] + t * generator[0], base[1] + t * generator[1], mode, pivots
        )

    return _PATH_CACHE.get(key, chart, build)


def monodromy_distances(
    chart: SurfaceChart,
    thetas,
    generator,
    base=None,
    path_steps: int = 256,
    substeps: int = 1,
    mode: str = "adapted",
    pivots: dict | None = None,
    return_phi: bool = False,
):
    """Distance of Phi_theta(sigma) to the identity, batched over theta."""
    if base is None:
        base = (chart.domain[0][0], chart.domain[1][0])
    if mode == "generic" and pivots is None:
        pivots = choose_pivots(chart)
    tables = _path_tables(chart, generator, base, path_steps, substeps, mode, pivots)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    c = np.cos(thetas)[:, None, None]
    s = np.sin(thetas)[:, None, None]
    gu, gv = generator

    def stage(k):
        lam_u = tables.A0u[k] + c * tables.A1u[k] + s * tables.A2u[k]
        lam_v = tables.A0v[k] + c * tables.A1v[k] + s * tables.A2v[k]
        return gu * lam_u + gv * lam_v

    G0 = tables.G0[0]
    G = np.broadcast_to(G0, (thetas.size,) + G0.shape).copy()
    G, _ = rk4_sweep(G, stage, path_steps, substeps, 1.0 / path_steps, tables.is_sphere, tables.size)
    G0inv = G0.T if tables.is_sphere else _affine_inv(G0, tables.size)
    phi = G @ G0inv
    eye = np.eye(tables.size)
    dist = np.linalg.norm(phi - eye, ord=2, axis=(-2, -1))
    if tables.is_sphere:
        ortho = np.linalg.norm(np.swapaxes(phi, -1, -2) @ phi - eye, ord=2, axis=(-2, -1))
    else:
        R = phi[..., : tables.size - 1, : tables.size - 1]
        ortho = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - np.eye(tables.size - 1), ord=2, axis=(-2, -1))
    if return_phi:
        return dist, ortho, phi
    return dist, ortho


def monodromy(
    chart: SurfaceChart,
    params: FamilyParams,
    generator,
    base=None,
    path_steps: int = 256,
    substeps: int = 1,
    mode: str = "adapted",
) -> MonodromyRecord:
    """Ambient isometry relating the frame at p0 + sigma to the frame at p0."""
    if not chart.periods:
        raise ChartValidationError("monodromy needs a chart with declared periods")
    if base is None:
        base = (chart.domain[0][0], chart.domain[1][0])
    end = (base[0] + generator[0], base[1] + generator[1])
    ok = chart.contains(np.asarray(base[0]), np.asarray(base[1])) & chart.contains(
        np.asarray(end[0]), np.asarray(end[1])
    )
    if not np.all(ok):
        raise ChartValidationError("monodromy path leaves the chart domain")
    dist, ortho, phi = monodromy_distances(
        chart, [params.theta], generator, base, path_steps, substeps, mode, return_phi=True
    )
    return MonodromyRecord(
        theta=params.theta,
        generator=tuple(float(x) for x in generator),
        phi=phi[0],
        dist_to_identity=float(dist[0]),
        orthogonality_defect=float(ortho[0]),
    )


@dataclass
class ModuliScan:
    theta_grid: np.ndarray
    distances: np.ndarray  # (n_theta, n_generators)
    detected: list[float]
    refined_distances: list[float]
    classification: str  # "finite" | "circle" | "inconclusive"
    close_tol: float
    congruence_classes: list[list[float]] = field(default_factory=list)


def moduli_scan(
    chart: SurfaceChart,
    steps: int = 360,
    close_tol: float = 1e-6,
    path_steps: int = 256,
    substeps: int = 1,
    mode: str = "adapted",
    refine_xatol: float = 1e-10,
) -> ModuliScan:
    """Scan theta in [0, pi) for closing family members.

    The distance-to-identity curve is sampled per period generator;
    local minima (on the theta circle: theta + pi is congruent to
    theta) are refined by bounded scalar minimization and accepted when
    the refined distance falls below ``close_tol``.
    """
    if not chart.periods:
        raise ChartValidationError("moduli scan needs a periodic chart")
    thetas = np.linspace(0.0, pi, steps, endpoint=False)
    dists = np.stack(
        [
            monodromy_distances(chart, thetas, gen, path_steps=path_steps,
                                substeps=substeps, mode=mode)[0]
            for gen in chart.periods
        ],
        axis=-1,
    )
    d = dists.max(axis=-1)

    def dist_at(th: float) -> float:
        vals = [
            monodromy_distances(chart, [th % pi], gen, path_steps=path_steps,
                                substeps=substeps, mode=mode)[0][0]
            for gen in chart.periods
        ]
        return float(max(vals))

    if np.all(d < close_tol):
        return ModuliScan(thetas, dists, [float(t) for t in thetas], [float(x) for x in d],
                          "circle", close_tol)

    h = pi / steps
    minima_idx = [
        i
        for i in range(steps)
        if d[i] <= d[(i - 1) % steps] and d[i] <= d[(i + 1) % steps]
    ]
    detected: list[float] = []
    refined: list[float] = []
    for i in minima_idx:
        lo, hi = thetas[i] - h, thetas[i] + h
        res = minimize_scalar(dist_at, bounds=(lo, hi), method="bounded",
                              options={"xatol": refine_xatol})
        th = float(res.x) % pi
        if min(th, pi - th) < 1e-6:  # zeros at the wrap point are theta = 0
            th = 0.0
        val = float(res.fun)
        if val < close_tol:
            if not any(min(abs(th - t), pi - abs(th - t)) < 1e-6 for t in detected):
                detected.append(th)
                refined.append(val)
    order = np.argsort(detected)
    detected = [detected[i] for i in order]
    refined = [refined[i] for i in order]
    classification = "finite"
    for a, b in zip(detected, detected[1:] + ([detected[0] + pi] if detected else [])):
        if detected and (b - a) < 2 * h:
            classification = "inconclusive"
    return ModuliScan(thetas, dists, detected, refined, classification, close_tol)


def build_connection_tables(chart: SurfaceChart, grid: GridSpec, params: FamilyParams,
                            mode: str = "adapted"):
    """(Omega_u, Omega_v) fields of g_theta on the grid nodes."""
    U, V = grid.nodes(chart)
    t = _tables_chunked(chart, U.ravel(), V.ravel(), mode,
                        choose_pivots(chart) if mode == "generic" else None)
    t = _reshape_tables(t, U.shape)
    return t.lam(params.theta, (1.0, 0.0)), t.lam(params.theta, (0.0, 1.0))


def compatibility_residual(
    chart: SurfaceChart,
    grid: GridSpec,
    params: FamilyParams,
    mode: str = "adapted",
    acc: int = 6,
) -> float:
    """Max norm of d_u Omega_v - d_v Omega_u + [Omega_u, Omega_v] on the grid interior.

    The Gauss-Codazzi-Ricci equations make the rotated connection flat;
    the measured residual is finite-difference error only.
    """
    om_u, om_v = build_connection_tables(chart, grid, params, mode)
    hu, hv = grid.steps(chart)
    pu, mu = sample_partials(om_u, hu, hv, 1, acc=acc)
    pv, _ = sample_partials(om_v, hu, hv, 1, acc=acc)
    inner_u = pu[(0, 0)]
    inner_v = pv[(0, 0)]
    R = pv[(1, 0)] - pu[(0, 1)] + inner_u @ inner_v - inner_v @ inner_u
    return float(np.max(np.linalg.norm(R, ord=2, axis=(-2, -1))))


def check_compatibility(chart, grid, params, mode="adapted", threshold=1e-4):
    res = compatibility_residual(chart, grid, params, mode)
    if res > threshold:
        raise CompatibilityError(
            f"structure equations incompatible: residual {res:.3e} exceeds {threshold:.1e} "
            "(non-minimal input or insufficient grid)"
        )
    return res
