from math import pi, sin, sqrt

import numpy as np
import pytest

from isofam.catalog import catalog_get
from isofam.charts import GridSpec, jet_eval
from isofam.congruence import SampledImmersion, congruence_test
from isofam.errors import ChartValidationError, NonMinimalChartError
from isofam.family import (
    FamilyParams,
    build_connection_tables,
    compatibility_residual,
    integrate_family,
    moduli_scan,
    monodromy,
    monodromy_distances,
)
from isofam.flags import osculating_flag
from isofam.verify import verify_sampled_member

TWO_PI = 2 * pi


def chart_samples(chart, grid):
    return jet_eval(chart, grid.nodes(chart), 1, check_domain=False).value


def test_theta_zero_reproduces_chart():
    for lbl in ("clifford-s3", "equilateral-s5", "holo-r4"):
        ch = catalog_get(lbl).chart
        grid = GridSpec(32, 32)
        res = integrate_family(ch, grid, FamilyParams(0.0), substeps=2)
        err = np.max(np.linalg.norm(res.points - chart_samples(ch, grid), axis=-1))
        assert err < 1e-5, (lbl, err)
        assert res.drift < 1e-7  # pre-projection step defect at this grid
        assert res.path_defect < 1e-5  # loop consistency / flat connection
        F = res.frames
        if ch.ambient.is_sphere:
            gram = np.einsum("...ka,...kb->...ab", F, F)
            assert np.max(np.abs(gram - np.eye(F.shape[-1]))) < 1e-12


def test_integration_is_fourth_order():
    # halving the step cuts the reconstruction error by >= 8x (conservative)
    ch = catalog_get("equilateral-s5").chart
    errs = []
    for n in (17, 33):
        grid = GridSpec(n, n)
        res = integrate_family(ch, grid, FamilyParams(0.0), substeps=1)
        errs.append(np.max(np.linalg.norm(res.points - chart_samples(ch, grid), axis=-1)))
    assert errs[0] / errs[1] > 8.0


def test_family_members_isometric_minimal_isotropic():
    ch = catalog_get("equilateral-s5").chart
    grid = GridSpec(48, 48)
    for th in (pi / 6, pi / 3):
        res = integrate_family(ch, grid, FamilyParams(th), substeps=2)
        rep = verify_sampled_member(ch, grid, res.points, th)
        assert rep.metric_deviation < 1e-5
        assert rep.mean_curvature_residual < 1e-5
        assert rep.isotropy_max_dev < 1e-5
        assert rep.sphere_norm_error < 1e-8


def test_rotated_form_stays_traceless():
    # h^theta_{11a} + h^theta_{22a} = 0: the tangent-normal block evaluated
    # on (e1, e1) plus (e2, e2) vanishes for every theta
    ch = catalog_get("equilateral-s5").chart
    grid = GridSpec(8, 8)
    flag = osculating_flag(ch, grid.nodes(ch))
    C = flag.coord_coeffs
    for th in (0.0, 0.4, pi / 2):
        om_u, om_v = build_connection_tables(ch, grid, FamilyParams(th))
        om_e = [C[..., 0, i, None, None] * om_u + C[..., 1, i, None, None] * om_v
                for i in range(2)]
        # frame columns: 0 position, 1 e1, 2 e2, 3.. normals
        trace = om_e[0][..., 3:, 1] + om_e[1][..., 3:, 2]
        assert np.max(np.abs(trace)) < 1e-12


def test_compatibility_residual_small():
    ch = catalog_get("equilateral-s5").chart
    res = compatibility_residual(ch, GridSpec(64, 64), FamilyParams(pi / 2))
    assert res < 1e-5


def test_euclidean_family_congruent():
    ch = catalog_get("holo-r4").chart
    grid = GridSpec(48, 48)
    A = SampledImmersion.from_chart(ch, grid)
    for th in (pi / 6, 1.0):
        res = integrate_family(ch, grid, FamilyParams(th), substeps=2)
        c = congruence_test(A, SampledImmersion(A.u, A.v, res.points, ch.ambient))
        assert c.residual < 1e-6


def test_generic_mode_family_on_nonisotropic_chart():
    ch = catalog_get("nonisotropic-r5").chart
    grid = GridSpec(24, 24)
    res = integrate_family(ch, grid, FamilyParams(0.0), substeps=2, mode="generic")
    err = np.max(np.linalg.norm(res.points - chart_samples(ch, grid), axis=-1))
    assert err < 1e-6


def test_family_rejects_nonminimal():
    ch = catalog_get("perturbed-nonminimal").chart
    with pytest.raises(NonMinimalChartError):
        integrate_family(ch, GridSpec(12, 12), FamilyParams(0.3))


def test_monodromy_identity_at_theta_zero():
    ch = catalog_get("clifford-s3").chart
    for gen in ch.periods:
        rec = monodromy(ch, FamilyParams(0.0), gen)
        assert rec.dist_to_identity < 1e-7
        assert rec.orthogonality_defect < 1e-8


def test_monodromy_orthogonal_over_theta_grid():
    ch = catalog_get("clifford-s3").chart
    thetas = np.linspace(0, pi, 32, endpoint=False)
    _, ortho = monodromy_distances(ch, thetas, ch.periods[0])
    assert np.max(ortho) < 1e-8


def test_clifford_monodromy_closed_form_and_richardson():
    # rotating the curvature lines by theta/2 turns the (2pi, 0) period into
    # a diagonal curvature-line translation: both circle factors advance by
    # pi, so dist = 2|sin(pi/sqrt 2)|; checked against two path resolutions
    ch = catalog_get("clifford-s3").chart
    expected = 2.0 * abs(sin(pi / sqrt(2.0)))
    d1, _ = monodromy_distances(ch, [pi / 2], (TWO_PI, 0.0), path_steps=128)
    d2, _ = monodromy_distances(ch, [pi / 2], (TWO_PI, 0.0), path_steps=256)
    assert abs(d1[0] - d2[0]) < 1e-6  # Richardson-consistent
    assert abs(d2[0] - expected) < 1e-6


def test_moduli_scan_clifford_finite_with_zero():
    ch = catalog_get("clifford-s3").chart
    scan = moduli_scan(ch, steps=90)
    assert scan.classification == "finite"
    assert scan.detected == [0.0]
    assert scan.refined_distances[0] < 1e-6
    assert scan.distances.shape == (90, 2)
    off = np.delete(scan.distances.max(axis=-1), [0])
    assert np.min(off) > 1e-3  # isolated zero


def test_moduli_scan_needs_periods():
    with pytest.raises(ChartValidationError):
        moduli_scan(catalog_get("holo-r4").chart, steps=16)
    with pytest.raises(ChartValidationError):
        monodromy(catalog_get("holo-r4").chart, FamilyParams(0.0), (1.0, 0.0))


def test_monodromy_single_generator_chart():
    # singly periodic holomorphic curve: closes at theta = 0
    ch = catalog_get("holo-r4-periodic").chart
    rec = monodromy(ch, FamilyParams(0.0), ch.periods[0])
    assert rec.dist_to_identity < 1e-7


def test_monodromy_path_must_stay_in_domain():
    ch = catalog_get("clifford-s3").chart
    with pytest.raises(ChartValidationError):
        monodromy(ch, FamilyParams(0.0), (10 * TWO_PI, 0.0))


def test_family_params_rotation():
    p = FamilyParams(0.0)
    assert np.allclose(p.j_theta, np.eye(2))
    q = FamilyParams(pi / 2).j_theta
    assert np.allclose(q @ q, -np.eye(2), atol=1e-15)
