import numpy as np
import pytest

from isofam.catalog import catalog_get
from isofam.charts import AmbientSpace, ExprFormula, GridSpec, SurfaceChart
from isofam.errors import InconsistentFlagError, NonMinimalChartError, NumericalError
from isofam.flags import (
    adapted_frame,
    adapted_frame_values,
    connection_forms,
    connection_identity_residuals,
    curvature_ellipse,
    higher_form_apply,
    isotropy_report,
    osculating_flag,
    third_form_crosscheck,
)
from isofam.formulas import Affine, Const, Cos, Mul, Pow, Scale, Sin

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def rand_points(chart, n, seed=0, margin=0.05):
    rng = np.random.default_rng(seed)
    (u0, u1), (v0, v1) = chart.domain
    u = u0 + (u1 - u0) * (margin + (1 - 2 * margin) * rng.random(n))
    v = v0 + (v1 - v0) * (margin + (1 - 2 * margin) * rng.random(n))
    return u, v


@pytest.mark.parametrize("label,m,ranks", [
    ("clifford-s3", 1, (1,)),
    ("veronese-s4", 1, (2,)),
    ("equilateral-s5", 2, (2, 1)),
    ("holo-r4", 1, (2,)),
    ("nonisotropic-r5", 2, (2, 1)),
])
def test_flag_ranks(label, m, ranks):
    ch = catalog_get(label).chart
    flag = osculating_flag(ch, rand_points(ch, 16, seed=3))
    assert flag.m == m
    assert np.all(flag.ranks == np.array(ranks))
    assert np.all(flag.regular)
    assert np.all(flag.substantial)


def test_flag_orthogonality_gram():
    # Gram matrix of (position, e1, e2, level bases) is the identity
    ch = catalog_get("equilateral-s5").chart
    flag = osculating_flag(ch, rand_points(ch, 8, seed=5))
    frame, _, _ = adapted_frame_values(flag)
    gram = np.einsum("...da,...db->...ab", frame, frame)
    assert np.max(np.abs(gram - np.eye(frame.shape[-1]))) < 1e-10


def test_minimality_and_shape_operator_of_clifford():
    ch = catalog_get("clifford-s3").chart
    flag = osculating_flag(ch, rand_points(ch, 12, seed=1))
    a11 = higher_form_apply(flag, 2, [E1, E1])
    a22 = higher_form_apply(flag, 2, [E2, E2])
    a12 = higher_form_apply(flag, 2, [E1, E2])
    # principal curvatures +-1 in the curvature-line directions
    assert np.allclose(np.linalg.norm(a11, axis=-1), 1.0, atol=1e-12)
    assert np.allclose(a11 + a22, 0.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(a12, axis=-1), 0.0, atol=1e-12)


def test_higher_form_symmetry_and_range():
    ch = catalog_get("equilateral-s5").chart
    flag = osculating_flag(ch, rand_points(ch, 6, seed=2))
    rng = np.random.default_rng(7)
    X, Y, Z = rng.standard_normal((3, 2))
    v1 = higher_form_apply(flag, 3, [X, Y, Z])
    v2 = higher_form_apply(flag, 3, [Z, X, Y])
    assert np.allclose(v1, v2, atol=0)  # symmetric by storage
    with pytest.raises(ValueError):
        higher_form_apply(flag, 4, [X] * 4)


def test_traceless_alpha2_on_minimal_charts():
    for lbl in ("veronese-s4", "equilateral-s5", "holo-r4", "nonisotropic-r5"):
        ch = catalog_get(lbl).chart
        flag = osculating_flag(ch, rand_points(ch, 10, seed=4))
        tr = higher_form_apply(flag, 2, [E1, E1]) + higher_form_apply(flag, 2, [E2, E2])
        assert np.max(np.linalg.norm(tr, axis=-1)) < 1e-10


def test_curvature_ellipse_veronese_circular():
    ch = catalog_get("veronese-s4").chart
    flag = osculating_flag(ch, rand_points(ch, 20, seed=6))
    ell = curvature_ellipse(flag, 1)
    assert np.max(ell.circularity_dev) < 1e-9
    assert np.max(ell.center_norm) < 1e-10
    # samples stay inside the detected normal plane
    basis = flag.levels[0].basis
    proj = ell.samples - np.einsum("...pd,...rd,...re->...pe", ell.samples, basis, basis)
    assert np.max(np.linalg.norm(proj, axis=-1)) < 1e-10


def test_curvature_ellipse_noncircular_control():
    ch = catalog_get("nonisotropic-r5").chart
    flag = osculating_flag(ch, rand_points(ch, 20, seed=8))
    assert np.min(curvature_ellipse(flag, 1).circularity_dev) > 0.1


def test_kappa_matches_ellipse_radius():
    ch = catalog_get("equilateral-s5").chart
    flag = osculating_flag(ch, rand_points(ch, 6, seed=9))
    _, _, kappas, res = adapted_frame(ch, rand_points(ch, 6, seed=9))
    ell = curvature_ellipse(flag, 1)
    assert np.max(np.abs(kappas[..., 0] - ell.radius)) < 1e-10
    assert np.max(res) < 1e-10


def test_adapted_frame_rejects_nonisotropic():
    ch = catalog_get("nonisotropic-r5").chart
    with pytest.raises(NumericalError):
        adapted_frame(ch, rand_points(ch, 4, seed=10))


def test_isotropy_reports():
    rep = isotropy_report(catalog_get("clifford-s3").chart, GridSpec(16, 16))
    assert rep.max_dev == 0.0 and rep.isotropic  # vacuous: no plane bundles
    rep = isotropy_report(catalog_get("equilateral-s5").chart, GridSpec(64, 64))
    assert rep.max_dev < 1e-8 and not rep.suspected_nonregular
    rep = isotropy_report(catalog_get("holo-r4").chart, GridSpec(32, 32))
    assert rep.max_dev < 1e-8


def test_isotropy_rejects_nonminimal_with_trace():
    with pytest.raises(NonMinimalChartError) as exc:
        isotropy_report(catalog_get("perturbed-nonminimal").chart, GridSpec(16, 16))
    assert exc.value.trace_norm > 0.1
    assert len(exc.value.point) == 2


def test_rank_drop_cells_are_isolated():
    rep = isotropy_report(catalog_get("holo-r4-cubic").chart, GridSpec(33, 33))
    assert rep.suspected_nonregular == [(16, 16)]  # the origin, one isolated cell


def test_rank_exceeding_two_is_inconsistent_input():
    # non-minimal with 3-dimensional first normal space
    coords = [Affine(1, 0), Affine(0, 1), Pow(Affine(1, 0), 2), Mul([Affine(1, 0), Affine(0, 1)]),
              Pow(Affine(0, 1), 2)]
    ch = SurfaceChart("bad", AmbientSpace("euclidean", 5), ExprFormula(coords),
                      ((-1.0, 1.0), (-1.0, 1.0)))
    with pytest.raises(InconsistentFlagError):
        osculating_flag(ch, (np.array([0.2]), np.array([0.1])))


def test_non_substantial_chart_flagged():
    # equatorial Clifford torus inside S^5: flag stops short of the ambient
    r = 1.0 / np.sqrt(2.0)
    coords = [Scale(r, Cos(Affine(1, 0))), Scale(r, Sin(Affine(1, 0))),
              Scale(r, Cos(Affine(0, 1))), Scale(r, Sin(Affine(0, 1))),
              Const(0.0), Const(0.0)]
    ch = SurfaceChart("cliff-in-s5", AmbientSpace("sphere", 5), ExprFormula(coords),
                      ((0.0, 2 * np.pi), (0.0, 2 * np.pi)))
    flag = osculating_flag(ch, (np.array([0.3]), np.array([0.9])))
    assert not flag.substantial.any()
    assert not flag.regular.any()


def test_translation_invariance_of_homogeneous_flags():
    ch = catalog_get("equilateral-s5").chart
    u, v = rand_points(ch, 8, seed=11)
    f1 = osculating_flag(ch, (u, v))
    f2 = osculating_flag(ch, (u + 0.83, v + 1.21))
    assert np.all(f1.ranks == f2.ranks)
    e1 = curvature_ellipse(f1, 1)
    e2 = curvature_ellipse(f2, 1)
    assert np.allclose(e1.radius, e2.radius, atol=1e-10)
    assert np.allclose(e1.circularity_dev, e2.circularity_dev, atol=1e-10)


def test_third_form_cross_definition():
    for lbl in ("equilateral-s5", "nonisotropic-r5"):
        ch = catalog_get(lbl).chart
        u, v = rand_points(ch, 20, seed=12)
        assert third_form_crosscheck(ch, u, v) < 1e-6


def test_connection_identities_on_catalog():
    forms = connection_forms(catalog_get("equilateral-s5").chart, GridSpec(12, 12), fd_step=1e-3)
    resid = connection_identity_residuals(forms)
    assert set(resid) == {"con1a[s=1]", "con1b[s=1]", "con2a[s=1]", "con2b[s=1]",
                          "coni-a[s=1]", "coni-b[s=1]", "conii[s=1]", "con3", "coniii"}
    assert max(resid.values()) < 1e-6
    # antisymmetry is exact by construction
    om = forms.omega
    assert np.max(np.abs(om + np.swapaxes(om, -1, -2))) == 0.0
    # n = 1 battery reduces to the tangent-indexed final identity
    forms2 = connection_forms(catalog_get("clifford-s3").chart, GridSpec(10, 10), fd_step=1e-3)
    resid2 = connection_identity_residuals(forms2)
    assert set(resid2) == {"con3", "coniii"}
    assert max(resid2.values()) < 1e-6
