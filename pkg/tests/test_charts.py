import json

import numpy as np
import pytest

from isofam.catalog import catalog_get, catalog_labels
from isofam.charts import (
    AmbientSpace,
    ExprFormula,
    GridSpec,
    SurfaceChart,
    chart_from_dict,
    chart_to_dict,
    first_fundamental_form,
    hodge_star,
    jet_eval,
    tangent_data,
    validate_periods,
)
from isofam.errors import ChartValidationError
from isofam.formulas import Affine, Const


def graph_chart_r4():
    # (u, v, 0, 0): flat graph chart with identity metric
    coords = [Affine(1, 0), Affine(0, 1), Const(0.0), Const(0.0)]
    return SurfaceChart("graph-r4", AmbientSpace("euclidean", 4), ExprFormula(coords),
                        ((-1.0, 1.0), (-1.0, 1.0)))


def test_jet_eval_clifford_degree_parts():
    ch = catalog_get("clifford-s3").chart
    jets = jet_eval(ch, (0.0, 0.0), 2)
    r = 1.0 / np.sqrt(2.0)
    assert np.allclose(jets.value, [r, 0.0, r, 0.0], atol=1e-15)
    assert np.allclose(jets.partial(1, 0), [0.0, r, 0.0, 0.0], atol=1e-15)


def test_jet_eval_validates():
    ch = catalog_get("clifford-s3").chart
    with pytest.raises(ChartValidationError):
        jet_eval(ch, (0.0, 0.0), 0)
    with pytest.raises(ChartValidationError):
        jet_eval(ch, (100.0, 0.0), 2)


def test_sphere_norm_enforced():
    bad = SurfaceChart("bad", AmbientSpace("sphere", 3),
                       ExprFormula([Affine(1, 0, 1.0), Affine(0, 1), Const(0.2), Const(0.1)]),
                       ((-0.2, 0.2), (-0.2, 0.2)))
    with pytest.raises(ChartValidationError):
        jet_eval(bad, (0.0, 0.0), 1)


def test_first_fundamental_form_examples():
    assert np.allclose(first_fundamental_form(catalog_get("clifford-s3").chart, (0.7, 2.0)),
                       np.diag([0.5, 0.5]), atol=1e-14)
    g = first_fundamental_form(catalog_get("equilateral-s5").chart, (1.0, 0.3))
    assert np.allclose(g, np.array([[2.0, 1.0], [1.0, 2.0]]) / 3.0, atol=1e-14)
    assert np.allclose(first_fundamental_form(graph_chart_r4(), (0.1, -0.4)), np.eye(2), atol=1e-15)


def test_tangent_data_clifford():
    td = tangent_data(catalog_get("clifford-s3").chart, (0.0, 0.0))
    assert np.allclose(td.e1, [0.0, 1.0, 0.0, 0.0], atol=1e-14)
    # J e1 = e2, J^2 = -1
    assert np.allclose(td.j_apply(td.e1), td.e2, atol=1e-14)
    assert np.allclose(td.j_apply(td.j_apply(td.e1)), -td.e1, atol=1e-14)
    # complex-bilinear extension: <E, E> = 0, <E, conj E> = 2
    E = td.E
    assert abs(np.sum(E * E)) < 1e-14
    assert np.sum(E * np.conj(E)) == pytest.approx(2.0)


def test_frame_invariants_on_random_points():
    rng = np.random.default_rng(42)
    for lbl in catalog_labels():
        ch = catalog_get(lbl).chart
        (u0, u1), (v0, v1) = ch.domain
        u = u0 + (u1 - u0) * rng.random(100)
        v = v0 + (v1 - v0) * rng.random(100)
        td = tangent_data(ch, (u, v))
        assert np.max(np.abs(np.sum(td.e1 * td.e2, axis=-1))) < 1e-10
        assert np.max(np.abs(np.linalg.norm(td.e1, axis=-1) - 1)) < 1e-10
        assert np.max(np.abs(np.linalg.norm(td.e2, axis=-1) - 1)) < 1e-10
        if ch.ambient.is_sphere:
            x = jet_eval(ch, (u, v), 1).value
            assert np.max(np.abs(np.sum(x * td.e1, axis=-1))) < 1e-10
            assert np.max(np.abs(np.sum(x * td.e2, axis=-1))) < 1e-10


def test_gauge_continuity_along_rows():
    ch = catalog_get("veronese-s4").chart
    grid = GridSpec(24, 8)
    U, V = grid.nodes(ch)
    td = tangent_data(ch, (U, V))
    overlap1 = np.sum(td.e1[:-1] * td.e1[1:], axis=-1)
    overlap2 = np.sum(td.e2[:-1] * td.e2[1:], axis=-1)
    assert np.all(overlap1 > 0) and np.all(overlap2 > 0)


def test_hodge_star_rules():
    assert np.allclose(hodge_star(np.array([1.0, 0.0])), [0.0, 1.0])
    rng = np.random.default_rng(1)
    w = rng.standard_normal((50, 2))
    assert np.allclose(hodge_star(hodge_star(w)), -w, atol=0)  # ** = -I exactly
    # on E = e1 - i e2: (*w)(E) = -i w(E), consistent with *w = -w o J and JE = iE
    wE = w[:, 0] - 1j * w[:, 1]
    sw = hodge_star(w)
    swE = sw[:, 0] - 1j * sw[:, 1]
    assert np.allclose(swE, -1j * wE, atol=1e-15)


def test_ambient_validation():
    with pytest.raises(ChartValidationError):
        AmbientSpace("hyperbolic", 3)
    amb = AmbientSpace("sphere", 5)
    assert amb.embedding_dim == 6 and amb.max_normal_order == 2
    assert amb.generic_ranks == (2, 1)
    assert AmbientSpace("euclidean", 4).generic_ranks == (2,)


def test_grid_spec_validation():
    with pytest.raises(ChartValidationError):
        GridSpec(4, 16)


def test_periods_validation():
    for lbl in ("clifford-s3", "equilateral-s5", "perturbed-nonminimal"):
        assert validate_periods(catalog_get(lbl).chart) < 1e-10
    bad = SurfaceChart("p", AmbientSpace("euclidean", 4),
                       ExprFormula([Affine(1, 0), Affine(0, 1), Const(0.0), Const(0.0)]),
                       ((0.0, 1.0), (0.0, 1.0)), periods=((1.0, 0.0),))
    with pytest.raises(ChartValidationError):
        validate_periods(bad)


def test_chart_json_round_trip(tmp_path):
    for lbl in catalog_labels():
        ch = catalog_get(lbl).chart
        d = chart_to_dict(ch)
        ch2 = chart_from_dict(json.loads(json.dumps(d)))
        u = np.array([0.6 * ch.domain[0][0] + 0.4 * ch.domain[0][1]])
        v = np.array([0.3 * ch.domain[1][0] + 0.7 * ch.domain[1][1]])
        j1 = jet_eval(ch, (u, v), 3)
        j2 = jet_eval(ch2, (u, v), 3)
        assert np.allclose(j1.c, j2.c, atol=0)

    with pytest.raises(ChartValidationError):
        chart_from_dict({"ambient": {"kind": "sphere", "dim": 3}, "coords": []})
