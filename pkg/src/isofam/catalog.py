"""Built-in example charts with literature-anchored expected properties.

Every ``expected`` record is verified by the analyzer operations in the
test suite (catalog self-test) before being relied on elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi, sqrt

from .charts import AmbientSpace, ExprFormula, SurfaceChart
from .errors import ChartValidationError
from .formulas import U, V, Add, Affine, Const, Cos, Exp, Mul, Pow, Scale, Sin

TWO_PI = 2.0 * pi


@dataclass(frozen=True)
class CatalogEntry:
    label: str
    chart: SurfaceChart
    expected: dict


def _clifford_s3() -> CatalogEntry:
    r = 1.0 / sqrt(2.0)
    coords = [Scale(r, Cos(U)), Scale(r, Sin(U)), Scale(r, Cos(V)), Scale(r, Sin(V))]
    chart = SurfaceChart(
        label="clifford-s3",
        ambient=AmbientSpace("sphere", 3),
        formula=ExprFormula(coords),
        domain=((0.0, TWO_PI), (0.0, TWO_PI)),
        periods=((TWO_PI, 0.0), (0.0, TWO_PI)),
    )
    return CatalogEntry(
        "clifford-s3",
        chart,
        {
            "ambient_dim": 3,
            "substantial": True,
            "isotropic": True,  # vacuously: no plane normal bundle
            "m": 1,
            "ranks": (1,),
            "periodic": True,
            "minimal": True,
            "family_mode": "adapted",
        },
    )


def _veronese_s4() -> CatalogEntry:
    # classical minimal 2-sphere: (x, y, z) on S^2(sqrt 3) mapped through
    # the degree-2 harmonics (xy/√3, xz/√3, yz/√3, (x²−y²)/(2√3), (x²+y²−2z²)/6)
    s3 = sqrt(3.0)
    cu, su, cv, sv = Cos(U), Sin(U), Cos(V), Sin(V)
    coords = [
        Scale(s3, Mul([cu, su, sv, sv])),
        Scale(s3, Mul([cu, sv, cv])),
        Scale(s3, Mul([su, sv, cv])),
        Scale(s3 / 2.0, Mul([Add([Mul([cu, cu]), Scale(-1.0, Mul([su, su]))]), sv, sv])),
        Add([Const(0.5), Scale(-1.5, Mul([cv, cv]))]),
    ]
    chart = SurfaceChart(
        label="veronese-s4",
        ambient=AmbientSpace("sphere", 4),
        formula=ExprFormula(coords),
        domain=((0.0, TWO_PI), (0.35, pi - 0.35)),
        periods=((TWO_PI, 0.0),),
    )
    return CatalogEntry(
        "veronese-s4",
        chart,
        {
            "ambient_dim": 4,
            "substantial": True,
            "isotropic": True,
            "m": 1,
            "ranks": (2,),
            "periodic": False,
            "minimal": True,
            "family_mode": "adapted",
        },
    )


def _equilateral_s5() -> CatalogEntry:
    r = 1.0 / sqrt(3.0)
    upv = Affine(1.0, 1.0)
    coords = [
        Scale(r, Cos(U)),
        Scale(r, Sin(U)),
        Scale(r, Cos(V)),
        Scale(r, Sin(V)),
        Scale(r, Cos(upv)),
        Scale(-r, Sin(upv)),
    ]
    chart = SurfaceChart(
        label="equilateral-s5",
        ambient=AmbientSpace("sphere", 5),
        formula=ExprFormula(coords),
        domain=((0.0, TWO_PI), (0.0, TWO_PI)),
        periods=((TWO_PI, 0.0), (0.0, TWO_PI)),
    )
    return CatalogEntry(
        "equilateral-s5",
        chart,
        {
            "ambient_dim": 5,
            "substantial": True,
            "isotropic": True,
            "m": 2,
            "ranks": (2, 1),
            "periodic": True,
            "minimal": True,
            "family_mode": "adapted",
        },
    )


def _holo_r4() -> CatalogEntry:
    # z -> (z, z^2) as a real surface in R^4
    coords = [
        Affine(1.0, 0.0),
        Affine(0.0, 1.0),
        Add([Pow(U, 2), Scale(-1.0, Pow(V, 2))]),
        Scale(2.0, Mul([U, V])),
    ]
    chart = SurfaceChart(
        label="holo-r4",
        ambient=AmbientSpace("euclidean", 4),
        formula=ExprFormula(coords),
        domain=((-1.0, 1.0), (-1.0, 1.0)),
    )
    return CatalogEntry(
        "holo-r4",
        chart,
        {
            "ambient_dim": 4,
            "substantial": True,
            "isotropic": True,
            "m": 1,
            "ranks": (2,),
            "periodic": False,
            "minimal": True,
            "family_mode": "adapted",
        },
    )


def _holo_r4_periodic() -> CatalogEntry:
    # z -> (cos z, sin z); singly periodic holomorphic curve in C^2 = R^4
    cosh_v = Scale(0.5, Add([Exp(V), Exp(Affine(0.0, -1.0))]))
    sinh_v = Scale(0.5, Add([Exp(V), Scale(-1.0, Exp(Affine(0.0, -1.0)))]))
    coords = [
        Mul([Cos(U), cosh_v]),
        Scale(-1.0, Mul([Sin(U), sinh_v])),
        Mul([Sin(U), cosh_v]),
        Mul([Cos(U), sinh_v]),
    ]
    chart = SurfaceChart(
        label="holo-r4-periodic",
        ambient=AmbientSpace("euclidean", 4),
        formula=ExprFormula(coords),
        domain=((0.0, TWO_PI), (-0.8, 0.8)),
        periods=((TWO_PI, 0.0),),
    )
    return CatalogEntry(
        "holo-r4-periodic",
        chart,
        {
            "ambient_dim": 4,
            "substantial": True,
            "isotropic": True,
            "m": 1,
            "ranks": (2,),
            "periodic": False,  # singly periodic only
            "minimal": True,
            "family_mode": "adapted",
        },
    )


def _nonisotropic_r5() -> CatalogEntry:
    # real part of a holomorphic null curve with <F'', F''> = 4 != 0:
    # minimal and substantial in R^5 but nowhere isotropic
    coords = [
        Add([U, Scale(-1.0 / 3.0, Pow(U, 3)), Mul([U, Pow(V, 2)])]),
        Add([Scale(-1.0, V), Scale(-1.0, Mul([Pow(U, 2), V])), Scale(1.0 / 3.0, Pow(V, 3))]),
        Add([Pow(U, 2), Scale(-1.0, Pow(V, 2))]),
        Add([Scale(0.5, Pow(U, 3)), Scale(-1.5, Mul([U, Pow(V, 2)]))]),
        Add([Scale(-1.5, Mul([Pow(U, 2), V])), Scale(0.5, Pow(V, 3))]),
    ]
    chart = SurfaceChart(
        label="nonisotropic-r5",
        ambient=AmbientSpace("euclidean", 5),
        formula=ExprFormula(coords),
        domain=((0.2, 1.2), (0.2, 1.2)),
    )
    return CatalogEntry(
        "nonisotropic-r5",
        chart,
        {
            "ambient_dim": 5,
            "substantial": True,
            "isotropic": False,
            "m": 2,
            "ranks": (2, 1),
            "periodic": False,
            "minimal": True,
            "family_mode": "generic",
        },
    )


def _perturbed_nonminimal() -> CatalogEntry:
    # non-square product torus in S^3: closed-form, doubly periodic, H != 0
    coords = [
        Scale(0.6, Cos(U)),
        Scale(0.6, Sin(U)),
        Scale(0.8, Cos(V)),
        Scale(0.8, Sin(V)),
    ]
    chart = SurfaceChart(
        label="perturbed-nonminimal",
        ambient=AmbientSpace("sphere", 3),
        formula=ExprFormula(coords),
        domain=((0.0, TWO_PI), (0.0, TWO_PI)),
        periods=((TWO_PI, 0.0), (0.0, TWO_PI)),
    )
    return CatalogEntry(
        "perturbed-nonminimal",
        chart,
        {
            "ambient_dim": 3,
            "substantial": True,
            "isotropic": False,
            "m": 1,
            "ranks": (1,),
            "periodic": True,
            "minimal": False,
            "family_mode": None,
        },
    )


def _holo_r4_cubic() -> CatalogEntry:
    # z -> (z, z^3): isotropic with an isolated rank drop of N_1 at z = 0
    coords = [
        Affine(1.0, 0.0),
        Affine(0.0, 1.0),
        Add([Pow(U, 3), Scale(-3.0, Mul([U, Pow(V, 2)]))]),
        Add([Scale(3.0, Mul([Pow(U, 2), V])), Scale(-1.0, Pow(V, 3))]),
    ]
    chart = SurfaceChart(
        label="holo-r4-cubic",
        ambient=AmbientSpace("euclidean", 4),
        formula=ExprFormula(coords),
        domain=((-1.0, 1.0), (-1.0, 1.0)),
    )
    return CatalogEntry(
        "holo-r4-cubic",
        chart,
        {
            "ambient_dim": 4,
            "substantial": True,
            "isotropic": True,
            "m": 1,
            "ranks": (2,),
            "periodic": False,
            "minimal": True,
            "family_mode": "adapted",
            "l0_points": ((0.0, 0.0),),
        },
    )


_BUILDERS = {
    "clifford-s3": _clifford_s3,
    "veronese-s4": _veronese_s4,
    "equilateral-s5": _equilateral_s5,
    "holo-r4": _holo_r4,
    "holo-r4-periodic": _holo_r4_periodic,
    "nonisotropic-r5": _nonisotropic_r5,
    "perturbed-nonminimal": _perturbed_nonminimal,
    "holo-r4-cubic": _holo_r4_cubic,
}

_CACHE: dict[str, CatalogEntry] = {}


def catalog_labels() -> list[str]:
    return sorted(_BUILDERS)


def catalog_get(label: str) -> CatalogEntry:
    if label not in _BUILDERS:
        raise ChartValidationError(
            f"unknown catalog label {label!r}; available: {', '.join(catalog_labels())}"
        )
    if label not in _CACHE:
        _CACHE[label] = _BUILDERS[label]()
    return _CACHE[label]
