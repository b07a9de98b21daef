import numpy as np
import pytest

from isofam.jets import (
    Jet2,
    jcos,
    jcross_rows,
    jdot,
    jexp,
    jinv,
    jinvsqrt,
    jnormalize,
    jsin,
    jsqrt,
)


def _vars(u0, v0, order):
    return Jet2.variable(np.asarray(u0), "u", order), Jet2.variable(np.asarray(v0), "v", order)


def test_polynomial_product_is_exact_truncation():
    # (u + 2v)^2 * (3u - v): every retained coefficient matches the expansion
    ju, jv = _vars(0.0, 0.0, 3)
    f = (ju + jv * 2.0) * (ju + jv * 2.0) * (ju * 3.0 - jv)
    # 3u^3 + 11u^2 v + 8uv^2 - 4v^3
    assert f.partial(3, 0) == pytest.approx(18.0)  # 3! * 3
    assert f.partial(2, 1) == pytest.approx(22.0)  # 2! * 11
    assert f.partial(1, 2) == pytest.approx(16.0)  # 2! * 8
    assert f.partial(0, 3) == pytest.approx(-24.0)
    assert f.partial(0, 0) == 0.0


def test_chain_rule_for_composed_angle():
    # sin(a u + b v) derivatives match the closed form a^p b^q sin/cos
    a, b, u0, v0 = 1.3, -0.7, 0.4, 1.1
    ju, jv = _vars(u0, v0, 6)
    f = jsin(ju * a + jv * b)
    phase = a * u0 + b * v0
    for p in range(5):
        for q in range(5 - p):
            k = p + q
            ref = a**p * b**q * (np.sin(phase) if k % 4 == 0 else
                                 np.cos(phase) if k % 4 == 1 else
                                 -np.sin(phase) if k % 4 == 2 else -np.cos(phase))
            assert f.partial(p, q) == pytest.approx(ref, abs=1e-13)


def test_second_derivative_of_scaled_cosine():
    ju, _ = _vars(0.0, 0.0, 2)
    f = jcos(ju) * (1.0 / np.sqrt(2.0))
    assert f.partial(2, 0) == pytest.approx(-1.0 / np.sqrt(2.0))


def test_exp_sqrt_inv_consistency():
    ju, jv = _vars(0.3, -0.2, 5)
    g = jexp(ju * 0.5 + jv)
    one = Jet2.constant(np.asarray(1.0), 5)
    assert np.allclose((jsqrt(g) * jsqrt(g)).c, g.c, atol=1e-14)
    assert np.allclose((jinv(g) * g).c, one.c, atol=1e-14)
    assert np.allclose((jinvsqrt(g) * jinvsqrt(g) * g).c, one.c, atol=1e-14)


def test_finite_difference_cross_check():
    # spec oracle: compare jet coefficients against central differences
    def f(u, v):
        return np.sin(1.2 * u - 0.4 * v) * (1 + u * v) + np.exp(0.3 * v)

    u0, v0, h = 0.25, 0.6, 1e-2
    ju, jv = _vars(u0, v0, 6)
    jf = jsin(ju * 1.2 - jv * 0.4) * (ju * jv + 1.0) + jexp(jv * 0.3)

    # 4th-order central differences on a 5x5 stencil per mixed partial
    w = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    w2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    offs = np.arange(-2, 3)
    grid = np.array([[f(u0 + i * h, v0 + j * h) for j in offs] for i in offs])

    def fd(p, q):
        wu = w if p == 1 else w2 if p == 2 else np.eye(5)[2]
        wv = w if q == 1 else w2 if q == 2 else np.eye(5)[2]
        return wu @ grid @ wv / h ** (p + q)

    for p in range(3):
        for q in range(3 - p):
            ref = fd(p, q)
            got = jf.partial(p, q)
            assert abs(got - ref) < 1e-6 * max(1.0, abs(got))


def test_batched_matches_scalar():
    u = np.linspace(0.1, 1.0, 7)
    v = np.linspace(-0.5, 0.5, 7)
    ju = Jet2.variable(u, "u", 4)
    jv = Jet2.variable(v, "v", 4)
    f = jcos(ju) * jsin(jv) + jexp(ju * 0.1)
    for k in (0, 3, 6):
        su, sv = _vars(u[k], v[k], 4)
        single = jcos(su) * jsin(sv) + jexp(su * 0.1)
        assert np.allclose(f.c[k], single.c, atol=1e-15)


def test_partial_jet_shift():
    ju, jv = _vars(0.7, 0.2, 5)
    f = jsin(ju) * jcos(jv * 2.0)
    d = f.partial_jet(1, 2, order=2)
    for p in range(2):
        for q in range(2 - p):
            assert d.partial(p, q) == pytest.approx(f.partial(p + 1, q + 2), rel=1e-12)


def test_vector_helpers_and_normalization():
    rng = np.random.default_rng(0)
    ju = Jet2.variable(rng.random(5), "u", 2)
    jv = Jet2.variable(rng.random(5), "v", 2)
    vec = Jet2.stack([jsin(ju), jcos(jv), ju * jv + 2.0], axis=-1)
    n = jnormalize(vec)
    assert np.allclose(jdot(n, n).value, 1.0, atol=1e-14)
    # derivative of |n|^2 vanishes identically
    assert np.allclose(jdot(n, n).c[..., 1:], 0.0, atol=1e-13)


@pytest.mark.parametrize("d", [4, 6])
def test_generalized_cross_product(d):
    rng = np.random.default_rng(d)
    rows = [list(rng.standard_normal(d)) for _ in range(d - 1)]
    c = np.array(jcross_rows(rows))
    for r in rows:
        assert abs(np.dot(c, np.array(r))) < 1e-11
    M = np.vstack([np.array(r) for r in rows] + [c])
    assert np.linalg.det(M) > 0
    assert np.linalg.det(M) == pytest.approx(np.dot(c, c), rel=1e-10)
