"""Truncated bivariate Taylor (jet) arithmetic.

A jet of order ``r`` stores the coefficients c_ab of the monomials
du^a dv^b with a + b <= r, i.e. the Taylor expansion of a smooth function
of two variables about a base point.  Arithmetic (+, -, *, composition
with sin/cos/exp/sqrt/1/x) is exact truncation of the formal power
series, so extracted partial derivatives carry no step-size error.

Coefficient arrays have shape ``(*batch, K)`` where K is the number of
monomials; all operations broadcast over the batch axes, which is how
whole parameter grids are processed at once.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def monomials(order: int) -> tuple[tuple[int, int], ...]:
    """(a, b) exponent pairs with a+b <= order, graded order."""
    out = []
    for d in range(order + 1):
        for b in range(d + 1):
            out.append((d - b, b))
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_index(order: int) -> dict[tuple[int, int], int]:
    return {ab: k for k, ab in enumerate(monomials(order))}


def n_coeffs(order: int) -> int:
    return (order + 1) * (order + 2) // 2


@lru_cache(maxsize=None)
def _mul_table(order: int) -> tuple[tuple[int, int, int], ...]:
    """Triples (k1, k2, k3): product of monomials k1*k2 lands in k3."""
    mono = monomials(order)
    idx = monomial_index(order)
    triples = []
    for k1, (a1, b1) in enumerate(mono):
        for k2, (a2, b2) in enumerate(mono):
            a, b = a1 + a2, b1 + b2
            if a + b <= order:
                triples.append((k1, k2, idx[(a, b)]))
    return tuple(triples)


@lru_cache(maxsize=None)
def _shift_table(order: int, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Index/scale arrays mapping a jet to the jet of its (a,b) partial.

    The resulting jet has order ``order - a - b``; coefficient (p, q) is
    c_{p+a, q+b} * (p+a)!/p! * (q+b)!/q!.
    """
    new_order = order - a - b
    idx = monomial_index(order)
    src = []
    scale = []
    for (p, q) in monomials(new_order):
        src.append(idx[(p + a, q + b)])
        scale.append(factorial(p + a) // factorial(p) * (factorial(q + b) // factorial(q)))
    return np.array(src), np.array(scale, dtype=float)


class Jet2:
    """Truncated Taylor series in two variables, batched over leading axes."""

    __slots__ = ("order", "c")

    def __init__(self, order: int, c: np.ndarray):
        self.order = order
        self.c = c

    # -- constructors -------------------------------------------------

    @classmethod
    def constant(cls, value, order: int) -> "Jet2":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (n_coeffs(order),))
        c[..., 0] = value
        return cls(order, c)

    @classmethod
    def variable(cls, value, which: str, order: int) -> "Jet2":
        """Jet of the coordinate function u or v at base value ``value``."""
        j = cls.constant(value, order)
        if order >= 1:
            key = (1, 0) if which == "u" else (0, 1)
            j.c[..., monomial_index(order)[key]] = 1.0
        return j

    @classmethod
    def zeros(cls, batch_shape: tuple, order: int) -> "Jet2":
        return cls(order, np.zeros(tuple(batch_shape) + (n_coeffs(order),)))

    @staticmethod
    def stack(jets: list["Jet2"], axis: int = -1) -> "Jet2":
        """Stack jets along a new batch axis (before the coefficient axis)."""
        order = jets[0].order
        ax = axis if axis >= 0 else axis - 1
        return Jet2(order, np.stack([j.c for j in jets], axis=ax))

    # -- views ---------------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    @property
    def batch_shape(self) -> tuple:
        return self.c.shape[:-1]

    def component(self, i: int) -> "Jet2":
        """Select index i of the last batch axis (vector component)."""
        return Jet2(self.order, self.c[..., i, :])

    def partial(self, a: int, b: int) -> np.ndarray:
        """Value of d^a_u d^b_v at the base point."""
        k = monomial_index(self.order).get((a, b))
        if k is None:
            raise ValueError(f"partial ({a},{b}) exceeds jet order {self.order}")
        return self.c[..., k] * (factorial(a) * factorial(b))

    def partial_jet(self, a: int, b: int, order: int | None = None) -> "Jet2":
        """Jet (of lower order) of the partial derivative d^a_u d^b_v."""
        new_order = self.order - a - b
        src, scale = _shift_table(self.order, a, b)
        j = Jet2(new_order, self.c[..., src] * scale)
        if order is not None:
            j = j.truncate(order)
        return j

    def truncate(self, order: int) -> "Jet2":
        if order > self.order:
            raise ValueError("cannot extend a jet")
        return Jet2(order, self.c[..., : n_coeffs(order)].copy())

    def nilpotent(self) -> "Jet2":
        """Same jet with the constant term removed."""
        c = self.c.copy()
        c[..., 0] = 0.0
        return Jet2(self.order, c)

    def sum(self, axis: int) -> "Jet2":
        """Sum over one batch axis."""
        ax = axis if axis >= 0 else axis - 1
        return Jet2(self.order, self.c.sum(axis=ax))

    def expand_dims(self, axis: int) -> "Jet2":
        ax = axis if axis >= 0 else axis - 1
        return Jet2(self.order, np.expand_dims(self.c, ax))

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return Jet2(self.order, self.c + other.c)
        c = self.c.copy()
        c[..., 0] = c[..., 0] + other
        return Jet2(self.order, c)

    __radd__ = __add__

    def __neg__(self) -> "Jet2":
        return Jet2(self.order, -self.c)

    def __sub__(self, other) -> "Jet2":
        return self + (-other if isinstance(other, Jet2) else -np.asarray(other))

    def __rsub__(self, other) -> "Jet2":
        return (-self) + other

    def __mul__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            return Jet2(self.order, self.c * np.asarray(other)[..., None])
        a, b = self.c, other.c
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        out = np.zeros(shape + (a.shape[-1],))
        for k1, k2, k3 in _mul_table(self.order):
            out[..., k3] += a[..., k1] * b[..., k2]
        return Jet2(self.order, out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return self * jinv(other)
        return Jet2(self.order, self.c / np.asarray(other)[..., None])


def _horner(coeffs: list, h: Jet2) -> Jet2:
    """Evaluate sum coeffs[k] * h^k for nilpotent h (Horner)."""
    out = Jet2.constant(np.broadcast_to(np.asarray(coeffs[-1], dtype=float), h.batch_shape), h.order)
    for a in reversed(coeffs[:-1]):
        out = out * h + a
    return out


def jsin(j: Jet2) -> Jet2:
    c0 = j.value
    h = j.nilpotent()
    n = j.order
    sin_ser = [0.0 if k % 2 == 0 else float((-1) ** (k // 2)) / factorial(k) for k in range(n + 1)]
    cos_ser = [0.0 if k % 2 == 1 else float((-1) ** (k // 2)) / factorial(k) for k in range(n + 1)]
    return _horner(cos_ser, h) * np.sin(c0) + _horner(sin_ser, h) * np.cos(c0)


def jcos(j: Jet2) -> Jet2:
    c0 = j.value
    h = j.nilpotent()
    n = j.order
    sin_ser = [0.0 if k % 2 == 0 else float((-1) ** (k // 2)) / factorial(k) for k in range(n + 1)]
    cos_ser = [0.0 if k % 2 == 1 else float((-1) ** (k // 2)) / factorial(k) for k in range(n + 1)]
    return _horner(cos_ser, h) * np.cos(c0) - _horner(sin_ser, h) * np.sin(c0)


def jexp(j: Jet2) -> Jet2:
    h = j.nilpotent()
    ser = [1.0 / factorial(k) for k in range(j.order + 1)]
    return _horner(ser, h) * np.exp(j.value)


def _binom_series(alpha: float, order: int) -> list[float]:
    """Coefficients of (1 + t)^alpha."""
    out = [1.0]
    for k in range(1, order + 1):
        out.append(out[-1] * (alpha - (k - 1)) / k)
    return out


def _normalized(j: Jet2) -> tuple[np.ndarray, Jet2]:
    c0 = j.value
    if np.any(c0 <= 0):
        raise FloatingPointError("jet composition needs a positive constant term")
    t = Jet2(j.order, j.c / c0[..., None]).nilpotent()
    return c0, t


def jsqrt(j: Jet2) -> Jet2:
    c0, t = _normalized(j)
    return _horner(_binom_series(0.5, j.order), t) * np.sqrt(c0)


def jinvsqrt(j: Jet2) -> Jet2:
    c0, t = _normalized(j)
    return _horner(_binom_series(-0.5, j.order), t) / np.sqrt(c0)


def jinv(j: Jet2) -> Jet2:
    c0 = j.value
    if np.any(c0 == 0):
        raise FloatingPointError("jet reciprocal needs a nonzero constant term")
    t = Jet2(j.order, j.c / c0[..., None]).nilpotent()
    return _horner(_binom_series(-1.0, j.order), t) / c0


# -- jet-vector helpers (vectors = jets whose last batch axis is ambient) --


def jdot(a: Jet2, b: Jet2) -> Jet2:
    return (a * b).sum(axis=-1)


def jnormalize(v: Jet2) -> Jet2:
    return v * jinvsqrt(jdot(v, v)).expand_dims(-1)


def jproject_out(v: Jet2, basis: list[Jet2]) -> Jet2:
    """Remove the components of v along each (orthonormal) basis vector."""
    for b in basis:
        v = v - b * jdot(v, b).expand_dims(-1)
    return v


def jcross_rows(rows: list[list]) -> list:
    """Generalized cross product of d-1 vectors in R^d.

    ``rows[i]`` is a list of d scalars (Jet2 or ndarray).  Returns the d
    components of the vector c with <c, w> = det(rows..., w); the frame
    (rows..., c) is positively oriented.  Uses minor expansion with
    shared submatrix determinants.
    """
    d = len(rows[0])
    if len(rows) != d - 1:
        raise ValueError("need d-1 vectors in dimension d")
    minors = {(j,): rows[0][j] for j in range(d)}
    for k in range(2, d):
        row = rows[k - 1]
        new: dict[tuple, object] = {}
        for cols in combinations(range(d), k):
            acc = None
            for p, j in enumerate(cols):
                rest = tuple(c for c in cols if c != j)
                term = row[j] * minors[rest]
                if (k + p + 1) % 2 == 1:
                    term = -term
                acc = term if acc is None else acc + term
            new[cols] = acc
        minors = new
    full = tuple(range(d))
    out = []
    for j in range(d):
        m = minors[tuple(c for c in full if c != j)]
        # expansion of det([rows; e_j]) along the final row
        out.append(-m if (d + j + 1) % 2 == 1 else m)
    return out
