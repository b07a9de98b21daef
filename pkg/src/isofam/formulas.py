"""Closed-form chart coordinate functions as composition trees.

The primitive set (affine maps of the parameters, sums, products,
integer powers, sin, cos, exp) is closed under jet arithmetic and covers
the whole chart catalog.  Trees serialize to/from plain dicts so charts
can be shipped as JSON definition files.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet2, jcos, jexp, jsin


class Expr:
    """Base node; subclasses implement jet() and to_dict()."""

    def jet(self, ju: Jet2, jv: Jet2) -> Jet2:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    # operator sugar used by the catalog definitions
    def __add__(self, other):
        return Add([self, _as_expr(other)])

    def __radd__(self, other):
        return Add([_as_expr(other), self])

    def __sub__(self, other):
        return Add([self, Scale(-1.0, _as_expr(other))])

    def __rsub__(self, other):
        return Add([_as_expr(other), Scale(-1.0, self)])

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Scale(float(other), self)
        return Mul([self, _as_expr(other)])

    __rmul__ = __mul__

    def __neg__(self):
        return Scale(-1.0, self)

    def __pow__(self, n: int):
        return Pow(self, int(n))


def _as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(float(x))


class Const(Expr):
    def __init__(self, value: float):
        self.value = float(value)

    def jet(self, ju, jv):
        return Jet2.constant(np.broadcast_to(self.value, ju.batch_shape), ju.order)

    def to_dict(self):
        return {"op": "const", "value": self.value}


class Affine(Expr):
    """cu*u + cv*v + c0."""

    def __init__(self, cu: float, cv: float, c0: float = 0.0):
        self.cu, self.cv, self.c0 = float(cu), float(cv), float(c0)

    def jet(self, ju, jv):
        return ju * self.cu + jv * self.cv + self.c0

    def to_dict(self):
        return {"op": "affine", "cu": self.cu, "cv": self.cv, "c0": self.c0}


class Add(Expr):
    def __init__(self, args: list[Expr]):
        self.args = list(args)

    def jet(self, ju, jv):
        out = self.args[0].jet(ju, jv)
        for a in self.args[1:]:
            out = out + a.jet(ju, jv)
        return out

    def to_dict(self):
        return {"op": "add", "args": [a.to_dict() for a in self.args]}


class Mul(Expr):
    def __init__(self, args: list[Expr]):
        self.args = list(args)

    def jet(self, ju, jv):
        out = self.args[0].jet(ju, jv)
        for a in self.args[1:]:
            out = out * a.jet(ju, jv)
        return out

    def to_dict(self):
        return {"op": "mul", "args": [a.to_dict() for a in self.args]}


class Scale(Expr):
    def __init__(self, factor: float, arg: Expr):
        self.factor, self.arg = float(factor), arg

    def jet(self, ju, jv):
        return self.arg.jet(ju, jv) * self.factor

    def to_dict(self):
        return {"op": "scale", "factor": self.factor, "arg": self.arg.to_dict()}


class Pow(Expr):
    def __init__(self, arg: Expr, n: int):
        if n < 0:
            raise ValueError("negative powers are not in the primitive set")
        self.arg, self.n = arg, int(n)

    def jet(self, ju, jv):
        if self.n == 0:
            return Jet2.constant(np.broadcast_to(1.0, ju.batch_shape), ju.order)
        base = self.arg.jet(ju, jv)
        out = base
        for _ in range(self.n - 1):
            out = out * base
        return out

    def to_dict(self):
        return {"op": "pow", "n": self.n, "arg": self.arg.to_dict()}


class _Unary(Expr):
    fn = None
    name = ""

    def __init__(self, arg: Expr):
        self.arg = arg

    def jet(self, ju, jv):
        return type(self).fn(self.arg.jet(ju, jv))

    def to_dict(self):
        return {"op": self.name, "arg": self.arg.to_dict()}


class Sin(_Unary):
    fn = staticmethod(jsin)
    name = "sin"


class Cos(_Unary):
    fn = staticmethod(jcos)
    name = "cos"


class Exp(_Unary):
    fn = staticmethod(jexp)
    name = "exp"


U = Affine(1.0, 0.0)
V = Affine(0.0, 1.0)


def expr_from_dict(d: dict) -> Expr:
    op = d["op"]
    if op == "const":
        return Const(d["value"])
    if op == "affine":
        return Affine(d["cu"], d["cv"], d.get("c0", 0.0))
    if op == "u":
        return Affine(1.0, 0.0)
    if op == "v":
        return Affine(0.0, 1.0)
    if op == "add":
        return Add([expr_from_dict(a) for a in d["args"]])
    if op == "mul":
        return Mul([expr_from_dict(a) for a in d["args"]])
    if op == "scale":
        return Scale(d["factor"], expr_from_dict(d["arg"]))
    if op == "pow":
        return Pow(expr_from_dict(d["arg"]), d["n"])
    if op == "neg":
        return Scale(-1.0, expr_from_dict(d["arg"]))
    if op in ("sin", "cos", "exp"):
        cls = {"sin": Sin, "cos": Cos, "exp": Exp}[op]
        return cls(expr_from_dict(d["arg"]))
    raise ValueError(f"unknown expression op {op!r}")
