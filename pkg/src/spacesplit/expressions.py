"""Vector fields and observables built from expression strings.

Expressions are in the torus coordinates ``x`` and ``y`` and may use
``pi`` and the usual elementary functions, e.g. ``"0.1*sin(2*pi*y)"``.
Derivatives are taken symbolically, so fields built here always carry
analytic Jacobians and second derivatives.
"""

from __future__ import annotations

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .torus import Observable, VectorField

_x, _y = sp.symbols("x y", real=True)
_LOCALS = {"x": _x, "y": _y, "pi": sp.pi}


def parse(expr) -> sp.Expr:
    try:
        e = parse_expr(str(expr), local_dict=dict(_LOCALS),
                       transformations=standard_transformations)
    except Exception as exc:  # sympy raises a zoo of types here
        raise ValueError(f"cannot parse expression {expr!r}: {exc}") from None
    extra = e.free_symbols - {_x, _y}
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ValueError(f"expression {expr!r} uses unknown symbols: {names}")
    return e


def _compile(e: sp.Expr):
    f = sp.lambdify((_x, _y), e, "numpy")

    def fn(p):
        out = f(p[..., 0], p[..., 1])
        return np.broadcast_to(np.asarray(out, dtype=float), p.shape[:-1]).copy()

    return fn


def field_from_expressions(exprs, name=None) -> VectorField:
    """VectorField with components given by two expression strings."""
    if len(exprs) != 2:
        raise ValueError("a vector field needs exactly two components")
    comps = [parse(e) for e in exprs]
    value_fns = [_compile(c) for c in comps]
    jac_fns = [[_compile(sp.diff(c, v)) for v in (_x, _y)] for c in comps]
    hess_fns = [[[_compile(sp.diff(c, a, b)) for b in (_x, _y)] for a in (_x, _y)]
                for c in comps]

    def value(p):
        return np.stack([f(p) for f in value_fns], axis=-1)

    def jacobian(p):
        return np.stack([np.stack([f(p) for f in row], axis=-1) for row in jac_fns],
                        axis=-2)

    def hessian(p, u, v):
        out = []
        for H in hess_fns:
            acc = 0.0
            for j in range(2):
                for k in range(2):
                    acc = acc + H[j][k](p) * u[..., j] * v[..., k]
            out.append(np.broadcast_to(acc, np.broadcast_shapes(
                p.shape[:-1], np.shape(u)[:-1], np.shape(v)[:-1])))
        return np.stack(out, axis=-1)

    field = VectorField(value, jacobian, hessian,
                        name=name or "(" + ", ".join(map(str, exprs)) + ")")
    field.expressions = [str(e) for e in exprs]
    return field


def observable_from_expression(expr, name=None) -> Observable:
    e = parse(expr)
    value = _compile(e)
    grads = [_compile(sp.diff(e, v)) for v in (_x, _y)]

    def gradient(p):
        return np.stack([g(p) for g in grads], axis=-1)

    obs = Observable(value, gradient, name=name or str(expr))
    obs.expression = str(expr)
    return obs
