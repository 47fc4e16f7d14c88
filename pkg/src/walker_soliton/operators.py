"""Differential operators on Walker metrics: gradient, divergence,
Laplace-Beltrami, Hessian and the Lie derivative of the metric."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Mapping, Sequence

import numpy as np

from .curvature import christoffel_general
from .expr import ZERO, Expr, X, Y, add, as_expr, differentiate, evaluate_many, mul, power
from .walker import COVARIANT, SymTensor2, WalkerMetric, inverse_metric, metric_components

_C = ("x", "y", "u", "v")


@dataclass(frozen=True, eq=False)
class VectorField:
    """Contravariant components ``(X^x, X^y, X^u, X^v)``."""

    comps: tuple[Expr, Expr, Expr, Expr]

    def __post_init__(self):
        if len(self.comps) != 4:
            raise ValueError("a vector field has four components")
        object.__setattr__(self, "comps", tuple(as_expr(c) for c in self.comps))

    @classmethod
    def of(cls, *comps) -> "VectorField":
        if len(comps) == 1 and not isinstance(comps[0], (Expr, str, int, float)):
            comps = tuple(comps[0])
        return cls(tuple(as_expr(c) for c in comps))

    @classmethod
    def zero(cls) -> "VectorField":
        return cls((ZERO,) * 4)

    def __getitem__(self, i: int) -> Expr:
        return self.comps[i]

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(add(a, b) for a, b in zip(self.comps, other.comps)))

    def scale(self, factor) -> "VectorField":
        return VectorField(tuple(mul(factor, c) for c in self.comps))

    def evaluate(self, points, params: Mapping[str, float] | None = None) -> np.ndarray:
        return evaluate_many(list(self.comps), points, params).T

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.comps) + ")"


def gradient(m: WalkerMetric, f) -> VectorField:
    f = as_expr(f)
    gi = inverse_metric(m)
    df = [differentiate(f, c) for c in _C]
    return VectorField(tuple(add(*(mul(gi[i, j], df[j]) for j in range(4))) for i in range(4)))


def divergence(m: WalkerMetric, X: VectorField, density: bool = False) -> Expr:
    """Coordinate divergence; valid because the metric has unit determinant.

    With ``density=True`` the general form (1/sqrt|g|) d_i(sqrt|g| X^i) is
    used with the symbolic determinant.
    """
    if not density:
        return add(*(differentiate(X[i], _C[i]) for i in range(4)))
    root = power(determinant_expr(m), 0.5)
    return mul(power(root, -1.0), add(*(differentiate(mul(root, X[i]), _C[i]) for i in range(4))))


def determinant_expr(m: WalkerMetric) -> Expr:
    """Symbolic determinant of the metric by the Leibniz expansion."""
    g = metric_components(m).matrix()
    terms = []
    for perm in permutations(range(4)):
        sign = _perm_sign(perm)
        factors = [g[i][perm[i]] for i in range(4)]
        if any(f.is_zero() for f in factors):
            continue
        terms.append(mul(float(sign), *factors))
    return add(*terms)


def _perm_sign(perm: Sequence[int]) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def laplacian(m: WalkerMetric, f, variant: str = "general") -> Expr:
    """Laplace-Beltrami operator.

    ``general``: d_i(g^ij d_j f).  ``closed``: the expanded Walker form
    -f1 f_xx - 2 f2 f_xy - f3 f_yy + 2 f_xu + 2 f_yv
    - (d_x f1 + d_y f2) f_x - (d_x f2 + d_y f3) f_y.
    """
    f = as_expr(f)
    if variant == "general":
        gi = inverse_metric(m)
        df = [differentiate(f, c) for c in _C]
        flux = [add(*(mul(gi[i, j], df[j]) for j in range(4))) for i in range(4)]
        return add(*(differentiate(flux[i], _C[i]) for i in range(4)))
    if variant == "closed":
        f1, f2, f3 = m.potentials
        d = differentiate
        fx, fy = d(f, "x"), d(f, "y")
        return (-f1 * d(fx, "x") - 2 * f2 * d(fx, "y") - f3 * d(fy, "y")
                + 2 * d(fx, "u") + 2 * d(fy, "v")
                - (d(f1, "x") + d(f2, "y")) * fx - (d(f2, "x") + d(f3, "y")) * fy)
    raise ValueError(f"unknown variant {variant!r}")


def hessian(m: WalkerMetric, f, literal: bool = False) -> SymTensor2:
    """Covariant Hessian d_i d_j f - Gamma^k_ij d_k f.

    ``literal=True`` returns the printed component list instead, slips
    included; it exists only to be compared against the general route.
    """
    f = as_expr(f)
    if literal:
        return _hessian_literal(m, f)
    G = christoffel_general(m).gamma
    df = [differentiate(f, c) for c in _C]

    def entry(i, j):
        second = differentiate(df[i], _C[j])
        return add(second, *(mul(-1.0, G[k][i][j], df[k]) for k in range(4) if not G[k][i][j].is_zero()))

    return SymTensor2.build(entry, COVARIANT)


def _partials(f: Expr):
    d = differentiate
    first = {c: d(f, c) for c in _C}
    second = {a + b: d(first[a], b) for a in _C for b in _C}
    return first, second


def _hessian_literal(m: WalkerMetric, f: Expr) -> SymTensor2:
    f1, f2, f3 = m.potentials
    d = differentiate
    p, pp = _partials(f)
    fx, fy, fu, fv = p["x"], p["y"], p["u"], p["v"]
    h = 0.5
    rows = [[None] * 4 for _ in range(4)]
    rows[0][0] = pp["xx"]
    rows[0][1] = pp["xy"]
    rows[0][2] = pp["xu"] - h * d(f1, "x") * fx - h * d(f2, "x") * fy
    rows[0][3] = pp["xv"] - h * d(f2, "x") - h * d(f3, "x")
    rows[1][1] = pp["yy"]
    rows[1][2] = pp["yu"] - h * d(f1, "y") * fx - h * d(f2, "y") * fy
    rows[1][3] = pp["yv"] - h * d(f2, "y") * fx - h * d(f3, "y") * fy
    rows[2][2] = (pp["uu"]
                  - h * (f1 * d(f1, "x") + f2 * d(f1, "y") + d(f1, "u")) * fx
                  - h * (f2 * d(f1, "x") + f3 * d(f1, "y") + 2 * d(f2, "u") - d(f1, "v")) * fy
                  - h * (d(f1, "x") * fu + d(f1, "y") * fv))
    shared = h * (f2 * d(f2, "x") + f3 * d(f2, "y") + d(f3, "u"))
    rows[2][3] = pp["uv"] - shared * fx - shared * fy - h * (d(f2, "x") * fu + d(f2, "y") * fv)
    rows[3][3] = (pp["vv"]
                  - (h * (f1 * d(f3, "x") + f2 * d(f3, "y")) + d(f2, "v") - h * d(f3, "u")) * fx
                  - h * (f2 * d(f3, "x") + f3 * d(f3, "y") + d(f3, "v")) * fy
                  - h * (d(f3, "x") * fu + d(f3, "y") * fv))
    return SymTensor2.build(lambda i, j: rows[min(i, j)][max(i, j)], COVARIANT)


def hessian_restricted(a, b, c, f, literal: bool = False) -> SymTensor2:
    """Hessian on f2 = 0, f1 = f3 = x a + y b + c in explicit a, b, c form.

    The corrected list follows from the general connection; ``literal=True``
    reproduces the printed list for the discrepancy report.
    """
    a, b, c, f = (as_expr(e) for e in (a, b, c, f))
    d = differentiate
    p, pp = _partials(f)
    fx, fy, fu, fv = p["x"], p["y"], p["u"], p["v"]
    F = X * a + Y * b + c
    Fu = X * d(a, "u") + Y * d(b, "u") + d(c, "u")
    Fv = X * d(a, "v") + Y * d(b, "v") + d(c, "v")
    h = 0.5
    rows = [[None] * 4 for _ in range(4)]
    rows[0][0], rows[0][1], rows[1][1] = pp["xx"], pp["xy"], pp["yy"]
    rows[0][2] = pp["xu"] - h * a * fx
    rows[1][2] = pp["yu"] - h * b * fx
    rows[1][3] = pp["yv"] - h * b * fy
    if literal:
        rows[0][3] = pp["xv"] - h * a * fu
        rows[2][2] = pp["uu"] - h * (F * a + Fu) * fx - h * (F * b - Fv) * fy - h * (a * fu + b * fv)
        rows[2][3] = pp["uv"] - h * Fu * (fx + fy)
        rows[3][3] = pp["vv"] - h * (F * a - Fu) * fx - h * (F * b + Fv) * fy - h * (a * fu + b * fv)
    else:
        rows[0][3] = pp["xv"] - h * a * fy
        rows[2][2] = pp["uu"] - h * (F * a + Fu) * fx - h * (F * b - Fv) * fy + h * (a * fu + b * fv)
        rows[2][3] = pp["uv"] - h * Fv * fx - h * Fu * fy
        rows[3][3] = pp["vv"] - h * (F * a - Fu) * fx - h * (F * b + Fv) * fy + h * (a * fu + b * fv)
    return SymTensor2.build(lambda i, j: rows[min(i, j)][max(i, j)], COVARIANT)


def lie_derivative_metric(m: WalkerMetric, X: VectorField) -> SymTensor2:
    """(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k."""
    g = metric_components(m)
    dX = [[differentiate(X[k], _C[i]) for k in range(4)] for i in range(4)]

    def entry(i, j):
        terms = [mul(X[k], differentiate(g[i, j], _C[k])) for k in range(4)]
        terms += [mul(g[k, j], dX[i][k]) for k in range(4) if not g[k, j].is_zero()]
        terms += [mul(g[i, k], dX[j][k]) for k in range(4) if not g[i, k].is_zero()]
        return add(*terms)

    return SymTensor2.build(entry, COVARIANT)
