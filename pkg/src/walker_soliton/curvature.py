"""Christoffel symbols, Ricci tensor and scalar curvature of Walker metrics.

Each quantity has two independent routes: the general defining formula,
built only from the metric components, their inverse and exact
differentiation, and the closed-form component lists specific to the Walker
family.  The general route is the reference; the closed lists are checked
against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .expr import ZERO, Expr, add, as_expr, differentiate, evaluate_many, mul
from .walker import (
    COVARIANT,
    SymTensor2,
    WalkerMetric,
    depends_only_on_uv,
    inverse_metric,
    metric_components,
)

_C = ("x", "y", "u", "v")


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Christoffel:
    """Connection coefficients ``gamma[k][i][j]`` (upper index first), symmetric in i, j."""

    gamma: tuple[tuple[tuple[Expr, ...], ...], ...]

    def __getitem__(self, kij: tuple[int, int, int]) -> Expr:
        k, i, j = kij
        return self.gamma[k][i][j]

    def independent(self):
        """The 40 symbols with i <= j, as ``((k, i, j), expr)`` pairs."""
        return [((k, i, j), self.gamma[k][i][j]) for k in range(4) for i in range(4) for j in range(i, 4)]

    def evaluate(self, points, params: Mapping[str, float] | None = None) -> np.ndarray:
        flat = [self.gamma[k][i][j] for k in range(4) for i in range(4) for j in range(4)]
        vals = evaluate_many(flat, points, params)
        return vals.T.reshape(-1, 4, 4, 4)


def _sym_gamma(entries: dict[tuple[int, int, int], Expr]) -> Christoffel:
    g = [[[ZERO] * 4 for _ in range(4)] for _ in range(4)]
    for (k, i, j), e in entries.items():
        g[k][i][j] = g[k][j][i] = as_expr(e)
    return Christoffel(tuple(tuple(tuple(row) for row in plane) for plane in g))


@lru_cache(maxsize=128)
def christoffel_general(m: WalkerMetric) -> Christoffel:
    g = metric_components(m)
    gi = inverse_metric(m)
    dg = [[[differentiate(g[i, j], _C[l]) for j in range(4)] for i in range(4)] for l in range(4)]
    entries = {}
    for k in range(4):
        for i in range(4):
            for j in range(i, 4):
                terms = []
                for l in range(4):
                    gkl = gi[k, l]
                    if gkl.is_zero():
                        continue
                    bracket = add(dg[j][i][l], dg[i][j][l], mul(-1.0, dg[l][i][j]))
                    terms.append(mul(0.5, gkl, bracket))
                entries[k, i, j] = add(*terms)
    return _sym_gamma(entries)


@lru_cache(maxsize=128)
def christoffel_closed(m: WalkerMetric) -> Christoffel:
    f1, f2, f3 = m.potentials

    def d(f, c):
        return differentiate(f, c)

    h = 0.5
    e = {
        (0, 0, 2): h * d(f1, "x"),
        (0, 0, 3): h * d(f2, "x"),
        (0, 1, 2): h * d(f1, "y"),
        (0, 1, 3): h * d(f2, "y"),
        (0, 2, 2): h * (f1 * d(f1, "x") + f2 * d(f1, "y") + d(f1, "u")),
        (0, 2, 3): h * (f1 * d(f2, "x") + f2 * d(f2, "y") + d(f1, "v")),
        (0, 3, 3): h * (f1 * d(f3, "x") + f2 * d(f3, "y")) + d(f2, "v") - h * d(f3, "u"),
        (1, 0, 2): h * d(f2, "x"),
        (1, 0, 3): h * d(f3, "x"),
        (1, 1, 2): h * d(f2, "y"),
        (1, 1, 3): h * d(f3, "y"),
        (1, 2, 2): h * (f2 * d(f1, "x") + f3 * d(f1, "y") + 2 * d(f2, "u") - d(f1, "v")),
        (1, 2, 3): h * (f2 * d(f2, "x") + f3 * d(f2, "y") + d(f3, "u")),
        (1, 3, 3): h * (f2 * d(f3, "x") + f3 * d(f3, "y") + d(f3, "v")),
        (2, 2, 2): -h * d(f1, "x"),
        (2, 2, 3): -h * d(f2, "x"),
        (2, 3, 3): -h * d(f3, "x"),
        (3, 2, 2): -h * d(f1, "y"),
        (3, 2, 3): -h * d(f2, "y"),
        (3, 3, 3): -h * d(f3, "y"),
    }
    return _sym_gamma(e)


def ricci_from_christoffel(gamma: Christoffel) -> SymTensor2:
    G = gamma.gamma

    def entry(i, j):
        terms = []
        for k in range(4):
            terms.append(differentiate(G[k][i][j], _C[k]))
            terms.append(mul(-1.0, differentiate(G[k][i][k], _C[j])))
            for l in range(4):
                terms.append(mul(G[k][i][j], G[l][k][l]))
                terms.append(mul(-1.0, G[l][i][k], G[k][j][l]))
        return add(*terms)

    return SymTensor2.build(entry, COVARIANT)


@lru_cache(maxsize=128)
def ricci_general(m: WalkerMetric) -> SymTensor2:
    return ricci_from_christoffel(christoffel_general(m))


@lru_cache(maxsize=128)
def ricci_closed(m: WalkerMetric) -> SymTensor2:
    f1, f2, f3 = m.potentials

    def d(f, *cs):
        for c in cs:
            f = differentiate(f, c)
        return f

    h = 0.5
    r13 = h * d(f1, "x", "x") + h * d(f2, "x", "y")
    r23 = h * d(f2, "y", "y") + h * d(f1, "x", "y")
    r14 = h * d(f2, "x", "x") + h * d(f3, "x", "y")
    r24 = h * d(f3, "y", "y") + h * d(f2, "x", "y")
    r33 = (h * f1 * d(f1, "x", "x") + f2 * d(f1, "x", "y") + h * f3 * d(f1, "y", "y")
           + h * d(f1, "x") * d(f2, "y") - h * d(f1, "y") * d(f2, "x")
           + h * d(f1, "y") * d(f3, "y") - h * d(f2, "y") ** 2
           - d(f1, "y", "v") + d(f2, "y", "u"))
    r34 = (h * f1 * d(f2, "x", "x") + f2 * d(f2, "x", "y") + h * f3 * d(f2, "y", "y")
           - h * d(f1, "y") * d(f3, "x") + h * d(f2, "x") * d(f2, "y")
           + h * d(f1, "x", "v") - h * d(f2, "x", "u") - h * d(f2, "y", "v") + h * d(f3, "y", "u"))
    r44 = (h * f1 * d(f3, "x", "x") + f2 * d(f3, "x", "y") + h * f3 * d(f3, "y", "y")
           + h * d(f1, "x") * d(f3, "x") - h * d(f2, "x") ** 2
           + h * d(f2, "x") * d(f3, "y") - h * d(f2, "y") * d(f3, "x")
           + d(f2, "x", "v") - d(f3, "x", "u"))
    rows = [
        [ZERO, ZERO, r13, r14],
        [ZERO, ZERO, r23, r24],
        [r13, r23, r33, r34],
        [r14, r24, r34, r44],
    ]
    return SymTensor2.from_matrix(rows, COVARIANT)


def ricci_restricted(a, b, c, params: Mapping[str, float] | None = None) -> SymTensor2:
    """Ricci tensor of f2 = 0, f1 = f3 = x a + y b + c with a, b, c functions of (u, v)."""
    a, b, c = as_expr(a), as_expr(b), as_expr(c)
    for name, e in (("a", a), ("b", b), ("c", c)):
        if not depends_only_on_uv(e, params):
            raise PreconditionError(f"{name} = {e} depends on x or y")
    h = 0.5
    au, av = differentiate(a, "u"), differentiate(a, "v")
    bu, bv = differentiate(b, "u"), differentiate(b, "v")
    r33 = h * b ** 2 - bv
    r34 = -h * a * b + h * av + h * bu
    r44 = h * a ** 2 - au
    rows = [[ZERO] * 4, [ZERO] * 4, [ZERO, ZERO, r33, r34], [ZERO, ZERO, r34, r44]]
    return SymTensor2.from_matrix(rows, COVARIANT)


def contract(upper: SymTensor2, lower: SymTensor2) -> Expr:
    """Full contraction ``upper^{ij} lower_{ij}``."""
    terms = []
    for i in range(4):
        for j in range(4):
            a = upper[i, j]
            if not a.is_zero():
                terms.append(mul(a, lower[i, j]))
    return add(*terms)


def scalar_curvature(m: WalkerMetric, variant: str = "contracted") -> Expr:
    """Scalar curvature by contracting the general Ricci tensor, or from the closed formula."""
    if variant == "contracted":
        return _scalar_contracted(m)
    if variant == "closed":
        f1, f2, f3 = m.potentials
        d = differentiate
        return add(d(d(f1, "x"), "x"), d(d(f3, "y"), "y"), mul(2.0, d(d(f2, "x"), "y")))
    raise ValueError(f"unknown variant {variant!r}")


@lru_cache(maxsize=128)
def _scalar_contracted(m: WalkerMetric) -> Expr:
    return contract(inverse_metric(m), ricci_general(m))


def scalar_from_ricci_trace(ric: SymTensor2) -> Expr:
    """``2 R_13 + 2 R_24``, the contraction specialised to the Walker inverse metric."""
    return add(mul(2.0, ric[0, 2]), mul(2.0, ric[1, 3]))
