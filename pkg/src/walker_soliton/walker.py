"""The four-dimensional Walker metric family

    g = [[0, 0, 1,  0 ],
         [0, 0, 0,  1 ],
         [1, 0, f1, f2],
         [0, 1, f2, f3]]

in coordinates (x, y, u, v), plus the symmetric rank-2 container used for
every tensor in the package.  Indices are 0-based: 0=x, 1=y, 2=u, 3=v.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import ONE, ZERO, Expr, as_expr, differentiate, evaluate_many, mul, add, parse_expr
from .grid import GridSpec, vanishes

COVARIANT = "covariant"
CONTRAVARIANT = "contravariant"

# upper-triangle order of the ten independent components
PAIRS = tuple((i, j) for i in range(4) for j in range(i, 4))


@dataclass(frozen=True, eq=False)
class SymTensor2:
    """Symmetric 4x4 field of expressions with an explicit variance flag."""

    comps: tuple[Expr, ...]
    variance: str = COVARIANT

    def __post_init__(self):
        if len(self.comps) != 10:
            raise ValueError("a symmetric 4x4 tensor has ten independent components")
        if self.variance not in (COVARIANT, CONTRAVARIANT):
            raise ValueError(f"unknown variance {self.variance!r}")

    @classmethod
    def build(cls, entry: Callable[[int, int], Expr], variance: str = COVARIANT) -> "SymTensor2":
        return cls(tuple(as_expr(entry(i, j)) for i, j in PAIRS), variance)

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence], variance: str = COVARIANT) -> "SymTensor2":
        return cls.build(lambda i, j: rows[i][j], variance)

    @classmethod
    def zero(cls, variance: str = COVARIANT) -> "SymTensor2":
        return cls((ZERO,) * 10, variance)

    def __getitem__(self, ij: tuple[int, int]) -> Expr:
        i, j = ij
        if i > j:
            i, j = j, i
        return self.comps[PAIRS.index((i, j))]

    def matrix(self) -> list[list[Expr]]:
        return [[self[i, j] for j in range(4)] for i in range(4)]

    def _check(self, other: "SymTensor2"):
        if self.variance != other.variance:
            raise ValueError("cannot combine tensors of different variance")

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        self._check(other)
        return SymTensor2(tuple(add(a, b) for a, b in zip(self.comps, other.comps)), self.variance)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        self._check(other)
        return SymTensor2(tuple(add(a, mul(-1.0, b)) for a, b in zip(self.comps, other.comps)),
                          self.variance)

    def scale(self, factor) -> "SymTensor2":
        return SymTensor2(tuple(mul(factor, c) for c in self.comps), self.variance)

    def evaluate(self, points, params: Mapping[str, float] | None = None) -> np.ndarray:
        """Numeric values as an ``(N, 4, 4)`` array."""
        vals = evaluate_many(list(self.comps), points, params)
        out = np.empty((vals.shape[1], 4, 4))
        for k, (i, j) in enumerate(PAIRS):
            out[:, i, j] = vals[k]
            out[:, j, i] = vals[k]
        return out

    def to_dict(self) -> dict[str, str]:
        return {f"{i + 1}{j + 1}": str(c) for (i, j), c in zip(PAIRS, self.comps)}


@dataclass(frozen=True, eq=False)
class WalkerMetric:
    f1: Expr
    f2: Expr
    f3: Expr
    params: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_strings(cls, f1: str, f2: str, f3: str, params: Mapping[str, float] | None = None):
        return cls(parse_expr(f1), parse_expr(f2), parse_expr(f3), dict(params or {}))

    @classmethod
    def of(cls, f1, f2, f3, params: Mapping[str, float] | None = None) -> "WalkerMetric":
        return cls(as_expr(f1), as_expr(f2), as_expr(f3), dict(params or {}))

    @property
    def potentials(self) -> tuple[Expr, Expr, Expr]:
        return (self.f1, self.f2, self.f3)

    def __str__(self):
        return f"WalkerMetric(f1={self.f1}, f2={self.f2}, f3={self.f3})"


def flat_metric() -> WalkerMetric:
    return WalkerMetric(ZERO, ZERO, ZERO)


def restricted_metric(a, b, c, params: Mapping[str, float] | None = None) -> WalkerMetric:
    """Metric with f2 = 0 and f1 = f3 = x a(u,v) + y b(u,v) + c(u,v)."""
    from .expr import X, Y

    f = add(mul(X, as_expr(a)), mul(Y, as_expr(b)), as_expr(c))
    return WalkerMetric(f, ZERO, f, dict(params or {}))


def metric_components(m: WalkerMetric) -> SymTensor2:
    rows = [
        [ZERO, ZERO, ONE, ZERO],
        [ZERO, ZERO, ZERO, ONE],
        [ONE, ZERO, m.f1, m.f2],
        [ZERO, ONE, m.f2, m.f3],
    ]
    return SymTensor2.from_matrix(rows, COVARIANT)


def inverse_metric(m: WalkerMetric) -> SymTensor2:
    rows = [
        [-m.f1, -m.f2, ONE, ZERO],
        [-m.f2, -m.f3, ZERO, ONE],
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ONE, ZERO, ZERO],
    ]
    return SymTensor2.from_matrix(rows, CONTRAVARIANT)


def metric_determinant(m: WalkerMetric, p: Sequence[float]) -> float:
    g = metric_components(m).evaluate(np.asarray(p, dtype=float)[None, :], m.params)[0]
    return float(np.linalg.det(g))


@dataclass(frozen=True, eq=False)
class MetricClass:
    tag: str  # "general" | "strict" | "restricted"
    a: Expr | None = None
    b: Expr | None = None
    c: Expr | None = None


def _sample(grid: GridSpec | None) -> np.ndarray:
    return (grid or GridSpec()).points()


def is_strict(m: WalkerMetric, grid: GridSpec | None = None, tol: float = 1e-12) -> bool:
    """All x- and y-derivatives of f1, f2, f3 vanish on the sample grid."""
    ds = [differentiate(f, c) for f in m.potentials for c in ("x", "y")]
    return vanishes(ds, _sample(grid), m.params, tol)


def restricted_form(m: WalkerMetric, grid: GridSpec | None = None,
                    tol: float = 1e-12) -> tuple[Expr, Expr, Expr] | None:
    """``(a, b, c)`` when f2 = 0 and f1 = f3 = x a + y b + c with a, b, c in (u, v)."""
    pts = _sample(grid)
    f1 = m.f1
    fx, fy = differentiate(f1, "x"), differentiate(f1, "y")
    checks = [m.f2, f1 - m.f3, differentiate(fx, "x"), differentiate(fy, "y"), differentiate(fx, "y")]
    if not vanishes(checks, pts, m.params, tol):
        return None
    from .expr import X, Y

    c = f1 - X * fx - Y * fy
    return fx, fy, c


def classify_metric(m: WalkerMetric, grid: GridSpec | None = None, tol: float = 1e-12) -> MetricClass:
    if is_strict(m, grid, tol):
        return MetricClass("strict")
    form = restricted_form(m, grid, tol)
    if form is not None:
        return MetricClass("restricted", *form)
    return MetricClass("general")


def depends_only_on_uv(e: Expr, params=None, grid: GridSpec | None = None, tol: float = 1e-12) -> bool:
    return vanishes([differentiate(e, "x"), differentiate(e, "y")], _sample(grid), params, tol)
