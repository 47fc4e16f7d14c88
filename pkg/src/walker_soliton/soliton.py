"""Ricci-Yamabe soliton residuals and related checks.

A soliton is data (g, X, lambda, beta1, beta2) with

    2 beta1 Ric + L_X g = (-2 lambda + beta2 R) g,

and a gradient soliton is the case X = grad f, where L_X g = 2 Hess f.
Every residual here is returned as an expression (or tensor of expressions);
deciding whether it vanishes is a grid-level judgement made by
:func:`max_residual`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .curvature import contract, ricci_general, scalar_curvature
from .expr import ZERO, Const, Expr, as_expr, evaluate_many, mul
from .grid import GridSpec, max_abs_location
from .operators import VectorField, divergence, gradient, hessian, laplacian, lie_derivative_metric
from .walker import SymTensor2, WalkerMetric, inverse_metric, metric_components


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True)
class SolitonParams:
    lam: float = 0.0
    beta1: float = 1.0
    beta2: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.lam, self.beta1, self.beta2])):
            raise ValueError("soliton constants must be finite")


class SolitonClass(enum.Enum):
    EXPANDING = "expanding"
    STEADY = "steady"
    SHRINKING = "shrinking"


def classify(p: SolitonParams) -> SolitonClass:
    """Expanding for lambda < 0, steady for lambda = 0, shrinking for lambda > 0."""
    if p.lam < 0:
        return SolitonClass.EXPANDING
    if p.lam > 0:
        return SolitonClass.SHRINKING
    return SolitonClass.STEADY


@dataclass(frozen=True, eq=False)
class SolitonField:
    """Either a raw vector field ``X`` or a decomposition ``X = grad f + Y`` with div Y = 0."""

    X: VectorField | None = None
    f: Expr | None = None
    Y: VectorField | None = None

    def __post_init__(self):
        if (self.X is None) == (self.f is None):
            raise ValueError("give exactly one of a raw field X or a potential f")
        if self.f is not None:
            object.__setattr__(self, "f", as_expr(self.f))
            if self.Y is None:
                object.__setattr__(self, "Y", VectorField.zero())

    @property
    def decomposed(self) -> bool:
        return self.f is not None

    def vector(self, m: WalkerMetric) -> VectorField:
        if self.X is not None:
            return self.X
        return gradient(m, self.f) + self.Y

    def check_divergence_free(self, m: WalkerMetric, grid: GridSpec | None = None, tol: float = 1e-9):
        if not self.decomposed:
            return
        pts = (grid or GridSpec()).points()
        div = evaluate_many([divergence(m, self.Y)], pts, m.params)
        worst, where = max_abs_location(div, pts)
        if not worst < tol:
            raise InvariantViolation(f"div Y = {worst:.3g} at {where}; the decomposition needs div Y = 0")


def _rhs_factor(m: WalkerMetric, p: SolitonParams) -> Expr:
    """-2 lambda + beta2 R."""
    R = scalar_curvature(m) if p.beta2 != 0.0 else ZERO
    return Const(-2.0 * p.lam) + mul(p.beta2, R)


def soliton_residual(m: WalkerMetric, X: SolitonField, p: SolitonParams,
                     grid: GridSpec | None = None) -> SymTensor2:
    """2 beta1 Ric + L_X g - (-2 lambda + beta2 R) g."""
    X.check_divergence_free(m, grid)
    lie = lie_derivative_metric(m, X.vector(m))
    ric = ricci_general(m).scale(2.0 * p.beta1)
    return ric + lie - metric_components(m).scale(_rhs_factor(m, p))


def gradient_soliton_residual(m: WalkerMetric, f, p: SolitonParams) -> SymTensor2:
    """2 Hess f + 2 beta1 Ric - (-2 lambda + beta2 R) g."""
    hess = hessian(m, as_expr(f)).scale(2.0)
    ric = ricci_general(m).scale(2.0 * p.beta1)
    return hess + ric - metric_components(m).scale(_rhs_factor(m, p))


def trace_residual(m: WalkerMetric, X: SolitonField, p: SolitonParams, literal: bool = False) -> Expr:
    """Residual of the traced soliton equation for X = grad f + Y.

    Contracting with the inverse metric (tr g = 4, tr Ric = R,
    tr L_Y g = 2 div Y = 0) gives Laplacian f = -4 lambda + (2 beta2 - beta1) R.
    ``literal=True`` uses the printed form 4(-lambda + (beta2/2 - beta1) R),
    whose beta1 R coefficient is four times too large.
    """
    if not X.decomposed:
        raise ValueError("the trace condition needs the decomposed form grad f + Y")
    lap = laplacian(m, X.f)
    R = scalar_curvature(m)
    if literal:
        target = Const(-4.0 * p.lam) + mul(4.0 * (p.beta2 / 2.0 - p.beta1), R)
    else:
        target = Const(-4.0 * p.lam) + mul(2.0 * p.beta2 - p.beta1, R)
    return lap - target


def trace_of(m: WalkerMetric, T: SymTensor2) -> Expr:
    return contract(inverse_metric(m), T)


@dataclass(frozen=True, eq=False)
class KillingResult:
    kind: str  # "killing" | "conformal_killing" | "neither"
    factor: Expr | None
    deviation: float


def killing_check(m: WalkerMetric, X: VectorField, grid: GridSpec | None = None,
                  tol: float = 1e-9) -> KillingResult:
    """Classify X by its Lie derivative: zero, a multiple phi g of the metric, or neither.

    phi is recovered as tr(L_X g) / 4 and the proportionality is verified
    componentwise on the grid.
    """
    pts = (grid or GridSpec()).points()
    lie = lie_derivative_metric(m, X)
    vals = lie.evaluate(pts, m.params)
    size = float(np.max(np.abs(vals))) if vals.size else 0.0
    if size < tol:
        return KillingResult("killing", ZERO, size)
    phi = mul(0.25, trace_of(m, lie))
    resid = lie - metric_components(m).scale(phi)
    dev = float(np.max(np.abs(resid.evaluate(pts, m.params))))
    if dev < tol:
        return KillingResult("conformal_killing", phi, dev)
    return KillingResult("neither", None, dev)


def max_residual(T, grid: GridSpec | None = None, params: Mapping[str, float] | None = None,
                 points=None) -> tuple[float, list[float]]:
    """Max |component| over the grid of a tensor, vector, expression or list of expressions."""
    pts = points if points is not None else (grid or GridSpec()).points()
    if isinstance(T, SymTensor2):
        exprs = list(T.comps)
    elif isinstance(T, VectorField):
        exprs = list(T.comps)
    elif isinstance(T, Expr):
        exprs = [T]
    else:
        exprs = [as_expr(e) for e in T]
    vals = evaluate_many(exprs, pts, params)
    return max_abs_location(vals, pts)


def holds(T, grid: GridSpec | None = None, params=None, tol: float = 1e-8) -> bool:
    worst, _ = max_residual(T, grid, params)
    return worst < tol


# ---------------------------------------------------------------------------
# Stokes check on a periodic box


class NotPeriodicError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicBox:
    lo: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    hi: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))


def _periodicity_gap(e: Expr, box: PeriodicBox, params, samples: int = 7) -> tuple[float, str]:
    rng = np.random.default_rng(12345)
    worst, which = 0.0, ""
    for axis in range(4):
        pts = rng.uniform(box.lo, box.hi, size=(samples, 4))
        a, b = pts.copy(), pts.copy()
        a[:, axis], b[:, axis] = box.lo[axis], box.hi[axis]
        vals = evaluate_many([e], np.vstack([a, b]), params)[0]
        gap = float(np.max(np.abs(vals[:samples] - vals[samples:])))
        if gap > worst:
            worst, which = gap, "xyuv"[axis]
    return worst, which


def stokes_check(m: WalkerMetric, f, box: PeriodicBox | None = None, n: int = 32,
                 params: Mapping[str, float] | None = None, periodic_tol: float = 1e-8) -> float:
    """Mean of the Laplacian of a periodic f over the box (midpoint rule, n per axis).

    On a closed manifold the integral of a divergence vanishes, so the value
    should be zero up to quadrature error.  f and the metric potentials must
    be periodic on the box.
    """
    box = box or PeriodicBox()
    f = as_expr(f)
    params = {**m.params, **(params or {})}
    for label, e in (("f", f), ("f1", m.f1), ("f2", m.f2), ("f3", m.f3)):
        gap, axis = _periodicity_gap(e, box, params)
        if gap > periodic_tol:
            raise NotPeriodicError(f"{label} = {e} is not periodic in {axis} (boundary mismatch {gap:.3g})")
    lap = laplacian(m, f)
    lines = [lo + (np.arange(n) + 0.5) * (hi - lo) / n for lo, hi in zip(box.lo, box.hi)]
    # sweep one x-slab at a time to bound memory
    total = 0.0
    yy, uu, vv = np.meshgrid(lines[1], lines[2], lines[3], indexing="ij")
    for xv in lines[0]:
        pts = np.stack([np.full(yy.size, xv), yy.ravel(), uu.ravel(), vv.ravel()], axis=1)
        total += float(np.sum(evaluate_many([lap], pts, params)[0]))
    return total / n ** 4
