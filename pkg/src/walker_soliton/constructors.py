"""Explicit gradient-soliton potentials on Walker metrics.

The quadrature-defined coefficient functions are returned as ordinary
expressions containing ``Integral`` nodes, so they can be differentiated,
substituted and evaluated like anything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import (
    DEFAULT_PANELS,
    ONE,
    U,
    V,
    X,
    Y,
    ZERO,
    Dummy,
    Expr,
    add,
    as_expr,
    differentiate,
    div,
    evaluate_points,
    exp,
    integral,
    mul,
    power,
    substitute,
)
from .curvature import PreconditionError
from .grid import GridSpec
from .soliton import SolitonParams, gradient_soliton_residual
from .walker import WalkerMetric, depends_only_on_uv, restricted_form, restricted_metric


@dataclass(frozen=True)
class Quadrature:
    """Composite Simpson rule used for every integral a constructor creates."""

    panels: int = DEFAULT_PANELS
    rule: str = "simpson"

    def __post_init__(self):
        if self.rule != "simpson":
            raise ValueError(f"unsupported quadrature rule {self.rule!r}")
        if not isinstance(self.panels, (int, np.integer)) or self.panels < 2 or self.panels % 2:
            raise ValueError(f"panels must be a positive even integer, got {self.panels!r}")

    def integral(self, body, var: str, lo, hi) -> Expr:
        return integral(body, var, lo, hi, int(self.panels))


def _fresh(base: str, *exprs: Expr) -> str:
    taken = set()
    for e in exprs:
        taken |= set(e.params) | set(_dummies(e))
    name, k = base, 1
    while name in taken:
        name, k = f"{base}{k}", k + 1
    return name


def _dummies(e: Expr) -> set[str]:
    from .expr import Integral

    out, stack = set(), [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Integral):
            out.add(n.var)
        stack.extend(n.children())
    return out


def _require_only(e: Expr, allowed: Sequence[str], what: str, params=None) -> None:
    bad = [c for c in ("x", "y", "u", "v") if c not in allowed and c in e.free]
    if bad:
        raise PreconditionError(f"{what} = {e} must not depend on {', '.join(bad)}")


# ---------------------------------------------------------------------------
# strict Walker metrics


def build_strict_potential(lam: float, a: float, b: float, F, params=None) -> Expr:
    """f = -lam (x u + y v) + a x v + b y u + F(u, v).

    Its Laplacian is -4 lam for every metric whose potentials depend only on
    (u, v).
    """
    F = as_expr(F)
    if not depends_only_on_uv(F, params):
        raise PreconditionError(f"F = {F} depends on x or y")
    return add(mul(-float(lam), add(mul(X, U), mul(Y, V))), mul(float(a), X, V), mul(float(b), Y, U), F)


# ---------------------------------------------------------------------------
# first-order linear ODE solutions


def build_A2(a, lam: float, A_of_v=ZERO, q: Quadrature | None = None,
             u0: float = 0.0, tau0: float = 0.0) -> Expr:
    """Solution of d_u A2 = (a/2) A2 - lam with A2 = A(v) e^{J(u)} at u = u0 when lam = 0.

    A2 = (A(v) - lam int_{u0}^{u} e^{-J(t)} dt) e^{J(u)},  J(t) = int_{tau0}^{t} a(s, v)/2 ds.
    """
    return _linear_solution(as_expr(a), "u", float(lam), as_expr(A_of_v), q or Quadrature(), u0, tau0)


def build_A3(b, lam: float, B_of_u=ZERO, q: Quadrature | None = None,
             v0: float = 0.0, tau1: float = 0.0) -> Expr:
    """Mirror of :func:`build_A2` in v: d_v A3 = (b/2) A3 - lam."""
    return _linear_solution(as_expr(b), "v", float(lam), as_expr(B_of_u), q or Quadrature(), v0, tau1)


def _linear_solution(coef: Expr, var: str, lam: float, initial: Expr, q: Quadrature,
                     start: float, anchor: float) -> Expr:
    other = "v" if var == "u" else "u"
    _require_only(coef, ("u", "v"), "coefficient")
    _require_only(initial, (other,), "initial data")
    s = _fresh("s", coef, initial)
    t = _fresh("t", coef, initial)
    half = substitute(mul(0.5, coef), {var: Dummy(s)})

    def J(upper: Expr) -> Expr:
        return q.integral(half, s, anchor, upper)

    if lam == 0.0:
        inner = initial
    else:
        inner = add(initial, mul(-lam, q.integral(exp(mul(-1.0, J(Dummy(t)))), t, start, _coord(var))))
    return mul(inner, exp(J(_coord(var))))


def _coord(name: str) -> Expr:
    return {"u": U, "v": V}[name]


def a2_residual(A2: Expr, a, lam: float) -> Expr:
    """d_u A2 - (a/2) A2 + lam, symbolically (Leibniz rule through the integrals)."""
    return add(differentiate(A2, "u"), mul(-0.5, as_expr(a), A2), float(lam))


def a3_residual(A3: Expr, b, lam: float) -> Expr:
    return add(differentiate(A3, "v"), mul(-0.5, as_expr(b), A3), float(lam))


def ode_residual_fd(F: Expr, coef, lam: float, var: str, points, step: float = 1e-5,
                    params: Mapping[str, float] | None = None) -> np.ndarray:
    """The same ODE residual with d_var taken by central differences of quadrature values."""
    from .verify import fd_derivative_points

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dF = fd_derivative_points(F, var, pts, step, params)
    return dF - 0.5 * evaluate_points(as_expr(coef), pts, params) * evaluate_points(F, pts, params) + lam


# ---------------------------------------------------------------------------
# the c(v) coefficient


class VanishingCoefficientError(PreconditionError):
    def __init__(self, message: str, location: float):
        super().__init__(message)
        self.location = location


def check_nonvanishing(h: Expr, domain: tuple[float, float] = (-1.0, 1.0), samples: int = 401,
                       params: Mapping[str, float] | None = None, tol: float = 1e-9) -> None:
    vs = np.linspace(domain[0], domain[1], samples)
    pts = np.zeros((samples, 4))
    pts[:, 3] = vs
    vals = evaluate_points(h, pts, params)
    k = int(np.argmin(np.abs(vals)))
    if abs(vals[k]) < tol:
        raise VanishingCoefficientError(f"h = {h} vanishes at v = {vs[k]:.6g}", float(vs[k]))
    flips = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if flips.size:
        i = int(flips[0])
        lo, hi = float(vs[i]), float(vs[i + 1])
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = evaluate_points(h, np.array([[0.0, 0.0, 0.0, mid]]), params)[0]
            if np.sign(fm) == np.sign(vals[i]):
                lo = mid
            else:
                hi = mid
        z = 0.5 * (lo + hi)
        raise VanishingCoefficientError(f"h = {h} changes sign near v = {z:.6g}", z)


def build_c(h, lam: float, a1: float, m1: float, q: Quadrature | None = None,
            eps: float = 0.0, tau1: float = 0.0, domain: tuple[float, float] = (-1.0, 1.0),
            params: Mapping[str, float] | None = None) -> Expr:
    """Solution of c' + (2 lam / h) c + 2 a1 / h = 0:

    c(v) = (m1 - int_eps^v (2 a1 / h(t)) e^{2 lam H(t)} dt) e^{-2 lam H(v)},  H(t) = int_{tau1}^{t} 1/h.
    """
    h = as_expr(h)
    q = q or Quadrature()
    _require_only(h, ("v",), "h")
    check_nonvanishing(h, domain, params=params)
    lam, a1, m1 = float(lam), float(a1), float(m1)
    s = _fresh("s", h)
    t = _fresh("t", h)
    recip = substitute(div(ONE, h), {"v": Dummy(s)})

    def H(upper: Expr) -> Expr:
        return q.integral(recip, s, tau1, upper)

    if a1 == 0.0:
        inner: Expr = as_expr(m1)
    else:
        body = mul(2.0 * a1, substitute(div(ONE, h), {"v": Dummy(t)}), exp(mul(2.0 * lam, H(Dummy(t)))))
        inner = add(m1, mul(-1.0, q.integral(body, t, eps, V)))
    if lam == 0.0:
        return inner
    return mul(inner, exp(mul(-2.0 * lam, H(V))))


def c_residual(c: Expr, h, lam: float, a1: float) -> Expr:
    h = as_expr(h)
    return add(differentiate(c, "v"), mul(2.0 * lam, c, power(h, -1.0)), mul(2.0 * a1, power(h, -1.0)))


def c_residual_fd(c: Expr, h, lam: float, a1: float, points, step: float = 1e-5,
                  params: Mapping[str, float] | None = None) -> np.ndarray:
    from .verify import fd_derivative_points

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hv = evaluate_points(as_expr(h), pts, params)
    return (fd_derivative_points(c, "v", pts, step, params)
            + 2.0 * lam * evaluate_points(c, pts, params) / hv + 2.0 * a1 / hv)


# ---------------------------------------------------------------------------
# metrics with f1 = f3 = y b + c, f2 = 0


@dataclass
class ReducedData:
    """Inputs of the f1 = f3 = y b(u,v) + c(u,v) family and its potential."""

    b: Expr = ZERO
    c: Expr = ZERO
    K: float = 0.0
    h: Expr = ZERO
    A4: Expr | None = None
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    m1: float = 0.0
    u0: float = 0.0
    u1: float = 0.0
    tau0: float = 0.0
    tau1: float = 0.0
    eps: float = 0.0
    zeta: float = 0.0
    xi: float = 0.0
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        self.b, self.c, self.h = as_expr(self.b), as_expr(self.c), as_expr(self.h)
        if self.A4 is not None:
            self.A4 = as_expr(self.A4)
        lo, hi = self.domain
        for name in ("u0", "u1", "tau0", "tau1", "eps", "zeta", "xi"):
            val = getattr(self, name)
            if not lo <= val <= hi:
                raise ValueError(f"anchor {name} = {val} lies outside the domain [{lo}, {hi}]")

    def metric(self, params: Mapping[str, float] | None = None) -> WalkerMetric:
        return restricted_metric(ZERO, self.b, self.c, params)


def y_coefficient(d: ReducedData, lam: float, q: Quadrature | None = None) -> Expr:
    """int_{u1}^{u} ((-lam s + K)/2) b(s, v) ds + h(v)."""
    q = q or Quadrature()
    if d.b.is_zero():
        return d.h
    s = _fresh("s", d.b)
    body = mul(add(mul(-0.5 * lam, Dummy(s)), 0.5 * d.K), substitute(d.b, {"u": Dummy(s)}))
    return add(q.integral(body, s, d.u1, U), d.h)


def build_reduced_potential(d: ReducedData, lam: float, q: Quadrature | None = None) -> Expr:
    """f = (-lam u + K) x + (y coefficient) y + A4(u, v)."""
    A4 = d.A4 if d.A4 is not None else ZERO
    return add(mul(add(mul(-float(lam), U), d.K), X), mul(y_coefficient(d, lam, q), Y), A4)


def b0_A4(lam: float, c, a1: float = 0.0, a2: float = 0.0, a3: float = 0.0, a4: float = 0.0,
                 zeta: float = 0.0, xi: float = 0.0, q: Quadrature | None = None) -> Expr:
    """(a1/2)(u^2 - v^2) + a2 u + a3 v + a4 - 2 lam int_zeta^v int_xi^t c."""
    q = q or Quadrature()
    c = as_expr(c)
    poly = add(mul(0.5 * a1, add(mul(U, U), mul(-1.0, V, V))), mul(a2, U), mul(a3, V), a4)
    if lam == 0.0 or c.is_zero():
        return poly
    s, t = _fresh("r", c), _fresh("w", c)
    inner = q.integral(substitute(c, {"v": Dummy(s)}), s, xi, Dummy(t))
    return add(poly, mul(-2.0 * lam, q.integral(inner, t, zeta, V)))


@dataclass
class B0Config:
    data: ReducedData
    lam: float
    metric: WalkerMetric
    f: Expr
    notes: list[str] = field(default_factory=list)


def build_b0(lam: float, h, K: float = 0.0, a1: float = 0.0, a2: float = 0.0,
                    a3: float = 0.0, a4: float = 0.0, m1: float = 0.0, eps: float = 0.0,
                    tau1: float = 0.0, zeta: float = 0.0, xi: float = 0.0,
                    q: Quadrature | None = None, c_shift=None) -> B0Config:
    """b = 0, c = c(v) from :func:`build_c`, f = (-lam u + K) x + h(v) y + A4.

    The configuration is an actual gradient soliton (beta1 arbitrary, R = 0)
    only when h' = -lam and c is constant or lam = K = 0; see
    :func:`b0_conditions`.  ``c_shift`` adds a perturbation to c in
    the metric only, leaving f untouched.
    """
    q = q or Quadrature()
    c = build_c(h, lam, a1, m1, q, eps, tau1)
    A4 = b0_A4(lam, c, a1, a2, a3, a4, zeta, xi, q)
    cm = c if c_shift is None else add(c, as_expr(c_shift))
    d = ReducedData(b=ZERO, c=cm, K=K, h=as_expr(h), A4=A4, a1=a1, a2=a2, a3=a3, a4=a4, m1=m1,
               tau1=tau1, eps=eps, zeta=zeta, xi=xi)
    f = build_reduced_potential(d, lam, q)
    return B0Config(d, float(lam), d.metric(), f, b0_conditions(lam, h, K, a1, m1, eps, tau1))


def b0_conditions(lam: float, h, K: float, a1: float, m1: float, eps: float, tau1: float,
                         samples: int = 41) -> list[str]:
    """Conditions under which the b = 0 configuration solves the full tensor equation.

    Returns a list of human-readable violations (empty when all hold).
    The (2,4) component forces h' = -lam; the (3,4) component forces
    A4_uv = (1/2) c' (-lam u + K), which for the polynomial-plus-double-integral
    A4 (with A4_uv = 0) needs c' = 0 or lam = K = 0.
    """
    out = []
    h = as_expr(h)
    vs = np.linspace(-1.0, 1.0, samples)
    pts = np.zeros((samples, 4))
    pts[:, 3] = vs
    dh = evaluate_points(differentiate(h, "v"), pts)
    if np.max(np.abs(dh + lam)) > 1e-9:
        out.append("h'(v) must equal -lambda")
    # with eps = tau1, c = (m1 + a1/lam) e^{-2 lam H} - a1/lam
    if lam == 0.0:
        c_constant = a1 == 0.0
    else:
        c_constant = eps == tau1 and abs(m1 + a1 / lam) < 1e-12
    if not c_constant and not (lam == 0.0 and K == 0.0):
        out.append("c must be constant unless lambda = K = 0")
    return out


def consistent_b0(lam: float, h0: float = 3.0, K: float = 0.0, a1: float = 1.0, a2: float = 0.0,
                         a3: float = 0.0, a4: float = 0.0, anchor: float = 0.0,
                         q: Quadrature | None = None, c_shift=None) -> B0Config:
    """A b = 0 configuration that satisfies the full gradient soliton equation.

    h = h0 - lam v, m1 = -a1/lam and eps = tau1 = anchor make c(v) = -a1/lam
    through the quadrature formula; h0 must keep h nonzero on [-1, 1].
    """
    if lam == 0.0:
        raise ValueError("use lam != 0; with lam = 0 take any h with h' = 0 and K = 0")
    h = add(h0, mul(-float(lam), V))
    return build_b0(lam, h, K, a1, a2, a3, a4, m1=-a1 / lam, eps=anchor, tau1=anchor,
                           q=q, c_shift=c_shift)


# ---------------------------------------------------------------------------
# the reduced system


def _reduced_form(m: WalkerMetric, grid: GridSpec | None = None) -> tuple[Expr, Expr]:
    form = restricted_form(m, grid)
    if form is None:
        raise PreconditionError("metric is not of the form f2 = 0, f1 = f3 = y b + c")
    a, b, c = form
    pts = (grid or GridSpec()).points()
    if np.max(np.abs(evaluate_points(a, pts, m.params))) > 1e-12:
        raise PreconditionError("metric has an x-linear part; expected f1 = f3 = y b + c")
    return b, c


def reduced_system_residuals(m: WalkerMetric, f, p: SolitonParams, data: ReducedData | None = None,
                        literal: bool = False) -> list[Expr]:
    """Residuals of the uu, vv and uv equations and the compatibility condition.

    With half the gradient soliton equation, Hess f + beta1 Ric + lam g = 0,
    and F = y b + c:

      f_uu - (y b_u + c_u) f_x / 2 - (F b - y b_v - c_v) f_y / 2 + b f_v / 2 + lam F + beta1 (b^2/2 - b_v)
      f_vv + (y b_u + c_u) f_x / 2 - (F b + y b_v + c_v) f_y / 2 + b f_v / 2 + lam F
      f_uv - (y b_v + c_v) f_x / 2 - (y b_u + c_u) f_y / 2 + beta1 b_u / 2
      f_yuv - b f_uy / 2 - b_u f_y / 2

    The last is the u-derivative of the (2,4) equation f_yv - b f_y / 2 + lam = 0.
    ``literal=True`` returns the printed variants (sign of the b f_v term,
    the (f_x + f_y) factor, and the compatibility equation in terms of the
    data) for comparison; it needs ``data``.
    """
    f = as_expr(f)
    b, c = _reduced_form(m)
    lam, b1 = float(p.lam), float(p.beta1)
    d = differentiate
    fx, fy, fu, fv = (d(f, k) for k in ("x", "y", "u", "v"))
    F = add(mul(Y, b), c)
    Gu = add(mul(Y, d(b, "u")), d(c, "u"))
    Gv = add(mul(Y, d(b, "v")), d(c, "v"))
    bu, bv = d(b, "u"), d(b, "v")
    sgn = -1.0 if literal else 1.0
    r_uu = add(d(d(f, "u"), "u"), mul(-0.5, Gu, fx), mul(-0.5, add(mul(F, b), mul(-1.0, Gv)), fy),
               mul(0.5 * sgn, b, fv), mul(lam, F), mul(b1, add(mul(0.5, b, b), mul(-1.0, bv))))
    r_vv = add(d(d(f, "v"), "v"), mul(0.5, Gu, fx), mul(-0.5, add(mul(F, b), Gv), fy),
               mul(0.5 * sgn, b, fv), mul(lam, F))
    if literal:
        r_uv = add(d(fu, "v"), mul(-0.5, Gu, add(fx, fy)), mul(0.5 * b1, bu))
        if data is None:
            raise ValueError("the printed compatibility condition needs the reduced-family data")
        k = add(mul(-lam, U), data.K)
        s = _fresh("s", data.b)
        inner = integral(mul(add(mul(-0.25 * lam, Dummy(s)), 0.25 * data.K),
                             substitute(data.b, {"u": Dummy(s)})), s, data.u1, U)
        r_c = add(mul(0.5, k, bv), mul(-0.25, k, b, b), mul(-1.0, bu, add(inner, data.h)))
    else:
        r_uv = add(d(fu, "v"), mul(-0.5, Gv, fx), mul(-0.5, Gu, fy), mul(0.5 * b1, bu))
        r_c = add(d(d(fy, "u"), "v"), mul(-0.5, b, d(fy, "u")), mul(-0.5, bu, fy))
    return [r_uu, r_vv, r_uv, r_c]


def reduced_form_residuals(m: WalkerMetric, f, p: SolitonParams) -> list[Expr]:
    """The other components of Hess f + beta1 Ric + lam g on the family:
    (1,1) (1,2) (1,3) (1,4) (2,2) (2,3) (2,4)."""
    f = as_expr(f)
    b, _ = _reduced_form(m)
    lam = float(p.lam)
    d = differentiate
    fx, fy = d(f, "x"), d(f, "y")
    return [
        d(fx, "x"),
        d(fx, "y"),
        add(d(fx, "u"), lam),
        d(fx, "v"),
        d(fy, "y"),
        add(d(fy, "u"), mul(-0.5, b, fx)),
        add(d(fy, "v"), mul(-0.5, b, fy), lam),
    ]


# ---------------------------------------------------------------------------
# candidate family on x a + y b + c metrics with a != 0


@dataclass
class FamilyScan:
    min_residual: float
    coefficients: np.ndarray
    basis_size: int
    points: int


def nonexistence_scan(a, b, c, p: SolitonParams, degree: int = 2, q: Quadrature | None = None,
                      grid: GridSpec | None = None, params: Mapping[str, float] | None = None) -> FamilyScan:
    """Smallest max-residual of the gradient soliton equation over f = A2 x + A3 y + A4.

    A2 and A3 solve their first-order equations with polynomial initial data
    A(v), B(u) of the given degree and A4 is a polynomial in (u, v).  The
    residual is affine in those coefficients, so the minimiser is a linear
    least-squares problem; the returned value is the max-abs residual at it.
    """
    q = q or Quadrature(panels=32)
    grid = grid or GridSpec(((-1.0, 1.0, 3),) * 4)
    a, b, c = (as_expr(e) for e in (a, b, c))
    m = restricted_metric(a, b, c, params)
    pts = grid.points()
    lam = float(p.lam)

    def resid(f: Expr, with_rhs: bool) -> np.ndarray:
        if with_rhs:
            T = gradient_soliton_residual(m, f, p)
        else:
            from .operators import hessian

            T = hessian(m, f).scale(2.0)
        return np.concatenate([evaluate_points(e, pts, m.params) for e in T.comps])

    base = add(mul(build_A2(a, lam, ZERO, q), X), mul(build_A3(b, lam, ZERO, q), Y))
    r0 = resid(base, True)
    basis = []
    for k in range(degree + 1):
        basis.append(mul(build_A2(a, 0.0, power(V, float(k)), q), X))
        basis.append(mul(build_A3(b, 0.0, power(U, float(k)), q), Y))
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            if i + j >= 1:
                basis.append(mul(power(U, float(i)), power(V, float(j))))
    M = np.stack([resid(e, False) for e in basis], axis=1)
    coef, *_ = np.linalg.lstsq(M, -r0, rcond=None)
    best = float(np.max(np.abs(r0 + M @ coef)))
    return FamilyScan(best, coef, len(basis), pts.shape[0])
