"""Scenario documents and the check registry behind the command line.

A scenario is a JSON object::

    {
      "name": "...",
      "metric": {"f1": "K1", "f2": "K2*x*y", "f3": "K1"},
      "params": {"K1": 1.0, "K2": 0.5},
      "field": {"f": "u*v", "Y": ["0", "0", "0", "0"]}    or  {"X": [...]},
      "soliton": {"lambda": 0.0, "beta1": 1.0, "beta2": 0.0},
      "grid": {"lo": -1, "hi": 1, "n": 5},
      "constructor": {"family": "b0", ...},
      "stokes": {"lo": [0, 0, 0, 0], "hi": [1, 1, 1, 1], "n": 32},
      "random": {"count": 10, "points": 50},
      "checks": ["ricci_closed", {"name": "trace_literal", "expect": "flag"}],
      "expected": {...}
    }

Every key except ``name`` is optional.  ``expected`` is free-form and is
copied into the report unchanged; fixtures use it to record resolved values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

from . import constructors as con
from .curvature import (
    PreconditionError,
    christoffel_closed,
    christoffel_general,
    ricci_closed,
    ricci_general,
    ricci_restricted,
    scalar_curvature,
    scalar_from_ricci_trace,
)
from .expr import ZERO, Expr, ExprError, ExprSyntaxError, as_expr, evaluate_points, parse_expr
from .grid import GridSpec, max_abs_location
from .operators import (
    VectorField,
    divergence,
    gradient,
    hessian,
    hessian_restricted,
    laplacian,
    lie_derivative_metric,
)
from .soliton import (
    NotPeriodicError,
    PeriodicBox,
    SolitonField,
    SolitonParams,
    classify,
    gradient_soliton_residual,
    killing_check,
    max_residual,
    soliton_residual,
    stokes_check,
    trace_of,
    trace_residual,
)
from .verify import (
    Report,
    ReportEntry,
    compare_tensors,
    fd_derivative_points,
    numeric_determinants,
    numeric_inverse_error,
    random_expr,
    random_potential,
    random_strict_metric,
    random_uv_function,
    random_walker_metric,
)
from .walker import (
    SymTensor2,
    WalkerMetric,
    classify_metric,
    flat_metric,
    metric_components,
    inverse_metric,
    restricted_form,
    restricted_metric,
)


class ScenarioError(ValueError):
    """Malformed scenario; the command line maps it to exit status 2."""


@dataclass(frozen=True)
class CheckSpec:
    name: str
    expect: str = "pass"
    tol: float | None = None


@dataclass
class Scenario:
    name: str
    metric: tuple[str, str, str] | None = None
    params: dict[str, float] = dc_field(default_factory=dict)
    field: dict | None = None
    soliton: SolitonParams | None = None
    grid: GridSpec = dc_field(default_factory=GridSpec)
    constructor: dict | None = None
    stokes: dict | None = None
    random: dict = dc_field(default_factory=dict)
    checks: list[CheckSpec] | None = None
    expected: dict = dc_field(default_factory=dict)
    tol: float | None = None
    seed: int = 0


_TOP_KEYS = {"name", "description", "metric", "params", "field", "soliton", "grid", "constructor",
             "stokes", "random", "checks", "expected", "tol", "seed"}


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _grid(spec, where: str = "grid") -> GridSpec:
    if spec is None:
        return GridSpec()
    if isinstance(spec, int):
        return GridSpec.uniform(n=spec)
    if not isinstance(spec, dict):
        raise ScenarioError(f"{where}: expected an object")
    try:
        if "axes" in spec:
            axes = tuple((_num(a[0], where), _num(a[1], where), int(a[2])) for a in spec["axes"])
            return GridSpec(axes)
        return GridSpec.uniform(_num(spec.get("lo", -1.0), where), _num(spec.get("hi", 1.0), where),
                                int(spec.get("n", 5)))
    except (TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{where}: {exc}") from None


def load_scenario(data: Mapping) -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError("scenario needs a non-empty 'name'")
    sc = Scenario(name=name)
    if "metric" in data:
        m = data["metric"]
        if not isinstance(m, dict) or set(m) != {"f1", "f2", "f3"}:
            raise ScenarioError("metric: expected an object with exactly f1, f2, f3")
        sc.metric = tuple(str(m[k]) for k in ("f1", "f2", "f3"))
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("params: expected an object")
    sc.params = {str(k): _num(v, f"params.{k}") for k, v in params.items()}
    if "field" in data:
        fd = data["field"]
        if not isinstance(fd, dict) or (("X" in fd) == ("f" in fd)):
            raise ScenarioError("field: give exactly one of 'X' or 'f'")
        sc.field = fd
    if "soliton" in data:
        s = data["soliton"]
        if not isinstance(s, dict):
            raise ScenarioError("soliton: expected an object")
        sc.soliton = SolitonParams(_num(s.get("lambda", 0.0), "soliton.lambda"),
                                   _num(s.get("beta1", 1.0), "soliton.beta1"),
                                   _num(s.get("beta2", 0.0), "soliton.beta2"))
    sc.grid = _grid(data.get("grid"))
    if "constructor" in data:
        c = data["constructor"]
        if not isinstance(c, dict) or c.get("family") not in FAMILIES:
            raise ScenarioError(f"constructor.family must be one of {', '.join(sorted(FAMILIES))}")
        sc.constructor = c
    if sc.field is not None and sc.constructor is not None and sc.constructor["family"] in _FIELD_FAMILIES:
        raise ScenarioError("give either a field or a constructor that builds one, not both")
    sc.stokes = data.get("stokes")
    sc.random = dict(data.get("random", {}))
    if "checks" in data:
        sc.checks = []
        for i, c in enumerate(data["checks"]):
            if isinstance(c, str):
                c = {"name": c}
            if not isinstance(c, dict) or c.get("name") not in CHECKS:
                raise ScenarioError(f"checks[{i}]: unknown check {c!r}")
            expect = c.get("expect", "pass")
            if expect not in ("pass", "flag"):
                raise ScenarioError(f"checks[{i}]: expect must be 'pass' or 'flag'")
            tol = _num(c["tol"], f"checks[{i}].tol") if "tol" in c else None
            sc.checks.append(CheckSpec(c["name"], expect, tol))
        names = [c.name for c in sc.checks]
        if len(set(names)) != len(names):
            raise ScenarioError("checks: each check may be listed once")
    sc.expected = dict(data.get("expected", {}))
    if "tol" in data:
        sc.tol = _num(data["tol"], "tol")
    sc.seed = int(data.get("seed", 0))
    return sc


# ---------------------------------------------------------------------------
# evaluation context


def _parse(text, where: str) -> Expr:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return as_expr(float(text))
    if not isinstance(text, str):
        raise ScenarioError(f"{where}: expected an expression string, got {text!r}")
    try:
        return parse_expr(text)
    except ExprSyntaxError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


class Context:
    """Lazily materialised objects a check may need."""

    def __init__(self, sc: Scenario, tol_override: float | None = None):
        self.sc = sc
        self.tol_override = tol_override
        self.points = sc.grid.points()
        self.rng = np.random.default_rng(sc.seed)

    def fail(self, msg: str):
        raise PreconditionError(msg)

    @cached_property
    def cons(self) -> dict:
        c = self.sc.constructor
        if c is None:
            return {}
        return build_family(c, self.sol, self.sc.params)

    @cached_property
    def metric(self) -> WalkerMetric:
        if "metric" in self.cons:
            return self.cons["metric"]
        if self.sc.metric is None:
            return WalkerMetric(*flat_metric().potentials, dict(self.sc.params))
        f1, f2, f3 = (_parse(t, f"metric.{k}") for t, k in zip(self.sc.metric, ("f1", "f2", "f3")))
        m = WalkerMetric(f1, f2, f3, dict(self.sc.params))
        _check_bound([f1, f2, f3], self.sc.params)
        return m

    @cached_property
    def sol(self) -> SolitonParams:
        return self.sc.soliton or SolitonParams()

    @cached_property
    def field(self) -> SolitonField:
        if "f" in self.cons:
            return SolitonField(f=self.cons["f"])
        fd = self.sc.field
        if fd is None:
            self.fail("this check needs a field or a constructor that builds one")
        if "X" in fd:
            comps = [_parse(t, f"field.X[{i}]") for i, t in enumerate(_four(fd["X"], "field.X"))]
            _check_bound(comps, self.sc.params)
            return SolitonField(X=VectorField(tuple(comps)))
        f = _parse(fd["f"], "field.f")
        Y = VectorField.zero()
        if "Y" in fd:
            Y = VectorField(tuple(_parse(t, f"field.Y[{i}]") for i, t in enumerate(_four(fd["Y"], "field.Y"))))
        _check_bound([f, *Y.comps], self.sc.params)
        return SolitonField(f=f, Y=Y)

    @property
    def f(self) -> Expr:
        fl = self.field
        if not fl.decomposed:
            self.fail("this check needs a potential f")
        return fl.f

    def entry(self, spec: CheckSpec, name: str, worst: float, where, default_tol: float,
              notes=(), values=None, passed: bool | None = None) -> ReportEntry:
        tol = spec.tol if spec.tol is not None else (self.tol_override or default_tol)
        ok = bool(worst < tol) if passed is None else passed
        return ReportEntry(name, float(worst), _loc(where), tol, ok, spec.expect, list(notes), values or {})

    def compare(self, spec: CheckSpec, A, B, default_tol: float, notes=()) -> ReportEntry:
        e = compare_tensors(A, B, points=self.points, tol=1.0, params=self.metric.params)
        return self.entry(spec, spec.name, e.max_residual, e.location, default_tol, notes)

    def residual(self, spec: CheckSpec, T, default_tol: float, notes=(), values=None) -> ReportEntry:
        worst, where = max_residual(T, points=self.points, params=self.metric.params)
        return self.entry(spec, spec.name, worst, where, default_tol, notes, values)


def _loc(where):
    if where is None:
        return None
    return [round(float(c), 12) for c in where]


def _four(v, where):
    if not isinstance(v, list) or len(v) != 4:
        raise ScenarioError(f"{where}: expected a list of four expressions")
    return v


def _check_bound(exprs, params):
    missing = sorted(set().union(*(e.params for e in exprs)) - set(params))
    if missing:
        raise ScenarioError(f"unbound parameters: {', '.join(missing)}")


# ---------------------------------------------------------------------------
# constructor families


def _q(c) -> con.Quadrature:
    return con.Quadrature(int(c.get("panels", 256)))


def _fam_strict(c, p, params):
    F = _parse(c.get("F", "0"), "constructor.F")
    return {"f": con.build_strict_potential(p.lam, float(c.get("a", 0.0)), float(c.get("b", 0.0)), F, params)}


def _fam_A2(c, p, params):
    a, A = _parse(c.get("a", "0"), "constructor.a"), _parse(c.get("A", "0"), "constructor.A")
    e = con.build_A2(a, p.lam, A, _q(c), float(c.get("u0", 0.0)), float(c.get("tau0", 0.0)))
    return {"A2": e, "coef": a}


def _fam_A3(c, p, params):
    b, B = _parse(c.get("b", "0"), "constructor.b"), _parse(c.get("B", "0"), "constructor.B")
    e = con.build_A3(b, p.lam, B, _q(c), float(c.get("v0", 0.0)), float(c.get("tau1", 0.0)))
    return {"A3": e, "coef": b}


def _fam_c(c, p, params):
    h = _parse(c.get("h", "1"), "constructor.h")
    e = con.build_c(h, p.lam, float(c.get("a1", 0.0)), float(c.get("m1", 0.0)), _q(c),
                    float(c.get("eps", 0.0)), float(c.get("tau1", 0.0)))
    return {"c": e, "h": h, "a1": float(c.get("a1", 0.0))}


def _fam_reduced(c, p, params):
    A4 = _parse(c["A4"], "constructor.A4") if "A4" in c else None
    d = con.ReducedData(b=_parse(c.get("b", "0"), "constructor.b"), c=_parse(c.get("c", "0"), "constructor.c"),
                   K=float(c.get("K", 0.0)), h=_parse(c.get("h", "0"), "constructor.h"), A4=A4,
                   u1=float(c.get("u1", 0.0)))
    f = con.build_reduced_potential(d, p.lam, _q(c))
    return {"metric": d.metric(params), "f": f, "data": d}


def _fam_b0(c, p, params):
    shift = _parse(c["c_shift"], "constructor.c_shift") if "c_shift" in c else None
    keys = ("K", "a1", "a2", "a3", "a4", "m1", "eps", "tau1", "zeta", "xi")
    kw = {k: float(c[k]) for k in keys if k in c}
    cfg = con.build_b0(p.lam, _parse(c.get("h", "1"), "constructor.h"), q=_q(c), c_shift=shift, **kw)
    return {"metric": cfg.metric, "f": cfg.f, "data": cfg.data, "conditions": cfg.notes}


def _fam_consistent(c, p, params):
    shift = _parse(c["c_shift"], "constructor.c_shift") if "c_shift" in c else None
    keys = ("h0", "K", "a1", "a2", "a3", "a4", "anchor")
    kw = {k: float(c[k]) for k in keys if k in c}
    cfg = con.consistent_b0(p.lam, q=_q(c), c_shift=shift, **kw)
    return {"metric": cfg.metric, "f": cfg.f, "data": cfg.data, "conditions": cfg.notes}


def _fam_nonexistence(c, p, params):
    abc = [_parse(c.get(k, "0"), f"constructor.{k}") for k in ("a", "b", "c")]
    return {"abc": abc, "degree": int(c.get("degree", 2)), "q": con.Quadrature(int(c.get("panels", 32))),
            "scan_grid": _grid(c.get("grid", {"n": 3}), "constructor.grid")}


FAMILIES = {
    "strict_potential": _fam_strict,
    "A2": _fam_A2,
    "A3": _fam_A3,
    "c": _fam_c,
    "reduced": _fam_reduced,
    "b0": _fam_b0,
    "b0_consistent": _fam_consistent,
    "nonexistence": _fam_nonexistence,
}
_FIELD_FAMILIES = {"strict_potential", "reduced", "b0", "b0_consistent"}


def build_family(c: dict, p: SolitonParams, params) -> dict:
    return FAMILIES[c["family"]](c, p, params)


# ---------------------------------------------------------------------------
# checks


def _ck_christoffel(ctx: Context, s: CheckSpec):
    return ctx.compare(s, christoffel_closed(ctx.metric), christoffel_general(ctx.metric), 1e-9)


def _ck_ricci(ctx, s):
    return ctx.compare(s, ricci_closed(ctx.metric), ricci_general(ctx.metric), 1e-9)


def _ck_scalar(ctx, s):
    m = ctx.metric
    return ctx.compare(s, scalar_curvature(m, "closed"), scalar_curvature(m), 1e-9)


def _ck_scalar_trace(ctx, s):
    m = ctx.metric
    return ctx.compare(s, scalar_from_ricci_trace(ricci_general(m)), scalar_curvature(m), 1e-9)


def _ck_det(ctx, s):
    d = numeric_determinants(ctx.metric, ctx.points)
    worst, where = max_abs_location(d - 1.0, ctx.points)
    return ctx.entry(s, s.name, worst, where, 1e-12)


def _ck_inverse(ctx, s):
    err = numeric_inverse_error(ctx.metric, inverse_metric(ctx.metric), ctx.points)
    return ctx.entry(s, s.name, err, None, 1e-10)


def _ck_strict(ctx, s):
    m = ctx.metric
    cls = classify_metric(m)
    notes = [f"metric class: {cls.tag}"]
    ric = ricci_general(m)
    worst, where = max_residual(list(ric.comps) + [scalar_curvature(m)], points=ctx.points, params=m.params)
    e = ctx.entry(s, s.name, worst, where, 1e-12, notes)
    if cls.tag != "strict":
        e.passed = False
        e.notes.append("metric is not strict; Ricci need not vanish")
    return e


def _ck_restricted(ctx, s):
    m = ctx.metric
    form = restricted_form(m)
    if form is None:
        ctx.fail("metric is not of the form f2 = 0, f1 = f3 = x a + y b + c")
    return ctx.compare(s, ricci_restricted(*form, m.params), ricci_general(m), 1e-9)


def _ck_lap_closed(ctx, s):
    m, f = ctx.metric, ctx.f
    return ctx.compare(s, laplacian(m, f, "closed"), laplacian(m, f), 1e-9)


def _ck_lap_divgrad(ctx, s):
    m, f = ctx.metric, ctx.f
    return ctx.compare(s, divergence(m, gradient(m, f)), laplacian(m, f), 1e-9)


def _ck_hess_trace(ctx, s):
    m, f = ctx.metric, ctx.f
    return ctx.compare(s, trace_of(m, hessian(m, f)), laplacian(m, f), 1e-9)


def _ck_lie_grad(ctx, s):
    m, f = ctx.metric, ctx.f
    return ctx.compare(s, lie_derivative_metric(m, gradient(m, f)), hessian(m, f).scale(2.0), 1e-9)


def _ck_hess_literal(ctx, s):
    m, f = ctx.metric, ctx.f
    lit, gen = hessian(m, f, literal=True), hessian(m, f)
    diff = lit - gen
    vals = diff.evaluate(ctx.points, m.params)
    bad = [f"{i + 1}{j + 1}" for i in range(4) for j in range(i, 4) if np.max(np.abs(vals[:, i, j])) > 1e-9]
    e = ctx.compare(s, lit, gen, 1e-9)
    e.values["mismatched_components"] = bad
    if bad:
        e.notes.append("printed component list disagrees with the general Hessian at " + ", ".join(bad))
    return e


def _ck_hess_restricted_literal(ctx, s):
    m, f = ctx.metric, ctx.f
    form = restricted_form(m)
    if form is None:
        ctx.fail("metric is not of the form f2 = 0, f1 = f3 = x a + y b + c")
    lit = hessian_restricted(*form, f, literal=True)
    cor = hessian_restricted(*form, f)
    gen = hessian(m, f)
    e = ctx.compare(s, lit, gen, 1e-9)
    vals = (lit - gen).evaluate(ctx.points, m.params)
    bad = [f"{i + 1}{j + 1}" for i in range(4) for j in range(i, 4) if np.max(np.abs(vals[:, i, j])) > 1e-9]
    cworst, _ = max_residual(cor - gen, points=ctx.points, params=m.params)
    e.values["mismatched_components"] = bad
    e.values["corrected_list_error"] = float(f"{cworst:.3e}")
    return e


def _ck_fd(ctx, s):
    m, f = ctx.metric, ctx.f
    from .expr import differentiate

    worst, where = 0.0, None
    for c in ("x", "y", "u", "v"):
        sym = evaluate_points(differentiate(f, c), ctx.points, m.params)
        num = fd_derivative_points(f, c, ctx.points, 1e-5, m.params)
        rel = np.abs(sym - num) / np.maximum(1.0, np.abs(sym))
        k = int(np.argmax(rel))
        if rel[k] > worst:
            worst, where = float(rel[k]), ctx.points[k]
    return ctx.entry(s, s.name, worst, where, 1e-6, ["relative error, central differences h = 1e-5"])


def _ck_classification(ctx, s):
    p = ctx.sol
    cls = classify(p)
    return ctx.entry(s, s.name, 0.0, None, 1.0, [f"lambda = {p.lam:g}: {cls.value}"],
                     {"class": cls.value, "metric_class": classify_metric(ctx.metric).tag})


def _ck_soliton(ctx, s):
    m, fl = ctx.metric, ctx.field
    T = soliton_residual(m, fl, ctx.sol, ctx.sc.grid)
    return ctx.residual(s, T, 1e-8, ["2 beta1 Ric + L_X g - (-2 lambda + beta2 R) g"])


def _ck_gradient_soliton(ctx, s):
    T = gradient_soliton_residual(ctx.metric, ctx.f, ctx.sol)
    return ctx.residual(s, T, 1e-8, ["2 Hess f + 2 beta1 Ric - (-2 lambda + beta2 R) g"])


def _trace_values(ctx):
    m, p = ctx.metric, ctx.sol
    R = evaluate_points(scalar_curvature(m), ctx.points, m.params)
    return {"R_min": float(f"{R.min():.6e}"), "R_max": float(f"{R.max():.6e}"),
            "derived": f"laplacian f = -4 lambda + (2 beta2 - beta1) R = {_affine(-4 * p.lam, 2 * p.beta2 - p.beta1)}",
            "printed": f"laplacian f = 4(-lambda + (beta2/2 - beta1) R) = {_affine(-4 * p.lam, 4 * (p.beta2 / 2 - p.beta1))}"}


def _affine(c0: float, c1: float) -> str:
    sign = "-" if c1 < 0 else "+"
    return f"{c0:g} {sign} {abs(c1):g} R"


def _ck_trace(ctx, s):
    r = trace_residual(ctx.metric, ctx.field, ctx.sol)
    e = ctx.residual(s, r, 1e-8, values=_trace_values(ctx))
    return _lambda_note(ctx, e)


def _ck_trace_literal(ctx, s):
    r = trace_residual(ctx.metric, ctx.field, ctx.sol, literal=True)
    return ctx.residual(s, r, 1e-8, ["printed trace coefficient on beta1 R"], _trace_values(ctx))


def _lambda_note(ctx, e):
    """When laplacian f and R are constant, report the lambda the trace identity forces."""
    m, p = ctx.metric, ctx.sol
    lap = evaluate_points(laplacian(m, ctx.f), ctx.points, m.params)
    R = evaluate_points(scalar_curvature(m), ctx.points, m.params)
    if np.ptp(lap) < 1e-12 and np.ptp(R) < 1e-12:
        forced = ((2 * p.beta2 - p.beta1) * R[0] - lap[0]) / 4.0
        e.values["lambda_forced"] = float(f"{forced:.6e}")
        if abs(forced - p.lam) > 1e-12:
            e.notes.append(f"trace identity forces lambda = {forced:.6g}, scenario has {p.lam:.6g}")
    return e


def _ck_killing(ctx, s):
    m = ctx.metric
    X = ctx.field.vector(m)
    k = killing_check(m, X, ctx.sc.grid)
    passed = k.kind != "neither"
    e = ctx.entry(s, s.name, k.deviation, None, 1e-9, [f"field is {k.kind.replace('_', ' ')}"],
                  {"kind": k.kind}, passed=passed)
    if k.factor is not None:
        e.values["factor"] = str(k.factor)
    return e


def _ck_stokes(ctx, s):
    st = ctx.sc.stokes or {}
    box = PeriodicBox(tuple(st.get("lo", (0.0,) * 4)), tuple(st.get("hi", (1.0,) * 4)))
    try:
        val = stokes_check(ctx.metric, ctx.f, box, int(st.get("n", 32)), ctx.metric.params)
    except NotPeriodicError as exc:
        return ctx.entry(s, s.name, float("inf"), None, 1e-8, [str(exc)], passed=False)
    return ctx.entry(s, s.name, abs(val), None, 1e-8, ["mean of laplacian f over the periodic box"],
                     {"volume": box.volume})


def _ck_strict_potential(ctx, s):
    m = ctx.metric
    r = laplacian(m, ctx.f) + 4.0 * ctx.sol.lam
    return ctx.residual(s, r, 1e-10, ["laplacian f + 4 lambda"])


def _ode(ctx, s, key, var):
    c = ctx.cons
    if key not in c:
        ctx.fail(f"constructor family does not build {key}")
    r = con.ode_residual_fd(c[key], c["coef"], ctx.sol.lam, var, ctx.points, params=ctx.metric.params)
    worst, where = max_abs_location(r[None, :], ctx.points)
    return ctx.entry(s, s.name, worst, where, 1e-6, ["derivative by central differences of quadrature values"])


def _ck_a2(ctx, s):
    return _ode(ctx, s, "A2", "u")


def _ck_a3(ctx, s):
    return _ode(ctx, s, "A3", "v")


def _ck_c(ctx, s):
    c = ctx.cons
    if "c" not in c:
        ctx.fail("constructor family does not build c")
    r = con.c_residual_fd(c["c"], c["h"], ctx.sol.lam, c["a1"], ctx.points)
    worst, where = max_abs_location(r[None, :], ctx.points)
    return ctx.entry(s, s.name, worst, where, 1e-6, ["c' + 2 lambda c / h + 2 a1 / h"])


REFERENCE_PANELS = 4096


def _ck_convergence(ctx, s):
    """Self-convergence of the constructed values under panel doubling.

    Errors are measured against a 4096-panel reference; each doubling must
    gain 8x until the 1e-10 floor.  Finite-difference residuals are not used
    here: near the lower limit the closing quadrature piece is not refined by
    a doubling, which makes residual maxima jump between resolutions.
    """
    c = dict(ctx.sc.constructor or {})
    fam = c.get("family")
    if fam not in ("A2", "A3", "c"):
        ctx.fail("convergence check needs an A2, A3 or c constructor")
    key = {"A2": "A2", "A3": "A3", "c": "c"}[fam]

    def values(n):
        c["panels"] = n
        return evaluate_points(build_family(c, ctx.sol, ctx.sc.params)[key], ctx.points, ctx.sc.params)

    ref = values(REFERENCE_PANELS)
    panels = [8, 16, 32, 64, 128, 256]
    errs = [float(np.max(np.abs(values(n) - ref))) for n in panels]
    worst_ratio = math.inf
    for a, b in zip(errs, errs[1:]):
        if b > 1e-10:
            worst_ratio = min(worst_ratio, a / b)
    passed = worst_ratio >= 8.0
    return ctx.entry(s, s.name, errs[-1], None, 1.0,
                     [f"smallest gain per doubling above the floor: {worst_ratio:.3g}",
                      f"errors against a {REFERENCE_PANELS}-panel reference"],
                     {"panels": panels, "errors": [float(f"{e:.3e}") for e in errs]}, passed=passed)


def _reduced(ctx, s, literal):
    data = ctx.cons.get("data")
    rs = con.reduced_system_residuals(ctx.metric, ctx.f, ctx.sol, data, literal=literal)
    worst, where = max_residual(rs, points=ctx.points, params=ctx.metric.params)
    vals = [float(f"{max_residual([r], points=ctx.points, params=ctx.metric.params)[0]:.3e}") for r in rs]
    return ctx.entry(s, s.name, worst, where, 1e-6, values={"per_equation": vals})


def _ck_reduced(ctx, s):
    e = _reduced(ctx, s, False)
    for n in ctx.cons.get("conditions", []):
        e.notes.append(f"configuration condition violated: {n}")
    return e


def _ck_reduced_literal(ctx, s):
    return _reduced(ctx, s, True)


def _ck_reduced_equiv(ctx, s):
    """Reduced system (with the first-order components) vanishes iff the full tensor does."""
    m, f, p = ctx.metric, ctx.f, ctx.sol
    tol = s.tol or 1e-6
    sys_r = con.reduced_system_residuals(m, f, p) + con.reduced_form_residuals(m, f, p)
    a, _ = max_residual(sys_r, points=ctx.points, params=m.params)
    b, where = max_residual(gradient_soliton_residual(m, f, p), points=ctx.points, params=m.params)
    agree = (a < tol) == (b < tol)
    return ctx.entry(s, s.name, b, where, tol, [f"system {a:.3e}, full tensor {b:.3e}"],
                     {"system": float(f"{a:.3e}"), "tensor": float(f"{b:.3e}")}, passed=agree)


def _ck_b0(ctx, s):
    T = gradient_soliton_residual(ctx.metric, ctx.f, ctx.sol)
    e = ctx.residual(s, T, 1e-6)
    for n in ctx.cons.get("conditions", []):
        e.notes.append(f"configuration condition violated: {n}")
    return e


def _ck_nonexistence(ctx, s):
    c = ctx.cons
    if "abc" not in c:
        ctx.fail("needs a nonexistence constructor block")
    scan = con.nonexistence_scan(*c["abc"], ctx.sol, c["degree"], c["q"], c["scan_grid"], ctx.sc.params)
    thr = s.tol if s.tol is not None else 1e-6
    notes = [f"least-squares minimum over {scan.basis_size} family coefficients on {scan.points} points"]
    return ctx.entry(s, s.name, scan.min_residual, None, thr, notes,
                     {"min_residual": float(f"{scan.min_residual:.6e}")}, passed=scan.min_residual > thr)


# -- seeded random property checks


def _rand_cfg(ctx):
    r = ctx.sc.random
    return int(r.get("count", 10)), int(r.get("points", 50))


def _rand_points(ctx, n):
    return ctx.rng.uniform(-1.0, 1.0, size=(n, 4))


def _ck_rand_closed(ctx, s):
    count, npts = _rand_cfg(ctx)
    worst, where = 0.0, None
    for _ in range(count):
        m = random_walker_metric(ctx.rng)
        pts = _rand_points(ctx, npts)
        for A, B in ((christoffel_closed(m), christoffel_general(m)), (ricci_closed(m), ricci_general(m)),
                     (scalar_curvature(m, "closed"), scalar_curvature(m))):
            e = compare_tensors(A, B, points=pts)
            if e.max_residual > worst:
                worst, where = e.max_residual, e.location
    return ctx.entry(s, s.name, worst, where, 1e-9, [f"{count} random metrics x {npts} points"])


def _ck_rand_strict(ctx, s):
    count, _ = _rand_cfg(ctx)
    worst, where = 0.0, None
    for _ in range(count):
        m = random_strict_metric(ctx.rng)
        w, loc = max_residual(list(ricci_general(m).comps) + [scalar_curvature(m)], points=ctx.points)
        if w > worst:
            worst, where = w, loc
    return ctx.entry(s, s.name, worst, where, 1e-12, [f"{count} random strict metrics"])


def _ck_rand_restricted(ctx, s):
    count, npts = _rand_cfg(ctx)
    worst, where = 0.0, None
    for _ in range(count):
        a, b, c = (random_uv_function(ctx.rng) for _ in range(3))
        m = restricted_metric(a, b, c)
        e = compare_tensors(ricci_restricted(a, b, c), ricci_general(m), points=_rand_points(ctx, npts))
        if e.max_residual > worst:
            worst, where = e.max_residual, e.location
    return ctx.entry(s, s.name, worst, where, 1e-9, [f"{count} random (a, b, c)"])


def _ck_rand_operators(ctx, s):
    count, npts = _rand_cfg(ctx)
    worst, where = 0.0, None
    for _ in range(count):
        m = random_walker_metric(ctx.rng)
        f = random_potential(ctx.rng)
        pts = _rand_points(ctx, npts)
        lap = laplacian(m, f)
        for A in (divergence(m, gradient(m, f)), trace_of(m, hessian(m, f)), laplacian(m, f, "closed")):
            e = compare_tensors(A, lap, points=pts)
            if e.max_residual > worst:
                worst, where = e.max_residual, e.location
    return ctx.entry(s, s.name, worst, where, 1e-9, [f"{count} random (metric, f) pairs"])


def _ck_rand_fd(ctx, s):
    from .expr import differentiate

    count, npts = _rand_cfg(ctx)
    worst, where = 0.0, None
    for _ in range(count):
        e = random_expr(ctx.rng)
        pts = _rand_points(ctx, npts)
        for c in ("x", "y", "u", "v"):
            sym = evaluate_points(differentiate(e, c), pts)
            num = fd_derivative_points(e, c, pts)
            rel = np.abs(sym - num) / np.maximum(1.0, np.abs(sym))
            k = int(np.argmax(rel))
            if rel[k] > worst:
                worst, where = float(rel[k]), pts[k]
    return ctx.entry(s, s.name, worst, where, 1e-6, [f"{count} random expressions, relative error"])


CHECKS: dict[str, tuple[str, Callable]] = {
    "christoffel_closed": ("curvature", _ck_christoffel),
    "ricci_closed": ("curvature", _ck_ricci),
    "scalar_closed": ("curvature", _ck_scalar),
    "scalar_trace": ("curvature", _ck_scalar_trace),
    "determinant": ("curvature", _ck_det),
    "inverse": ("curvature", _ck_inverse),
    "ricci_strict_zero": ("curvature", _ck_strict),
    "ricci_restricted": ("curvature", _ck_restricted),
    "laplacian_closed": ("soliton", _ck_lap_closed),
    "laplacian_div_grad": ("soliton", _ck_lap_divgrad),
    "hessian_trace": ("soliton", _ck_hess_trace),
    "lie_gradient": ("soliton", _ck_lie_grad),
    "hessian_literal": ("soliton", _ck_hess_literal),
    "hessian_restricted_literal": ("soliton", _ck_hess_restricted_literal),
    "fd_derivatives": ("soliton", _ck_fd),
    "classification": ("soliton", _ck_classification),
    "soliton_residual": ("soliton", _ck_soliton),
    "gradient_soliton_residual": ("soliton", _ck_gradient_soliton),
    "trace_residual": ("soliton", _ck_trace),
    "trace_literal": ("soliton", _ck_trace_literal),
    "killing": ("soliton", _ck_killing),
    "stokes": ("soliton", _ck_stokes),
    "strict_potential": ("construct", _ck_strict_potential),
    "a2_ode": ("construct", _ck_a2),
    "a3_ode": ("construct", _ck_a3),
    "c_ode": ("construct", _ck_c),
    "quadrature_convergence": ("construct", _ck_convergence),
    "reduced_system": ("construct", _ck_reduced),
    "reduced_literal": ("construct", _ck_reduced_literal),
    "reduced_equivalence": ("construct", _ck_reduced_equiv),
    "b0_residual": ("construct", _ck_b0),
    "nonexistence_scan": ("construct", _ck_nonexistence),
    "random_closed_forms": ("suite", _ck_rand_closed),
    "random_strict_flat": ("suite", _ck_rand_strict),
    "random_restricted_ricci": ("suite", _ck_rand_restricted),
    "random_operator_identities": ("suite", _ck_rand_operators),
    "random_fd": ("suite", _ck_rand_fd),
}


def default_checks(sc: Scenario, command: str) -> list[CheckSpec]:
    names: list[str] = []
    if command in ("curvature", "suite"):
        names += ["christoffel_closed", "ricci_closed", "scalar_closed", "scalar_trace", "determinant", "inverse"]
    has_field = sc.field is not None or (sc.constructor or {}).get("family") in _FIELD_FAMILIES
    if command in ("soliton", "suite") and has_field:
        names += ["classification", "soliton_residual", "trace_residual", "trace_literal"]
    if command in ("construct", "suite") and sc.constructor:
        fam = sc.constructor["family"]
        names += {
            "strict_potential": ["strict_potential"],
            "A2": ["a2_ode"],
            "A3": ["a3_ode"],
            "c": ["c_ode"],
            "reduced": ["reduced_system"],
            "b0": ["reduced_system", "b0_residual", "reduced_equivalence"],
            "b0_consistent": ["reduced_system", "b0_residual", "reduced_equivalence"],
            "nonexistence": ["nonexistence_scan"],
        }[fam]
    return [CheckSpec(n) for n in dict.fromkeys(names)]


def selected_checks(sc: Scenario, command: str) -> list[CheckSpec]:
    if sc.checks is None:
        return default_checks(sc, command)
    if command == "suite":
        return list(sc.checks)
    groups = {"curvature": {"curvature"}, "soliton": {"soliton"}, "construct": {"construct"}}[command]
    return [c for c in sc.checks if CHECKS[c.name][0] in groups]


def run_suite(sc: Scenario, command: str = "suite", tol: float | None = None) -> Report:
    """Run the selected checks; a crashing check becomes a failed entry."""
    ctx = Context(sc, tol)
    report = Report(sc.name, info={"command": command, "grid_points": sc.grid.size, "seed": sc.seed})
    if sc.soliton is not None:
        report.info["soliton"] = {"lambda": sc.soliton.lam, "beta1": sc.soliton.beta1, "beta2": sc.soliton.beta2}
    if sc.expected:
        report.info["expected"] = sc.expected
    for spec in selected_checks(sc, command):
        try:
            entry = CHECKS[spec.name][1](ctx, spec)
        except ScenarioError:
            raise
        except Exception as exc:  # noqa: BLE001 - every failure becomes a report line
            entry = ReportEntry(spec.name, float("nan"), None, spec.tol or 0.0, False, spec.expect,
                                [f"{type(exc).__name__}: {exc}"], crashed=True)
        entry.name = spec.name
        report.add(entry)
    return report
