import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from walker_soliton.constructors import build_strict_potential
from walker_soliton.expr import evaluate, parse_expr
from walker_soliton.grid import GridSpec
from walker_soliton.operators import VectorField
from walker_soliton.soliton import (
    InvariantViolation,
    NotPeriodicError,
    PeriodicBox,
    SolitonClass,
    SolitonField,
    SolitonParams,
    classify,
    gradient_soliton_residual,
    holds,
    killing_check,
    max_residual,
    soliton_residual,
    stokes_check,
    trace_of,
    trace_residual,
)
from walker_soliton.verify import random_strict_metric
from walker_soliton.walker import WalkerMetric, flat_metric, metric_components, restricted_metric

P = parse_expr
GRID = GridSpec.uniform(n=3)
X2 = WalkerMetric.from_strings("x^2", "0", "0")


@pytest.mark.parametrize("lam, tag", [(0.0, "steady"), (-1.0, "expanding"), (1.0, "shrinking")])
def test_classification_examples(lam, tag):
    assert classify(SolitonParams(lam)).value == tag


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.1, 10))
def test_class_ignores_beta_scaling(lam, beta1, scale):
    p, q = SolitonParams(lam, beta1, 0.5), SolitonParams(lam, beta1 * scale, 0.5 * scale)
    assert classify(p) is classify(q)


def test_soliton_params_must_be_finite():
    with pytest.raises(ValueError):
        SolitonParams(float("nan"))


def test_flat_residuals_vanish():
    p = SolitonParams(0.0)
    assert holds(soliton_residual(flat_metric(), SolitonField(X=VectorField.zero()), p), GRID)
    assert holds(gradient_soliton_residual(flat_metric(), P("0"), p), GRID)


@pytest.mark.parametrize("lam", [-1.5, 0.25, 2.0])
def test_linear_potential_solves_flat_gradient_soliton(lam):
    f = P(f"{-lam}*(x*u + y*v)")
    assert holds(gradient_soliton_residual(flat_metric(), f, SolitonParams(lam)), GRID, tol=1e-12)
    assert holds(soliton_residual(flat_metric(), SolitonField(f=f), SolitonParams(lam)), GRID, tol=1e-12)


def test_divergence_free_part_is_enforced():
    with pytest.raises(InvariantViolation):
        soliton_residual(flat_metric(), SolitonField(f=P("0"), Y=VectorField.of("x", 0, 0, 0)), SolitonParams())
    ok = SolitonField(f=P("0"), Y=VectorField.of("-y", "x", 0, 0))
    soliton_residual(flat_metric(), ok, SolitonParams())


def test_poisson_solution_on_flat_restricted_metric_fails_full_tensor():
    m = restricted_metric("0", "0", "0")
    lam = 0.5
    f = P("-0.5*(x*u + y*v) + x^2*y^2")  # second term is harmonic on the flat metric but spoils the tensor
    field = SolitonField(f=f)
    p = SolitonParams(lam)
    assert holds(trace_residual(m, field, p), GRID, tol=1e-12)
    assert holds(trace_residual(m, field, p, literal=True), GRID, tol=1e-12)
    assert max_residual(soliton_residual(m, field, p), GRID)[0] > 1.0


def test_trace_variants_differ_by_beta1_coefficient():
    field = SolitonField(f=P("0"))
    p = SolitonParams(0.0, 1.0, 0.0)
    assert evaluate(trace_residual(X2, field, p), (0.3, 0, 0, 0)) == pytest.approx(2.0)
    assert evaluate(trace_residual(X2, field, p, literal=True), (0.3, 0, 0, 0)) == pytest.approx(8.0)


@pytest.mark.parametrize("seed", range(4))
def test_strict_potential_solves_trace_equation(seed):
    rng = np.random.default_rng(seed)
    m = random_strict_metric(rng)
    lam = float(rng.uniform(-2, 2))
    f = build_strict_potential(lam, 0.7, -0.3, P("sin(u)*v^2"))
    p = SolitonParams(lam, 1.0, 0.4)
    for literal in (False, True):
        assert holds(trace_residual(m, SolitonField(f=f), p, literal), GRID, tol=1e-10)


def test_trace_of_vanishing_residual_vanishes():
    # contraction is linear: a tensor solution is also a trace solution
    lam = 0.8
    f = P(f"{-lam}*(x*u + y*v)")
    p = SolitonParams(lam, 1.0, 0.3)
    m = flat_metric()
    field = SolitonField(f=f)
    assert holds(soliton_residual(m, field, p), GRID, tol=1e-12)
    assert holds(trace_residual(m, field, p), GRID, tol=1e-12)
    assert holds(trace_of(m, soliton_residual(m, field, p)), GRID, tol=1e-12)


def test_trace_needs_decomposed_field():
    with pytest.raises(ValueError):
        trace_residual(flat_metric(), SolitonField(X=VectorField.zero()), SolitonParams())
    with pytest.raises(ValueError):
        SolitonField()


def test_killing_examples():
    assert killing_check(X2, VectorField.zero()).kind == "killing"
    conf = killing_check(flat_metric(), VectorField.of("x", "y", "u", "v"))
    assert conf.kind == "conformal_killing"
    assert evaluate(conf.factor, (0.1, 0.2, 0.3, 0.4)) == pytest.approx(2.0)
    m = WalkerMetric.from_strings("u^2", "0", "0")
    assert killing_check(m, VectorField.of(0, 0, 1, 0)).kind == "neither"


@pytest.mark.parametrize("lam", [0.0, 0.7])
def test_killing_field_forces_steady_on_flat_restricted(lam):
    m = restricted_metric("0", "0", "v")
    X = VectorField.of(0, 0, 1, 0)
    assert killing_check(m, X).kind == "killing"
    p = SolitonParams(lam, 0.0, 0.0)
    res = soliton_residual(m, SolitonField(X=X), p)
    expected = metric_components(m).scale(2.0 * lam)
    assert holds(res - expected, GRID, tol=1e-12)
    assert holds(res, GRID) == (lam == 0.0)


def test_stokes_examples():
    assert abs(stokes_check(flat_metric(), P("sin(2*3.141592653589793*x)*sin(2*3.141592653589793*u)"))) < 1e-8
    assert stokes_check(flat_metric(), P("3")) == 0.0
    with pytest.raises(NotPeriodicError, match="f = u\\*v"):
        stokes_check(flat_metric(), P("u*v"))


def test_stokes_error_decays_faster_than_second_order():
    tau = "6.283185307179586"
    m = WalkerMetric.from_strings(f"2 + cos({tau}*y)", "0", f"sin({tau}*x)")
    f = P(f"exp(sin({tau}*x) + cos({tau}*y + {tau}*u))")
    errs = [abs(stokes_check(m, f, PeriodicBox(), n)) for n in (4, 8, 16)]
    assert errs[0] > 1.0
    # midpoint sums of smooth periodic data converge spectrally, far beyond a ratio of 4
    assert errs[0] / errs[1] > 100
    assert errs[2] < 1e-8
