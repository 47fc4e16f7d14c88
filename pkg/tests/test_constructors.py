import math

import numpy as np
import pytest

from walker_soliton.constructors import (
    Quadrature,
    ReducedData,
    VanishingCoefficientError,
    a2_residual,
    a3_residual,
    build_A2,
    build_A3,
    build_c,
    build_b0,
    build_strict_potential,
    build_reduced_potential,
    c_residual,
    c_residual_fd,
    check_nonvanishing,
    consistent_b0,
    nonexistence_scan,
    ode_residual_fd,
    reduced_form_residuals,
    reduced_system_residuals,
    y_coefficient,
)
from walker_soliton.curvature import PreconditionError
from walker_soliton.expr import evaluate, evaluate_points, parse_expr
from walker_soliton.grid import GridSpec
from walker_soliton.operators import laplacian
from walker_soliton.soliton import SolitonParams, gradient_soliton_residual, max_residual
from walker_soliton.verify import random_strict_metric
from walker_soliton.walker import WalkerMetric, restricted_metric

P = parse_expr
GRID = GridSpec.uniform(n=3)
UV = np.random.default_rng(11).uniform(-1, 1, size=(25, 4))


def worst(e, pts=UV, params=None):
    return float(np.max(np.abs(evaluate_points(e, pts, params))))


def test_quadrature_validates_panels():
    for bad in (0, 3, -2, 2.5):
        with pytest.raises(ValueError):
            Quadrature(bad)
    with pytest.raises(ValueError):
        Quadrature(8, "trapezoid")


@pytest.mark.parametrize("lam, a, b, F, m, expected", [
    (1.0, 0.0, 0.0, "0", WalkerMetric.from_strings("u", "v", "u*v"), -4.0),
    (0.0, 1.0, 0.0, "u*v", WalkerMetric.from_strings("u^2", "0", "v"), 0.0),
    (2.0, 0.0, 0.0, "sin(u)", WalkerMetric.from_strings("exp(u)", "0", "0"), -8.0),
])
def test_strict_potential_examples(lam, a, b, F, m, expected):
    f = build_strict_potential(lam, a, b, P(F))
    assert worst(laplacian(m, f) - expected) < 1e-12


def test_strict_potential_rejects_x_dependence():
    with pytest.raises(PreconditionError):
        build_strict_potential(1.0, 0, 0, P("x*u"))


@pytest.mark.parametrize("seed", range(3))
def test_strict_potential_on_random_strict_metrics(seed):
    rng = np.random.default_rng(seed)
    m = random_strict_metric(rng)
    f = build_strict_potential(-1.0, 0.3, 0.2, P("u^2*v"))
    assert worst(laplacian(m, f) - 4.0) < 1e-10


def test_A2_with_zero_coefficient_is_linear():
    A2 = build_A2(P("0"), 1.5, P("v^2"), u0=0.25)
    assert worst(A2 - P("v^2 - 1.5*(u - 0.25)")) < 1e-13
    assert worst(a2_residual(A2, P("0"), 1.5)) < 1e-13


def test_A2_exponential_case():
    A2 = build_A2(P("2"), 0.0, P("cos(v)"), tau0=0.5)
    assert worst(A2 - P("cos(v)*exp(u - 0.5)")) < 1e-8
    assert worst(a2_residual(A2, P("2"), 0.0)) < 1e-8


def test_A2_with_u_dependent_coefficient():
    A2 = build_A2(P("u"), 1.0, P("1 + v"))
    assert worst(a2_residual(A2, P("u"), 1.0)) < 1e-6
    assert float(np.max(np.abs(ode_residual_fd(A2, P("u"), 1.0, "u", UV)))) < 1e-6


def test_A3_mirror_cases():
    assert worst(build_A3(P("0"), 2.0, P("u"), v0=-0.5) - P("u - 2*(v + 0.5)")) < 1e-13
    assert worst(build_A3(P("2"), 0.0, P("u^2"), tau1=0.1) - P("u^2*exp(v - 0.1)")) < 1e-8
    A3 = build_A3(P("v"), 1.0, P("2 - u"))
    assert worst(a3_residual(A3, P("v"), 1.0)) < 1e-6
    assert float(np.max(np.abs(ode_residual_fd(A3, P("v"), 1.0, "v", UV)))) < 1e-6


def test_ode_error_drops_with_panels():
    # a = 2u: A2 = (1 - lam sqrt(pi/2) erf(u/sqrt 2)) e^{u^2/2}
    lam = 0.7
    us = np.linspace(-1, 1, 9)
    pts = np.zeros((9, 4))
    pts[:, 2] = us
    exact = np.array([(1 - lam * math.sqrt(math.pi / 2) * math.erf(u / math.sqrt(2))) * math.exp(u * u / 2)
                      for u in us])
    errs = []
    for panels in (8, 16, 32):
        A2 = build_A2(P("2*u"), lam, P("1"), Quadrature(panels))
        errs.append(float(np.max(np.abs(evaluate_points(A2, pts) - exact))))
        # the symbolic residual differentiates through the quadrature and stays exact
        assert worst(a2_residual(A2, P("2*u"), lam)) < 1e-12
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


def test_c_constant_coefficient():
    c = build_c(P("1"), 0.0, 0.5, 2.0, eps=0.25)
    assert worst(c - P("2 - 2*0.5*(v - 0.25)")) < 1e-13
    assert worst(c_residual(c, P("1"), 0.0, 0.5)) < 1e-13


def test_c_exponential_decay():
    c = build_c(P("1"), 1.0, 0.0, 3.0, tau1=-0.5)
    assert worst(c - P("3*exp(-2*(v + 0.5))")) < 1e-8


def test_c_variable_coefficient():
    h = P("1 + v^2")
    c = build_c(h, 1.0, 1.0, 0.5)
    assert worst(c_residual(c, h, 1.0, 1.0)) < 1e-6
    assert float(np.max(np.abs(c_residual_fd(c, h, 1.0, 1.0, UV)))) < 1e-6


@pytest.mark.parametrize("h, where", [("v - 0.3", 0.3), ("v^2 - 0.25", -0.5), ("v", 0.0)])
def test_vanishing_h_names_its_zero(h, where):
    with pytest.raises(VanishingCoefficientError) as err:
        build_c(P(h), 1.0, 1.0, 0.0)
    assert err.value.location == pytest.approx(where, abs=1e-6)
    check_nonvanishing(P("2 + v"))


def test_y_coefficient_linear_case():
    d = ReducedData(b=P("1"), h=P("cos(v)"), K=0.6, u1=-0.2)
    assert worst(y_coefficient(d, 0.0) - P("0.3*(u + 0.2) + cos(v)")) < 1e-13
    f = build_reduced_potential(ReducedData(h=P("v")), 2.0)
    assert worst(f - P("-2*u*x + v*y")) < 1e-13


def test_anchors_must_lie_in_domain():
    with pytest.raises(ValueError, match="eps"):
        ReducedData(eps=3.0)


def test_flat_reduced_system():
    m = restricted_metric("0", "0", "0")
    p = SolitonParams(0.7, 1.0, 0.0)
    f = P("-0.7*(x*u + y*v)")
    assert max(worst(r) for r in reduced_system_residuals(m, f, p)) < 1e-13
    assert max(worst(r) for r in reduced_form_residuals(m, f, p)) < 1e-13
    assert max_residual(gradient_soliton_residual(m, f, p), GRID)[0] < 1e-13


def test_reduced_system_needs_family_form():
    with pytest.raises(PreconditionError):
        reduced_system_residuals(restricted_metric("u", "0", "0"), P("0"), SolitonParams())


@pytest.mark.parametrize("lam", [-0.8, 0.5])
def test_consistent_b0_is_a_soliton(lam):
    cfg = consistent_b0(lam, K=0.4, a2=0.3, a3=-0.2, a4=1.0)
    assert cfg.notes == []
    p = SolitonParams(lam, 1.0, 0.0)
    assert max_residual(gradient_soliton_residual(cfg.metric, cfg.f, p), GRID)[0] < 1e-6
    assert max(worst(r) for r in reduced_system_residuals(cfg.metric, cfg.f, p)) < 1e-6
    shifted = consistent_b0(lam, K=0.4, a2=0.3, a3=-0.2, a4=1.0, c_shift=P("0.1*v^2"))
    assert max_residual(gradient_soliton_residual(shifted.metric, shifted.f, p), GRID)[0] > 1e-3
    assert max(worst(r) for r in reduced_system_residuals(shifted.metric, shifted.f, p)) > 1e-3


def test_generic_b0_fails_and_is_diagnosed():
    cfg = build_b0(0.5, P("2 + v"), K=1.0, a1=1.0, m1=0.3, eps=0.1, tau1=-0.1)
    assert "h'(v) must equal -lambda" in cfg.notes
    assert "c must be constant unless lambda = K = 0" in cfg.notes
    p = SolitonParams(0.5, 1.0, 0.0)
    assert max_residual(gradient_soliton_residual(cfg.metric, cfg.f, p), GRID)[0] > 1e-3


def test_steady_b0_allows_any_c():
    cfg = build_b0(0.0, P("2"), a1=1.0, m1=0.5)
    assert cfg.notes == []
    p = SolitonParams(0.0, 1.0, 0.0)
    assert max_residual(gradient_soliton_residual(cfg.metric, cfg.f, p), GRID)[0] < 1e-9


def test_reduced_system_equivalent_to_tensor_equation():
    rng = np.random.default_rng(7)
    b, c = P("u*v + 0.3"), P("sin(u) + v^2")
    m = restricted_metric("0", b, c)
    p = SolitonParams(0.4, 1.3, 0.0)
    pts = rng.uniform(-1, 1, size=(20, 4))
    for f in (P("x*u^2 + y*v + u*v^2"), P("exp(u)*x + y^2*v")):
        full = gradient_soliton_residual(m, f, p)
        half = [full[i, j] * 0.5 for i, j in ((2, 2), (3, 3), (2, 3))]
        reduced = reduced_system_residuals(m, f, p)
        for r, t in zip(reduced[:3], half):
            assert np.allclose(evaluate_points(r, pts), evaluate_points(t, pts), atol=1e-10)


def test_nonexistence_scan():
    p = SolitonParams(0.5, 1.0, 0.0)
    assert nonexistence_scan(P("u"), P("v"), P("0"), p).min_residual > 1.0
    assert nonexistence_scan(P("1 + u^2"), P("0"), P("v"), p).min_residual > 1e-3


def test_nonexistence_scan_counterexample():
    # with beta1 = 0 and lam = 0 a constant potential solves the equation for any a
    scan = nonexistence_scan(P("u"), P("v"), P("0"), SolitonParams(0.0, 0.0, 0.0))
    assert scan.min_residual < 1e-10
