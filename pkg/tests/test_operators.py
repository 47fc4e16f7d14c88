import numpy as np
import pytest

from walker_soliton.expr import evaluate, parse_expr, to_string
from walker_soliton.grid import GridSpec
from walker_soliton.operators import (
    VectorField,
    divergence,
    gradient,
    hessian,
    hessian_restricted,
    laplacian,
    lie_derivative_metric,
)
from walker_soliton.soliton import trace_of
from walker_soliton.verify import (
    compare_tensors,
    fd_derivative_points,
    random_potential,
    random_strict_metric,
    random_uv_function,
    random_walker_metric,
)
from walker_soliton.walker import PAIRS, WalkerMetric, flat_metric, metric_components, restricted_metric

X2 = WalkerMetric.from_strings("x^2", "0", "0")
P = parse_expr


def s(e):
    return to_string(e)


def test_laplacian_examples():
    assert s(laplacian(flat_metric(), P("x*u"))) == "2"
    assert s(laplacian(X2, P("x^2"))) == "-6*x^2"
    assert s(laplacian(X2, P("x^2"), "closed")) == "-6*x^2"


@pytest.mark.parametrize("seed", range(5))
def test_uv_is_harmonic_on_strict_metrics(seed):
    m = random_strict_metric(np.random.default_rng(seed))
    pts = np.random.default_rng(seed).uniform(-1, 1, size=(40, 4))
    assert compare_tensors(laplacian(m, P("u*v")), P("0"), tol=1e-12, points=pts).passed


def test_gradient_examples():
    assert str(gradient(flat_metric(), P("x"))) == "(0, 0, 1, 0)"
    assert str(gradient(X2, P("x"))) == "(-x^2, 0, 1, 0)"
    rng = np.random.default_rng(1)
    assert str(gradient(random_walker_metric(rng), P("u*v"))) == "(v, u, 0, 0)"


def test_gradient_matches_numeric_raising():
    rng = np.random.default_rng(4)
    m, f = random_walker_metric(rng), random_potential(rng)
    pts = rng.uniform(-1, 1, size=(20, 4))
    df = np.stack([fd_derivative_points(f, c, pts) for c in "xyuv"], axis=1)
    g = metric_components(m).evaluate(pts)
    expected = np.linalg.solve(g, df[..., None])[..., 0]
    assert np.allclose(gradient(m, f).evaluate(pts), expected, atol=1e-7)


def test_divergence_examples():
    assert s(divergence(flat_metric(), VectorField.of("x", 0, 0, 0))) == "1"
    assert s(divergence(flat_metric(), VectorField.of("v", "u", 0, 0))) == "0"
    assert s(divergence(flat_metric(), VectorField.of("-y", "x", 0, 0))) == "0"


def test_density_divergence_agrees(rng):
    m = random_walker_metric(rng)
    X = VectorField.of(*(random_potential(rng) for _ in range(4)))
    pts = rng.uniform(-1, 1, size=(30, 4))
    assert compare_tensors(divergence(m, X), divergence(m, X, density=True), tol=1e-9, points=pts).passed


@pytest.mark.parametrize("seed", range(5))
def test_laplacian_identities(seed):
    rng = np.random.default_rng(300 + seed)
    m, f = random_walker_metric(rng), random_potential(rng)
    pts = rng.uniform(-1, 1, size=(40, 4))
    lap = laplacian(m, f)
    assert compare_tensors(lap, laplacian(m, f, "closed"), tol=1e-9, points=pts).passed
    assert compare_tensors(lap, divergence(m, gradient(m, f)), tol=1e-9, points=pts).passed
    assert compare_tensors(lap, trace_of(m, hessian(m, f)), tol=1e-9, points=pts).passed


def test_strict_closed_laplacian_has_no_first_order_terms():
    m = WalkerMetric.from_strings("u^2", "v", "u*v")
    f = P("x^2*y + x*u + y^3*v")
    reduced = P("-u^2*2*y - 2*v*2*x - u*v*6*y*v + 2*1 + 2*3*y^2")
    pts = np.random.default_rng(2).uniform(-1, 1, size=(20, 4))
    assert compare_tensors(laplacian(m, f, "closed"), reduced, tol=1e-12, points=pts).passed


def test_hessian_examples():
    h = hessian(flat_metric(), P("x^2"))
    assert s(h[0, 0]) == "2"
    assert all(s(h[i, j]) == "0" for i, j in PAIRS if (i, j) != (0, 0))
    m = WalkerMetric.from_strings("x^3*u", "y*x", "v")
    p = (0.5, 0.2, -0.4, 0.1)
    df1 = 3 * 0.5 ** 2 * -0.4
    assert evaluate(hessian(m, P("x^2"))[0, 2], p) == pytest.approx(-0.5 * df1 * 2 * 0.5)


def test_restricted_hessian_entry():
    a, b, c = P("u"), P("v^2"), P("u*v")
    f = P("x*y*u + y^2*v")
    p = (0.3, -0.6, 0.9, 0.4)
    # f_yu - b f_x / 2
    expected = 0.3 - 0.5 * 0.4 ** 2 * (-0.6 * 0.9)
    assert evaluate(hessian_restricted(a, b, c, f)[1, 2], p) == pytest.approx(expected)
    assert evaluate(hessian(restricted_metric(a, b, c), f)[1, 2], p) == pytest.approx(expected)


def _mismatched(A, B, pts):
    a, b = A.evaluate(pts), B.evaluate(pts)
    return {(i + 1, j + 1) for i, j in PAIRS if np.max(np.abs(a[:, i, j] - b[:, i, j])) > 1e-9}


@pytest.mark.parametrize("seed", range(3))
def test_literal_hessian_slips_are_located(seed):
    rng = np.random.default_rng(400 + seed)
    m, f = random_walker_metric(rng), random_potential(rng)
    pts = rng.uniform(-1, 1, size=(30, 4))
    assert _mismatched(hessian(m, f), hessian(m, f, literal=True), pts) == {(1, 4), (3, 3), (3, 4), (4, 4)}


@pytest.mark.parametrize("seed", range(3))
def test_restricted_hessian_lists(seed):
    rng = np.random.default_rng(500 + seed)
    a, b, c = (random_uv_function(rng) for _ in range(3))
    f = random_potential(rng)
    pts = rng.uniform(-1, 1, size=(30, 4))
    general = hessian(restricted_metric(a, b, c), f)
    assert not _mismatched(general, hessian_restricted(a, b, c, f), pts)
    assert _mismatched(general, hessian_restricted(a, b, c, f, literal=True), pts) == {(1, 4), (3, 3), (3, 4), (4, 4)}


def test_lie_derivative_examples():
    m = WalkerMetric.from_strings("u^2*x", "sin(u)", "u*v")
    assert all(s(e) == "0" for e in lie_derivative_metric(m, VectorField.zero()).comps)
    L = lie_derivative_metric(m, VectorField.of(0, 0, 1, 0))
    assert (s(L[2, 2]), s(L[2, 3]), s(L[3, 3])) == ("2*x*u", "cos(u)", "v")
    assert all(s(L[i, j]) == "0" for i, j in PAIRS if i < 2 or j < 2)
    euler = lie_derivative_metric(flat_metric(), VectorField.of("x", "y", "u", "v"))
    assert euler.to_dict() == metric_components(flat_metric()).scale(2.0).to_dict()


def test_lie_derivative_matches_flow_pullback():
    # (L_X g)(p) = d/dt [ (D phi_t)^T g(phi_t p) (D phi_t) ] at t = 0, for a linear field X = A p
    m = WalkerMetric.from_strings("x*u + v^2", "y*u", "sin(v)")
    A = np.array([[0.1, 0.2, 0, 0], [0, 0.3, 0.1, 0], [0.2, 0, 0, 0.4], [0, 0.1, 0.2, 0]])
    X = VectorField.of(*(" + ".join(f"{A[i, j]}*{c}" for j, c in enumerate("xyuv")) for i in range(4)))
    p = np.array([0.3, -0.2, 0.5, 0.7])
    g = metric_components(m)
    t = 1e-5

    def pulled(t):
        D = np.eye(4) + t * A + 0.5 * t * t * A @ A
        return D.T @ g.evaluate((D @ p)[None, :])[0] @ D

    fd = (pulled(t) - pulled(-t)) / (2 * t)
    assert np.allclose(lie_derivative_metric(m, X).evaluate(p[None, :])[0], fd, atol=1e-8)


def test_lie_derivative_is_additive(rng):
    m = random_walker_metric(rng)
    X = VectorField.of(*(random_potential(rng) for _ in range(4)))
    Z = VectorField.of(*(random_potential(rng) for _ in range(4)))
    pts = rng.uniform(-1, 1, size=(30, 4))
    both = lie_derivative_metric(m, X + Z)
    parts = lie_derivative_metric(m, X) + lie_derivative_metric(m, Z)
    assert compare_tensors(both, parts, tol=1e-12, points=pts).passed
