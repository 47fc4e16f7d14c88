import numpy as np
import pytest

from walker_soliton.curvature import (
    PreconditionError,
    christoffel_closed,
    christoffel_general,
    contract,
    ricci_closed,
    ricci_general,
    ricci_restricted,
    scalar_curvature,
    scalar_from_ricci_trace,
)
from walker_soliton.expr import evaluate, parse_expr, to_string
from walker_soliton.grid import GridSpec
from walker_soliton.verify import (
    compare_tensors,
    fd_derivative_points,
    random_strict_metric,
    random_uv_function,
    random_walker_metric,
)
from walker_soliton.walker import SymTensor2, WalkerMetric, flat_metric, inverse_metric, restricted_metric

X2 = WalkerMetric.from_strings("x^2", "0", "0")
QUADRATIC_F2 = WalkerMetric.from_strings("K1", "K2*y^2", "K1", {"K1": 1.0, "K2": 0.5})


def s(e):
    return to_string(e)


def test_flat_connection_and_curvature_vanish():
    for gamma in (christoffel_general(flat_metric()), christoffel_closed(flat_metric())):
        assert all(s(e) == "0" for _, e in gamma.independent())
    assert all(s(e) == "0" for e in ricci_general(flat_metric()).comps)
    assert all(s(e) == "0" for e in ricci_closed(flat_metric()).comps)


def test_christoffel_examples_quadratic_f1():
    for gamma in (christoffel_general(X2), christoffel_closed(X2)):
        assert s(gamma[0, 0, 2]) == "x"
        assert s(gamma[0, 2, 0]) == "x"
        assert s(gamma[2, 2, 2]) == "-x"
        assert s(gamma[0, 2, 2]) == "x^3"


def test_christoffel_examples_other_potentials():
    for gamma in (christoffel_general(QUADRATIC_F2), christoffel_closed(QUADRATIC_F2)):
        assert s(gamma[0, 1, 3]) == "K2*y"
        assert s(gamma[1, 1, 2]) == "K2*y"
    m = WalkerMetric.from_strings("0", "0", "y*u")
    p = (0.1, 0.2, 0.6, -0.3)
    assert evaluate(christoffel_closed(m)[3, 3, 3], p) == pytest.approx(-0.3)
    assert evaluate(christoffel_general(m)[3, 3, 3], p) == pytest.approx(-0.3)


def test_upper_u_v_symbols_have_no_u_v_derivatives():
    # potentials in (u, v) only: every symbol with upper index u or v must vanish
    m = WalkerMetric.from_strings("u^3", "v*u^2", "exp(u*v)")
    gamma = christoffel_general(m)
    for k in (2, 3):
        for i in range(4):
            for j in range(4):
                assert s(gamma[k, i, j]) == "0"


def test_ricci_examples():
    ric = ricci_general(X2)
    assert s(ric[0, 2]) == "1"
    assert s(ric[2, 2]) == "x^2"
    assert s(scalar_curvature(X2)) == s(scalar_curvature(X2, "closed")) == "2"
    m = WalkerMetric.from_strings("0", "K2*x*y", "0", {"K2": 0.5})
    for ric in (ricci_general(m), ricci_closed(m)):
        assert evaluate(ric[0, 2], (0, 0, 0, 0), m.params) == pytest.approx(0.25)
        assert evaluate(ric[1, 3], (0, 0, 0, 0), m.params) == pytest.approx(0.25)


def test_quadratic_f2_has_zero_scalar_curvature():
    grid = GridSpec.uniform(n=3)
    for variant in ("contracted", "closed"):
        assert compare_tensors(scalar_curvature(QUADRATIC_F2, variant), parse_expr("0"), grid,
                               1e-12, params=QUADRATIC_F2.params).passed


def test_r23_closed_form_matches_general():
    m = WalkerMetric.from_strings("x^2*y^3 + sin(x*y)", "x^3*y^2 + y^4", "x*y^3")
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 1, size=(50, 4))
    assert compare_tensors(ricci_closed(m)[1, 2], ricci_general(m)[1, 2], tol=1e-9, points=pts).passed


def test_ricci_by_finite_difference_christoffels():
    # independent oracle: R_13 for f1 = x^2 from finite differences of the general symbols
    gamma = christoffel_general(X2)
    pts = np.random.default_rng(9).uniform(-1, 1, size=(10, 4))
    dk = sum(fd_derivative_points(gamma[k, 0, 2], "xyuv"[k], pts) for k in range(4))
    dj = sum(fd_derivative_points(gamma[k, 0, k], "u", pts) for k in range(4))
    G = gamma.evaluate(pts)
    trace = np.einsum("nlkl->nk", G)
    prod = np.einsum("nk,nk->n", G[:, :, 0, 2], trace) - np.einsum("nlk,nkl->n", G[:, :, 0, :], G[:, :, 2, :])
    assert np.allclose(dk - dj + prod, 1.0, atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_closed_and_general_paths_agree(seed):
    rng = np.random.default_rng(seed)
    m = random_walker_metric(rng)
    pts = rng.uniform(-1, 1, size=(40, 4))
    gc, gg = christoffel_closed(m), christoffel_general(m)
    assert compare_tensors(gc, gg, tol=1e-9, points=pts).passed
    assert compare_tensors(ricci_closed(m), ricci_general(m), tol=1e-9, points=pts).passed
    R = scalar_curvature(m)
    assert compare_tensors(R, scalar_curvature(m, "closed"), tol=1e-9, points=pts).passed
    assert compare_tensors(R, scalar_from_ricci_trace(ricci_general(m)), tol=1e-9, points=pts).passed
    assert compare_tensors(contract(inverse_metric(m), ricci_general(m)), R, tol=1e-9, points=pts).passed


@pytest.mark.parametrize("seed", range(5))
def test_strict_metrics_are_ricci_flat(seed):
    rng = np.random.default_rng(100 + seed)
    m = random_strict_metric(rng)
    pts = rng.uniform(-1, 1, size=(40, 4))
    assert compare_tensors(ricci_general(m), SymTensor2.zero(), tol=1e-12, points=pts).passed


def test_restricted_ricci_examples():
    assert all(s(e) == "0" for e in ricci_restricted("0", "0", "u*v").comps)
    assert s(ricci_restricted("u", "0", "0")[3, 3]) == "0.5*u^2 - 1"
    assert s(ricci_restricted("0", "v", "0")[2, 2]) == "0.5*v^2 - 1"
    for a, b, entry, expected in (("u", "0", (3, 3), "0.5*u^2 - 1"), ("0", "v", (2, 2), "0.5*v^2 - 1")):
        m = restricted_metric(a, b, "0")
        p = (0.4, -0.3, 0.8, 0.5)
        assert evaluate(ricci_general(m)[entry], p) == pytest.approx(evaluate(parse_expr(expected), p))


@pytest.mark.parametrize("seed", range(5))
def test_restricted_ricci_matches_general(seed):
    rng = np.random.default_rng(200 + seed)
    a, b, c = (random_uv_function(rng) for _ in range(3))
    pts = rng.uniform(-1, 1, size=(40, 4))
    assert compare_tensors(ricci_restricted(a, b, c), ricci_general(restricted_metric(a, b, c)),
                           tol=1e-9, points=pts).passed


def test_restricted_ricci_rejects_x_dependence():
    with pytest.raises(PreconditionError, match="a = x"):
        ricci_restricted("x", "0", "0")
