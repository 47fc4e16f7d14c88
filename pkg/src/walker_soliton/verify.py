"""Independent numerical oracles and report records.

Nothing here uses the symbolic derivative machinery: derivatives are central
finite differences of plain evaluations, inverses and determinants come from
numpy's dense linear algebra.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import (
    COORDS,
    Expr,
    U,
    V,
    X,
    Y,
    add,
    cos,
    evaluate_points,
    exp,
    log,
    mul,
    power,
    sin,
)
from .grid import GridSpec, max_abs_location
from .walker import SymTensor2, WalkerMetric


def fd_derivative(e: Expr, c: str, p: Sequence[float], step: float = 1e-5,
                  params: Mapping[str, float] | None = None) -> float:
    """Central difference (e(p + h) - e(p - h)) / 2h along coordinate ``c``."""
    return float(fd_derivative_points(e, c, np.asarray(p, dtype=float)[None, :], step, params)[0])


def fd_derivative_points(e: Expr, c: str, points, step: float = 1e-5,
                         params: Mapping[str, float] | None = None) -> np.ndarray:
    if not step > 0:
        raise ValueError("finite-difference step must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k = COORDS.index(c)
    fwd, bwd = pts.copy(), pts.copy()
    fwd[:, k] += step
    bwd[:, k] -= step
    vals = evaluate_points(e, np.vstack([fwd, bwd]), params)
    n = pts.shape[0]
    return (vals[:n] - vals[n:]) / (2.0 * step)


def numeric_inverse_error(m: WalkerMetric, inverse: SymTensor2, points) -> float:
    """max ||g g^-1 - I||_inf, with g from dense evaluation of the metric."""
    from .walker import metric_components

    g = metric_components(m).evaluate(points, m.params)
    gi = inverse.evaluate(points, m.params)
    prod = np.einsum("nij,njk->nik", g, gi)
    return float(np.max(np.abs(prod - np.eye(4))))


def numeric_inverse(m: WalkerMetric, points) -> np.ndarray:
    from .walker import metric_components

    return np.linalg.inv(metric_components(m).evaluate(points, m.params))


def numeric_determinants(m: WalkerMetric, points) -> np.ndarray:
    from .walker import metric_components

    return np.linalg.det(metric_components(m).evaluate(points, m.params))


# ---------------------------------------------------------------------------
# reports


@dataclass
class ReportEntry:
    name: str
    max_residual: float
    location: list[float] | None
    tolerance: float
    passed: bool
    expect: str = "pass"  # "pass" or "flag": a flag entry is a known discrepancy
    notes: list[str] = field(default_factory=list)
    values: dict = field(default_factory=dict)
    crashed: bool = False

    @property
    def ok(self) -> bool:
        """Outcome matches the expectation (flag entries are ok when they fail).

        A check that raised is never ok, whatever its expectation.
        """
        if self.crashed:
            return False
        return self.passed if self.expect == "pass" else not self.passed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        d["max_residual"] = _json_float(self.max_residual)
        return d


def _json_float(x: float):
    if x is None:
        return None
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf"
    return float(f"{x:.6e}")


@dataclass
class Report:
    title: str
    entries: list[ReportEntry] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def add(self, entry: ReportEntry) -> None:
        if any(e.name == entry.name for e in self.entries):
            raise ValueError(f"duplicate report entry {entry.name!r}")
        self.entries.append(entry)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def __getitem__(self, name: str) -> ReportEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        ordered = sorted(self.entries, key=lambda e: e.name)
        return {"title": self.title, "ok": self.ok, "info": self.info,
                "checks": [e.to_dict() for e in ordered]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"== {self.title} =="]
        for k, v in sorted(self.info.items()):
            lines.append(f"  {k}: {v}")
        for e in sorted(self.entries, key=lambda e: e.name):
            status = "ok  " if e.ok else ("ERR " if e.crashed else "FAIL")
            tag = " [expected flag]" if e.expect == "flag" else ""
            lines.append(f"{status} {e.name}: max|r| = {e.max_residual:.3e} (tol {e.tolerance:.0e}){tag}")
            if e.location is not None and not e.passed:
                lines.append(f"       at (x, y, u, v) = {tuple(round(c, 6) for c in e.location)}")
            for n in e.notes:
                lines.append(f"       - {n}")
        lines.append("ALL OK" if self.ok else "SOME CHECKS FAILED")
        return "\n".join(lines)


def compare_tensors(A, B, grid: GridSpec | None = None, tol: float = 1e-9, name: str = "compare",
                    params: Mapping[str, float] | None = None, points=None,
                    expect: str = "pass") -> ReportEntry:
    """Max over the grid and all components of |A - B|."""
    pts = points if points is not None else (grid or GridSpec()).points()
    a, b = _values(A, pts, params), _values(B, pts, params)
    worst, where = max_abs_location(a - b, pts)
    return ReportEntry(name, worst, where, tol, bool(worst < tol), expect)


def _values(T, pts, params) -> np.ndarray:
    from .curvature import Christoffel

    if isinstance(T, (SymTensor2, Christoffel)):
        v = T.evaluate(pts, params)
        return np.moveaxis(v.reshape(v.shape[0], -1), 0, -1)
    if isinstance(T, Expr):
        return evaluate_points(T, pts, params)[None, :]
    return np.stack([evaluate_points(e, pts, params) for e in T])


# ---------------------------------------------------------------------------
# seeded random inputs

_MONOMIALS = [(i, j, k, l) for i in range(4) for j in range(4) for k in range(4) for l in range(4)
              if i + j + k + l <= 3]


def random_polynomial(rng: np.random.Generator, coords: Sequence[str] = COORDS,
                      terms: int = 6, degree: int = 3) -> Expr:
    """Sparse polynomial of total degree <= ``degree`` with coefficients in [-1, 1]."""
    vars_ = {"x": X, "y": Y, "u": U, "v": V}
    allowed = [m for m in _MONOMIALS if sum(m) <= degree
               and all(m[i] == 0 for i, c in enumerate(COORDS) if c not in coords)]
    pick = rng.choice(len(allowed), size=min(terms, len(allowed)), replace=False)
    out = []
    for idx in pick:
        mono = allowed[idx]
        factors = [float(np.round(rng.uniform(-1, 1), 6))]
        for c, p in zip(COORDS, mono):
            if p:
                factors.append(power(vars_[c], float(p)))
        out.append(mul(*factors))
    return add(*out)


def random_uv_factor(rng: np.random.Generator) -> Expr:
    a, b = np.round(rng.uniform(-1.5, 1.5, size=2), 6)
    arg = add(mul(float(a), U), mul(float(b), V))
    return sin(arg) if rng.random() < 0.5 else exp(arg)


def random_potential(rng: np.random.Generator, coords: Sequence[str] = COORDS) -> Expr:
    p = random_polynomial(rng, coords)
    if rng.random() < 0.6:
        p = add(p, mul(random_polynomial(rng, coords, terms=2, degree=1), random_uv_factor(rng)))
    return p


def random_walker_metric(rng: np.random.Generator) -> WalkerMetric:
    return WalkerMetric(*(random_potential(rng) for _ in range(3)))


def random_strict_metric(rng: np.random.Generator) -> WalkerMetric:
    return WalkerMetric(*(random_potential(rng, ("u", "v")) for _ in range(3)))


def random_uv_function(rng: np.random.Generator) -> Expr:
    return random_potential(rng, ("u", "v"))


def random_expr(rng: np.random.Generator, depth: int = 3) -> Expr:
    """Random smooth expression tree, finite and well-defined on [-2, 2]^4."""
    leaves = [X, Y, U, V]
    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.3:
            return mul(float(np.round(rng.uniform(-2, 2), 3)), leaves[rng.integers(4)])
        return leaves[rng.integers(4)]
    kind = rng.integers(8)
    a = random_expr(rng, depth - 1)
    if kind == 0:
        return add(a, random_expr(rng, depth - 1))
    if kind == 1:
        return mul(a, random_expr(rng, depth - 1))
    if kind == 2:
        return sin(a)
    if kind == 3:
        return cos(a)
    if kind == 4:
        return exp(mul(0.3, sin(a)))
    if kind == 5:
        return log(add(2.0, sin(a)))
    if kind == 6:
        return mul(a, power(add(2.0, cos(random_expr(rng, depth - 1))), -1.0))
    # bounded base keeps nested powers from turning into rapid oscillation
    return power(add(2.0, sin(a)), float(rng.choice([0.5, 1.5, 2.0, 3.0])))
