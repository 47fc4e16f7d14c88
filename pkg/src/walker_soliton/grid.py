"""Sample grids over boxes in (x, y, u, v)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import COORDS, Expr, evaluate_many


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product grid: one ``(lo, hi, count)`` triple per coordinate."""

    axes: tuple[tuple[float, float, int], ...] = ((-1.0, 1.0, 5),) * 4

    def __post_init__(self):
        if len(self.axes) != 4:
            raise ValueError("a grid needs exactly four axes")
        for lo, hi, n in self.axes:
            if not lo < hi:
                raise ValueError(f"grid axis needs lo < hi, got [{lo}, {hi}]")
            if int(n) < 2:
                raise ValueError("grid axis needs at least two points")

    @classmethod
    def uniform(cls, lo: float = -1.0, hi: float = 1.0, n: int = 5) -> "GridSpec":
        return cls(((float(lo), float(hi), int(n)),) * 4)

    @property
    def size(self) -> int:
        return int(np.prod([n for _, _, n in self.axes]))

    def points(self) -> np.ndarray:
        lines = [np.linspace(lo, hi, int(n)) for lo, hi, n in self.axes]
        mesh = np.meshgrid(*lines, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_dict(self) -> dict:
        return {c: [lo, hi, n] for c, (lo, hi, n) in zip(COORDS, self.axes)}


def random_points(rng: np.random.Generator, n: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    return rng.uniform(lo, hi, size=(n, 4))


def vanishes(exprs: Sequence[Expr], points: np.ndarray, params=None, tol: float = 1e-12) -> bool:
    """True when every expression is below ``tol`` in magnitude at every point."""
    exprs = [e for e in exprs if not e.is_zero()]
    if not exprs:
        return True
    vals = evaluate_many(exprs, points, params)
    return bool(np.max(np.abs(vals)) < tol)


def max_abs_location(vals: np.ndarray, points: np.ndarray) -> tuple[float, list[float]]:
    """Max of ``|vals|`` over the last axis (and any leading ones) with the point attaining it."""
    a = np.abs(np.asarray(vals, dtype=float))
    a = a.reshape(-1, points.shape[0])
    if a.size == 0:
        return 0.0, [float(c) for c in points[0]]
    if np.any(np.isnan(a)):
        flat = np.argwhere(np.isnan(a))[0]
        return float("nan"), [float(c) for c in points[flat[1]]]
    idx = np.unravel_index(int(np.argmax(a)), a.shape)
    return float(a[idx]), [float(c) for c in points[idx[1]]]
