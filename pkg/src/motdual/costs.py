"""Cost functions c(x, y) paired with discrete marginals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function of one variable, constant beyond its knots."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size == 0:
            raise ValueError("knots and values must be matching non-empty 1-D arrays")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def __call__(self, y):
        return np.interp(np.asarray(y, dtype=float), self.knots, self.values)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def lipschitz(self) -> float:
        return float(np.max(np.abs(self.slopes()), initial=0.0))

    def to_json(self) -> list:
        return [[float(k), float(v)] for k, v in zip(self.knots, self.values)]


class CostSpec:
    """Base class; subclasses evaluate c on arrays of x and y positions."""

    kind = "abstract"

    def matrix(self, xs, ys) -> np.ndarray:
        """Matrix C[i, j] = c(xs[i], ys[j])."""
        raise NotImplementedError

    def value(self, x: float, y: float) -> float:
        return float(self.matrix([x], [y])[0, 0])

    @property
    def parametric(self) -> bool:
        """True when c can be evaluated at arbitrary (x, y)."""
        return True

    def defined_on(self, xs, ys) -> bool:
        return True

    def diagonal_slope(self, x: float, grid) -> float:
        """Midpoint of the subdifferential of y -> c(x, y) at y = x."""
        grid = np.asarray(grid, dtype=float)
        scale = max(1.0, float(np.max(np.abs(grid)))) if grid.size else 1.0
        step = 1e-6 * scale
        right = self.value(x, x + step)
        left = self.value(x, x - step)
        return (right - left) / (2 * step)

    def to_json(self) -> dict:
        raise TypeError(f"{type(self).__name__} cannot be serialized")


class PowerCost(CostSpec):
    """c(x, y) = sign * |x - y| ** exponent."""

    kind = "power"

    def __init__(self, sign: int = 1, exponent: float = 1.0):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not (math.isfinite(exponent) and exponent > 0):
            raise ValueError("exponent must be finite and positive")
        self.sign = int(sign)
        self.exponent = float(exponent)

    def matrix(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return self.sign * np.abs(xs[:, None] - ys[None, :]) ** self.exponent

    def __repr__(self):
        return f"PowerCost(sign={self.sign}, exponent={self.exponent:g})"

    def to_json(self):
        return {"power": {"sign": self.sign, "exponent": self.exponent}}


class GridCost(CostSpec):
    """Explicit values over supp(mu) x supp(nu), looked up by position."""

    kind = "grid"

    def __init__(self, x_positions, y_positions, values):
        xp = np.asarray(x_positions, dtype=float)
        yp = np.asarray(y_positions, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.shape != (xp.size, yp.size):
            raise ValueError(f"grid values have shape {vals.shape}, expected {(xp.size, yp.size)}")
        if np.unique(xp).size != xp.size or np.unique(yp).size != yp.size:
            raise ValueError("grid positions must be distinct")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        rx, ry = np.argsort(xp), np.argsort(yp)
        self.x_positions = xp[rx]
        self.y_positions = yp[ry]
        self.values = vals[np.ix_(rx, ry)]

    def _index(self, grid, pts, axis):
        pts = np.asarray(pts, dtype=float)
        idx = np.searchsorted(grid, pts)
        idx = np.clip(idx, 0, grid.size - 1)
        if not np.array_equal(grid[idx], pts):
            missing = pts[grid[idx] != pts]
            raise KeyError(f"grid cost is not defined at {axis}={missing[:5].tolist()}")
        return idx

    def defined_on(self, xs, ys) -> bool:
        try:
            self._index(self.x_positions, xs, "x")
            self._index(self.y_positions, ys, "y")
        except KeyError:
            return False
        return True

    def matrix(self, xs, ys):
        ix = self._index(self.x_positions, xs, "x")
        iy = self._index(self.y_positions, ys, "y")
        return self.values[np.ix_(ix, iy)]

    @property
    def parametric(self) -> bool:
        return False

    def diagonal_slope(self, x, grid=None):
        return _adjacent_slope(self, self.y_positions, x)

    def __repr__(self):
        return f"GridCost({self.values.shape[0]}x{self.values.shape[1]})"

    def to_json(self):
        return {"grid": {"x": self.x_positions.tolist(), "y": self.y_positions.tolist(),
                         "values": self.values.tolist()}}


class ShiftedCost(CostSpec):
    """c(x, y) + u(y) for a piecewise-linear u."""

    kind = "shifted"

    def __init__(self, base: CostSpec, u: PiecewiseLinear):
        self.base = base
        self.u = u

    def matrix(self, xs, ys):
        return self.base.matrix(xs, ys) + self.u(np.asarray(ys, dtype=float))[None, :]

    @property
    def parametric(self) -> bool:
        return self.base.parametric

    def defined_on(self, xs, ys) -> bool:
        return self.base.defined_on(xs, ys)

    def diagonal_slope(self, x, grid=None):
        if self.base.parametric:
            return CostSpec.diagonal_slope(self, x, grid)
        return _adjacent_slope(self, self.base.y_positions, x)

    def __repr__(self):
        return f"ShiftedCost({self.base!r}, u with {self.u.knots.size} knots)"

    def to_json(self):
        return {"shifted": {"base": self.base.to_json(), "u_knots": self.u.to_json()}}


class FunctionCost(CostSpec):
    """Cost given by a vectorized callable f(X, Y) on broadcast arrays."""

    kind = "function"

    def __init__(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray], name: str = "function"):
        self.func = func
        self.name = name

    def matrix(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        X, Y = np.broadcast_arrays(xs[:, None], ys[None, :])
        return np.asarray(self.func(X, Y), dtype=float)

    def __repr__(self):
        return f"FunctionCost({self.name})"


def _adjacent_slope(cost: CostSpec, ys: np.ndarray, x: float) -> float:
    """Mean of the left and right grid slopes of y -> c(x, y) at the grid point x."""
    j = int(np.searchsorted(ys, x))
    if j >= ys.size or ys[j] != x:
        raise KeyError(f"diagonal atom {x} is not a y-position of the grid cost")
    row = cost.matrix([x], ys)[0]
    slopes = []
    if j > 0:
        slopes.append((row[j] - row[j - 1]) / (ys[j] - ys[j - 1]))
    if j + 1 < ys.size:
        slopes.append((row[j + 1] - row[j]) / (ys[j + 1] - ys[j]))
    return float(np.mean(slopes)) if slopes else 0.0


def second_difference_lambda(cost: CostSpec, xs, grid) -> float:
    """Smallest lam >= 0 with y -> c(x, y) + lam * y**2 discretely convex on ``grid`` for every x."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3:
        return 0.0
    C = cost.matrix(xs, grid)
    slopes = np.diff(C, axis=1) / np.diff(grid)[None, :]
    # twice the second divided difference; equals 2*lam exactly for lam*y**2
    second = 2.0 * np.diff(slopes, axis=1) / (grid[2:] - grid[:-2])[None, :]
    worst = float(np.max(-second, initial=0.0))
    return max(worst, 0.0) / 2.0


def auto_u(cost: CostSpec, xs, grid) -> tuple[PiecewiseLinear, float]:
    """Convexifying shift u(y) = lam * y**2 sampled at the grid knots."""
    grid = np.unique(np.asarray(grid, dtype=float))
    lam = second_difference_lambda(cost, xs, grid)
    return PiecewiseLinear(grid, lam * grid**2), lam
