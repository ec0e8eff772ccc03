"""Finitely supported measures on the line, potential functions, convex order."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import NotInConvexOrder


class DiscreteMeasure:
    """Atoms sorted by position with strictly positive weights.

    ``total`` is the mass the weights must add up to (within ``mass_tol``);
    pass ``total=None`` for sub-probability pieces such as irreducible
    components, in which case an empty measure is also allowed.
    Duplicate positions are merged by adding their weights.
    """

    __slots__ = ("positions", "weights")

    def __init__(self, positions, weights, total: float | None = 1.0, mass_tol: float = DEFAULT.mass_tol):
        pos = np.asarray(positions, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if pos.shape != w.shape:
            raise ValueError("positions and weights must have the same length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(w))):
            raise ValueError("positions and weights must be finite")
        if np.any(w <= 0):
            raise ValueError("every weight must be strictly positive")
        order = np.argsort(pos, kind="stable")
        pos, w = pos[order], w[order]
        if pos.size > 1 and np.any(np.diff(pos) == 0):
            uniq, inverse = np.unique(pos, return_inverse=True)
            merged = np.zeros(uniq.size)
            np.add.at(merged, inverse, w)
            pos, w = uniq, merged
        if total is not None:
            if pos.size == 0:
                raise ValueError("a probability measure needs at least one atom")
            mass = math.fsum(w)
            if abs(mass - total) > mass_tol:
                raise ValueError(f"total weight {mass!r} differs from {total!r} by more than {mass_tol:g}")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]], **kwargs) -> "DiscreteMeasure":
        atoms = list(atoms)
        if not atoms:
            return cls([], [], **kwargs)
        pos, w = zip(*atoms)
        return cls(pos, w, **kwargs)

    @classmethod
    def dirac(cls, x: float) -> "DiscreteMeasure":
        return cls([x], [1.0])

    @classmethod
    def partial(cls, positions, weights, drop_below: float = 0.0) -> "DiscreteMeasure":
        """Sub-measure built from possibly vanishing weights; atoms with weight <= drop_below are dropped."""
        pos = np.asarray(positions, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        keep = w > drop_below
        return cls(pos[keep], w[keep], total=None)

    # basic statistics -------------------------------------------------

    def __len__(self) -> int:
        return int(self.positions.size)

    def __repr__(self) -> str:
        body = ", ".join(f"{x:g}:{w:g}" for x, w in self.atoms)
        return f"DiscreteMeasure({body})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(self.weights, other.weights)

    __hash__ = None

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def first_moment(self) -> float:
        return math.fsum(self.weights * self.positions)

    @property
    def mean(self) -> float:
        return self.first_moment / self.mass

    @property
    def second_moment(self) -> float:
        return math.fsum(self.weights * self.positions**2) / self.mass

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum(self.weights * (self.positions - m) ** 2) / self.mass

    @property
    def support_hull(self) -> "Interval":
        return Interval(float(self.positions[0]), float(self.positions[-1]), True, True)

    def normalized(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.positions, self.weights / self.mass)

    def weight_at(self, x: float, atol: float = 0.0) -> float:
        idx = np.flatnonzero(np.abs(self.positions - x) <= atol)
        return float(self.weights[idx].sum()) if idx.size else 0.0

    def restrict(self, interval: "Interval") -> "DiscreteMeasure":
        keep = interval.contains(self.positions)
        return DiscreteMeasure(self.positions[keep], self.weights[keep], total=None)

    def integrate(self, values) -> float:
        """Integral of a function given by its values at the atoms."""
        return math.fsum(self.weights * np.asarray(values, dtype=float))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        if math.isfinite(self.lo) and math.isfinite(self.hi) and not self.lo < self.hi:
            raise ValueError(f"interval needs lo < hi, got {self.lo}, {self.hi}")
        if self.lo_closed and not math.isfinite(self.lo):
            raise ValueError("an infinite end cannot be closed")
        if self.hi_closed and not math.isfinite(self.hi):
            raise ValueError("an infinite end cannot be closed")

    @classmethod
    def open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, False, False)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, True, True)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        left = x >= self.lo if self.lo_closed else x > self.lo
        right = x <= self.hi if self.hi_closed else x < self.hi
        out = left & right
        return bool(out) if out.ndim == 0 else out

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else ']'}{self.lo:g},{self.hi:g}{']' if self.hi_closed else '['}"

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}


def potential(m: DiscreteMeasure, x):
    """u_m(x) = sum_i w_i |x - x_i|, evaluated with compensated summation."""
    xs = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xs).ravel()
    out = np.array([math.fsum(m.weights * np.abs(t - m.positions)) for t in flat])
    if xs.ndim == 0:
        return float(out[0])
    return out.reshape(xs.shape)


def union_grid(*measures: DiscreteMeasure) -> np.ndarray:
    return np.unique(np.concatenate([m.positions for m in measures]))


@dataclass(frozen=True)
class OrderReport:
    ordered: bool
    witness: tuple[float, float] | None = None
    mean_gap: float = 0.0

    def __bool__(self) -> bool:
        return self.ordered


def check_convex_order(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: Tolerances = DEFAULT) -> OrderReport:
    """Decide mu <= nu in convex order by comparing potentials at the atoms.

    u_mu - u_nu is piecewise linear with kinks only at atoms and constant
    (equal to +/- the mean difference) beyond them, so checking the union of
    atoms plus one point on each side is exact.  The witness is the point
    y* maximizing u_mu - u_nu, i.e. the hockey stick |. - y*| that separates.
    """
    grid = union_grid(mu, nu)
    pad = 1.0 + float(np.max(np.abs(grid)))
    grid = np.concatenate([[grid[0] - pad], grid, [grid[-1] + pad]])
    excess = potential(mu, grid) - potential(nu, grid)
    mean_gap = mu.mean - nu.mean
    k = int(np.argmax(excess))
    ordered = abs(mean_gap) <= tol.order_tol and excess[k] <= tol.order_tol
    witness = None if ordered else (float(grid[k]), float(excess[k]))
    return OrderReport(ordered, witness, mean_gap)


def potential_gap(mu: DiscreteMeasure, nu: DiscreteMeasure, grid=None) -> tuple[np.ndarray, np.ndarray]:
    """Grid and values of u_nu - u_mu on the union of atoms."""
    grid = union_grid(mu, nu) if grid is None else np.asarray(grid, dtype=float)
    return grid, potential(nu, grid) - potential(mu, grid)


def positive_region(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: Tolerances = DEFAULT) -> list[Interval]:
    """Maximal open intervals on which u_mu < u_nu.

    The gap is piecewise linear, nonnegative, and kinks only at atoms, so it
    can only vanish at a grid point or on a whole grid cell; every component
    therefore ends at a grid point (no interpolation needed).
    """
    grid, gap = potential_gap(mu, nu)
    positive = gap > tol.gap_tol
    intervals = []
    i, n = 0, grid.size
    while i < n:
        if not positive[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and positive[j + 1]:
            j += 1
        # gap vanishes beyond the outermost atoms, so both neighbours exist
        assert i > 0 and j < n - 1, "positive potential gap at an extreme atom"
        intervals.append(Interval.open(float(grid[i - 1]), float(grid[j + 1])))
        i = j + 1
    return intervals


def is_irreducible(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: Tolerances = DEFAULT) -> tuple[bool, Interval | None]:
    """Return (irreducible?, I) with I = {u_mu < u_nu} when it is one interval.

    When the region is empty or splits into several intervals the second
    entry is None; use :func:`positive_region` to list them.
    """
    report = check_convex_order(mu, nu, tol)
    if not report.ordered:
        raise NotInConvexOrder("mu is not dominated by nu in convex order", report.witness)
    region = positive_region(mu, nu, tol)
    if len(region) != 1:
        return False, None
    interval = region[0]
    return bool(np.all(interval.contains(mu.positions))), interval
