"""Lipschitz post-processing of dual triples through concave envelopes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .costs import CostSpec, PiecewiseLinear, ShiftedCost
from .dual import DualityReport, DualSolution, DualTriple, _cauchy, construct_dual, verify_duality
from .errors import NotCompact
from .measures import DiscreteMeasure, Interval

LIP_SLACK = 1e-9


class ConcaveEnvelope:
    """Least concave majorant of finitely many points, kept as its hull knots.

    Arithmetic is generic, so ``fractions.Fraction`` inputs give exact results.
    """

    def __init__(self, ys: Sequence, values: Sequence):
        ys, values = list(ys), list(values)
        if not ys:
            raise ValueError("need at least one point")
        if len(ys) != len(values):
            raise ValueError("ys and values differ in length")
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise ValueError("ys must be strictly increasing")
        hull: list[int] = []
        for k in range(len(ys)):
            while len(hull) >= 2:
                i, j = hull[-2], hull[-1]
                # drop j when it lies on or below the chord from i to k
                cross = (ys[j] - ys[i]) * (values[k] - values[i]) - (values[j] - values[i]) * (ys[k] - ys[i])
                if cross >= 0:
                    hull.pop()
                else:
                    break
            hull.append(k)
        self.ys = ys
        self.values = values
        self.hull = hull
        self.knots = [ys[i] for i in hull]
        self.knot_values = [values[i] for i in hull]

    def _segment(self, y) -> int:
        """Index s with knots[s] <= y <= knots[s + 1] (clamped)."""
        lo, hi = 0, len(self.knots) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.knots[mid] <= y:
                lo = mid
            else:
                hi = mid
        return lo

    def __call__(self, y):
        k = self.knots
        if len(k) == 1 or y <= k[0]:
            return self.knot_values[0]
        if y >= k[-1]:
            return self.knot_values[-1]
        s = self._segment(y)
        y0, y1 = k[s], k[s + 1]
        v0, v1 = self.knot_values[s], self.knot_values[s + 1]
        if y == y0:
            return v0
        return v0 + (v1 - v0) * (y - y0) / (y1 - y0)

    def evaluate(self, ys) -> list:
        return [self(y) for y in ys]

    def slopes(self) -> list:
        k, v = self.knots, self.knot_values
        return [(v[i + 1] - v[i]) / (k[i + 1] - k[i]) for i in range(len(k) - 1)]

    def supergradient(self, y):
        """Midpoint of the supergradient interval at y; one-sided slope at the ends of the hull."""
        sl = self.slopes()
        if not sl:
            return 0 * self.knot_values[0]
        k = self.knots
        if y <= k[0]:
            return sl[0]
        if y >= k[-1]:
            return sl[-1]
        s = self._segment(y)
        if y == k[s] and s > 0:
            return (sl[s - 1] + sl[s]) / 2
        return sl[s]


def concave_envelope(ys, values) -> ConcaveEnvelope:
    return ConcaveEnvelope(ys, values)


@dataclass
class LipschitzCertificate:
    L1: float
    L2: float
    lip_f: float
    lip_g: float
    sup_h: float

    @property
    def bound_f(self) -> float:
        return self.L1 + 3 * (self.L1 + self.L2)

    @property
    def bound_g(self) -> float:
        return 2 * (self.L1 + self.L2) + self.L2

    @property
    def bound_h(self) -> float:
        return 3 * (self.L1 + self.L2)

    @property
    def checks(self) -> dict:
        return {
            "f": self.lip_f <= self.bound_f + LIP_SLACK,
            "g": self.lip_g <= self.bound_g + LIP_SLACK,
            "h": self.sup_h <= self.bound_h + LIP_SLACK,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def bound_labels(self) -> dict:
        """Symbolic bounds; collapses to multiples of L when L1 == L2."""
        if self.L1 == self.L2:
            return {"f": "7L", "g": "5L", "h": "6L"}
        return {"f": "L1+3(L1+L2)", "g": "2(L1+L2)+L2", "h": "3(L1+L2)"}

    def summary(self) -> str:
        lab = self.bound_labels()
        rows = [
            ("Lip(f)", self.lip_f, lab["f"], self.bound_f, self.checks["f"]),
            ("Lip(g)", self.lip_g, lab["g"], self.bound_g, self.checks["g"]),
            ("sup|h|", self.sup_h, lab["h"], self.bound_h, self.checks["h"]),
        ]
        head = f"L1={self.L1:.6g} L2={self.L2:.6g}"
        if self.L1 == self.L2:
            head += f" (L={self.L1:.6g})"
        lines = [head] + [f"{n} = {m:.6g} <= {s} = {b:.6g}: {'ok' if ok else 'FAIL'}" for n, m, s, b, ok in rows]
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "L1": self.L1, "L2": self.L2,
            "measured": {"lip_f": self.lip_f, "lip_g": self.lip_g, "sup_h": self.sup_h},
            "bounds": {"lip_f": self.bound_f, "lip_g": self.bound_g, "sup_h": self.bound_h},
            "labels": self.bound_labels(),
            "pass": self.passed,
        }


def max_slope(points, values) -> float:
    """Largest |difference quotient| over all pairs; adjacent pairs suffice in one dimension."""
    p = np.asarray(points, dtype=float)
    v = np.asarray(values, dtype=float)
    if p.size < 2:
        return 0.0
    order = np.argsort(p)
    p, v = p[order], v[order]
    return float(np.max(np.abs(np.diff(v) / np.diff(p))))


def cost_modulus(cost: CostSpec, points) -> float:
    """Grid Lipschitz modulus of c on points x points, in each variable separately."""
    p = np.unique(np.asarray(points, dtype=float))
    if p.size < 2:
        return 0.0
    C = cost.matrix(p, p)
    dp = np.diff(p)
    in_y = np.abs(np.diff(C, axis=1)) / dp[None, :]
    in_x = np.abs(np.diff(C, axis=0)) / dp[:, None]
    return float(max(in_y.max(), in_x.max()))


@dataclass
class SmoothResult:
    triple: DualTriple
    certificate: LipschitzCertificate
    H: np.ndarray = field(repr=False)


def lipschitz_postprocess(triple: DualTriple, cost: CostSpec, u: PiecewiseLinear | None, J: Interval,
                          clamp: bool = True) -> SmoothResult:
    """Regenerate (f, h) from g by concave envelopes and shift g back by u.

    ``triple`` must be dual-feasible for c + u with g known on its grid.
    For each atom x, H(x, .) is the concave envelope of g - (c + u)(x, .) on
    the grid inside J; f(x) = H(x, x), h(x) = midpoint supergradient at x,
    and the output g is g - u, a triple for c itself.
    """
    if not J.bounded:
        raise NotCompact(f"post-processing needs a compact interval, got {J}")
    shifted = cost if u is None else ShiftedCost(cost, u)
    keep = (triple.grid >= J.lo) & (triple.grid <= J.hi)
    grid = triple.grid[keep]
    g = triple.g[keep]
    if clamp:
        g = np.minimum(g, 0.0)
    atoms = triple.atoms
    W = g[None, :] - shifted.matrix(atoms, grid)
    f = np.empty(atoms.size)
    h = np.empty(atoms.size)
    H = np.empty_like(W)
    for i, x in enumerate(atoms):
        env = ConcaveEnvelope(grid.tolist(), W[i].tolist())
        H[i] = env.evaluate(grid.tolist())
        f[i] = env(float(x))
        h[i] = env.supergradient(float(x))
    g_out = g - (u(grid) if u is not None else 0.0)
    out = DualTriple(atoms, f, h, grid, g_out, tags=triple.tags, normalization=dict(triple.normalization))

    L1 = cost_modulus(cost, grid)
    L2 = max_slope(grid, u(grid)) if u is not None else 0.0
    inside = (atoms >= J.lo) & (atoms <= J.hi)
    cert = LipschitzCertificate(
        L1=L1, L2=L2,
        lip_f=max_slope(atoms[inside], f[inside]),
        lip_g=max_slope(grid, g_out),
        sup_h=float(np.max(np.abs(h[inside]), initial=0.0)),
    )
    return SmoothResult(out, cert, H)


@dataclass
class SmoothedSolution:
    base: DualSolution
    result: SmoothResult
    report: DualityReport
    u: PiecewiseLinear | None
    lam: float | None = None


def smooth(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec, u: PiecewiseLinear | None,
           tol: Tolerances = DEFAULT, exact: bool = False, grid_refine: int = 0,
           lam: float | None = None) -> SmoothedSolution:
    """Solve for c + u, post-process on J = conv(supp nu), verify the result for c."""
    shifted = cost if u is None else ShiftedCost(cost, u)
    base = construct_dual(mu, nu, shifted, tol, exact=exact, grid_refine=grid_refine)
    J = Interval.closed(float(nu.positions[0]), float(nu.positions[-1]))
    res = lipschitz_postprocess(base.triple, cost, u, J, clamp=base.method == "glued")
    # the grid restricted to J still contains supp(nu)
    report = verify_duality(res.triple, mu, nu, cost, base.coupling, tol)
    return SmoothedSolution(base, res, report, u, lam)


@dataclass(frozen=True)
class ProbeResult:
    values: list
    divergent: bool
    increments: list


def divergence_flag(values: Sequence[float], conv_tol: float = DEFAULT.conv_tol) -> bool:
    """Non-increasing sequence that is not Cauchy over its last three entries."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return False
    nonincreasing = bool(np.all(np.diff(v) <= conv_tol * np.maximum(1.0, np.abs(v[1:]))))
    return nonincreasing and not _cauchy(list(v), conv_tol)


def integrability_probe(levels: Sequence[tuple[DiscreteMeasure, np.ndarray]],
                        conv_tol: float = DEFAULT.conv_tol) -> ProbeResult:
    """nu_n(g_n) along refining discretizations given as (nu_n, g_n on supp nu_n)."""
    values = [nu_n.integrate(np.asarray(g_n, dtype=float)) for nu_n, g_n in levels]
    inc = list(np.diff(values)) if len(values) > 1 else []
    return ProbeResult(values, divergence_flag(values, conv_tol), [float(d) for d in inc])
