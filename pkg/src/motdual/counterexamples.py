"""Generators for instances where pointwise dual maximizers fail to exist or to be integrable, plus diagnostics.

Each generator returns a :class:`TruncatedFamily` at a given level; the
diagnostics run the solver on a few levels and measure the statistic that
diverges in the limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT, Tolerances
from .costs import CostSpec, FunctionCost, PowerCost
from .dual import (DualTriple, NormalizationVerdict, envelope_g, global_lp_triple, halfinfinite_normalize,
                   normalize_component, verify_duality)
from .decomposition import decompose
from .errors import BadParameters, RootFindFailed
from .measures import DiscreteMeasure
from .primal import Coupling, solve_primal
from .regularity import ProbeResult, integrability_probe

# points where the nonintegrable example's xi is evaluated must stay inside ]0, 1[
_EDGE = 1e-15


@dataclass
class TruncatedFamily:
    name: str
    level: int
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    cost: CostSpec
    grid: dict
    params: dict = field(default_factory=dict)
    triple: DualTriple | None = None
    coupling: Coupling | None = None

    @property
    def instance(self) -> tuple:
        return self.mu, self.nu, self.cost


def _kernel_coupling(x, y, rows) -> tuple[np.ndarray, np.ndarray]:
    """Marginal and coupling matrix from rows of (weight, [(y, p), ...])."""
    pi = np.zeros((len(x), len(y)))
    col = {v: j for j, v in enumerate(y.tolist())}
    for i, (w, kernel) in enumerate(rows):
        for yy, p in kernel:
            pi[i, col[yy]] += w * p
    return pi.sum(axis=0), pi


# linear growth ---------------------------------------------------------------


def _linear_growth_cost(X, Y):
    # v_n(y) = y**2 for y >= n - 1, (n - 1) y below; row n is read off x = n
    return np.where(Y >= X - 1, Y**2, (X - 1) * Y)


def gen_linear_growth(N: int) -> TruncatedFamily:
    """x_n = n with equal splits to n - 1 and n + 1; cost v_n, so f = h = 0 is dual."""
    if N < 2:
        raise BadParameters("N must be at least 2")
    x = np.arange(1, N + 1, dtype=float)
    y = np.arange(0, N + 2, dtype=float)
    w = 1.0 / N
    nu_w, pi = _kernel_coupling(x, y, [(w, [(n - 1, 0.5), (n + 1, 0.5)]) for n in x])
    mu = DiscreteMeasure(x, np.full(N, w))
    nu = DiscreteMeasure(y, nu_w)
    cost = FunctionCost(_linear_growth_cost, "linear-growth")
    grid = np.concatenate([[-1.0], y])
    zeros = np.zeros(N)
    triple = DualTriple(x, zeros, zeros, grid, envelope_g(zeros, zeros, x, cost, grid))
    coupling = Coupling(pi, float(np.sum(pi * cost.matrix(x, y))), x, y)
    return TruncatedFamily("linear", N, mu, nu, cost, {"x": x, "y": y, "probe": -1.0},
                           {"N": N}, triple, coupling)


def linear_growth_diagnostic(levels: Sequence[int] = (4, 8, 16), tol: Tolerances = DEFAULT) -> dict:
    fams = [gen_linear_growth(N) for N in levels]
    verdict = halfinfinite_normalize([f.triple for f in fams], fams[0].cost, left=0.0, probes=[-1.0], tol=tol)
    return {
        "levels": list(levels),
        "g_at_minus_one": [float(f.triple.g_at([-1.0])[0]) for f in fams],
        "verdict": verdict,
    }


# local convexity and C^r ---------------------------------------------------------


def _partial_sums(N: int, s: float) -> np.ndarray:
    k = np.arange(1, N + 1, dtype=float)
    return np.concatenate([[0.0], np.cumsum(k**-s)])


def _staircase(N: int, s: float):
    """y_n partial sums of k**-s, x_n midpoints, proxy atom x_inf = y_N, uniform mu."""
    y = _partial_sums(N, s)
    x_mid = (y[:-1] + y[1:]) / 2
    x = np.concatenate([x_mid, [y[-1]]])
    w = 1.0 / (N + 1)
    rows = [(w, [(y[n], 0.5), (y[n + 1], 0.5)]) for n in range(N)] + [(w, [(y[-1], 1.0)])]
    nu_w, pi = _kernel_coupling(x, y, rows)
    return x, y, DiscreteMeasure(x, np.full(N + 1, w)), DiscreteMeasure(y, nu_w), pi


def _tent_cost(y_knots: np.ndarray) -> FunctionCost:
    lo_edge, hi_edge = y_knots[0], y_knots[-1]

    def cost(X, Y):
        n = np.clip(np.searchsorted(y_knots, X), 1, y_knots.size - 1)
        lo, hi = y_knots[n - 1], y_knots[n]
        inside = (X > lo_edge) & (X < hi_edge)
        dist = np.maximum(lo - Y, 0.0) + np.maximum(Y - hi, 0.0)
        return np.where(inside, -dist, 0.0)

    return FunctionCost(cost, "local-convexity")


def gen_local_convexity(N: int) -> TruncatedFamily:
    """Cells [y_{n-1}, y_n] with y_n = sum_{k<=n} 1/k**2; cost 0 on the cell, slope -1 away from it."""
    if N < 2:
        raise BadParameters("N must be at least 2")
    x, y, mu, nu, pi = _staircase(N, 2.0)
    cost = _tent_cost(y)
    coupling = Coupling(pi, float(np.sum(pi * cost.matrix(x, y))), x, y)
    return TruncatedFamily("local-convexity", N, mu, nu, cost, {"x": x, "y": y}, {"N": N}, coupling=coupling)


def gen_cr_cost(r: float, s: float, N: int) -> TruncatedFamily:
    """Same staircase with y_n = sum_{k<=n} k**-s and c = -|x - y|**r."""
    if not (1 < r < 2):
        raise BadParameters("r must lie in ]1, 2[")
    if not (s > 1 and s * r < 2):
        raise BadParameters("need s > 1 and s*r < 2")
    if N < 2:
        raise BadParameters("N must be at least 2")
    x, y, mu, nu, pi = _staircase(N, s)
    cost = PowerCost(-1, r)
    coupling = Coupling(pi, float(np.sum(pi * cost.matrix(x, y))), x, y)
    return TruncatedFamily("cr", N, mu, nu, cost, {"x": x, "y": y}, {"r": r, "s": s, "N": N}, coupling=coupling)


def lp_triple(fam: TruncatedFamily, tol: Tolerances = DEFAULT) -> tuple[DualTriple, object]:
    primal = solve_primal(fam.mu, fam.nu, fam.cost, tol)
    return global_lp_triple(primal, fam.mu, fam.cost, fam.nu.positions), primal


def local_convexity_diagnostic(N: int, tol: Tolerances = DEFAULT) -> dict:
    """Slope decrease h(x_n) - h(x_{n+1}) along the cells and the drift statistic S_N.

    S_N = g(y_N) - g(y_0) - h(x_1)(y_N - y_0) is gauge invariant and
    bounded by -sum_{n<=N} (n - 1)/n**2.
    """
    fam = gen_local_convexity(N)
    triple, primal = lp_triple(fam, tol)
    h = triple.h[:N]
    gaps = h[:-1] - h[1:]
    y = fam.grid["y"]
    g = triple.g_at(y)
    stat = float(g[-1] - g[0] - h[0] * (y[-1] - y[0]))
    dec = decompose(fam.mu, fam.nu, tol)
    shapes = []
    for k, comp in enumerate(dec.components, start=1):
        f_k, h_k = triple.f[k - 1:k], h[k - 1:k]
        g_k = envelope_g(f_k, h_k, comp.mu.positions, fam.cost, triple.grid)
        raw = DualTriple(comp.mu.positions, f_k, h_k, triple.grid, g_k, tags=[k])
        shapes.append(normalize_component(raw, comp, k, tol)[1])
    return {
        "N": N,
        "slope_gaps": gaps,
        "min_slope_gap": float(gaps.min()),
        "slope_decrease_ok": bool(np.all(gaps >= 1 - 1e-6)),
        "statistic": stat,
        "bound": -float(sum((n - 1) / n**2 for n in range(1, N + 1))),
        "shape_violations": [r.component for r in shapes if not r.ok],
        "primal_value": primal.value,
    }


def fit_log_constant(levels: Sequence[float], values: Sequence[float], rate: float) -> float:
    """Smallest C with values <= -rate * ln(level) + C on every level."""
    return float(max(v + rate * math.log(n) for n, v in zip(levels, values)))


def log_slope(levels: Sequence[float], values: Sequence[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(levels, dtype=float)), np.asarray(values, dtype=float), 1)[0])


def cr_diagnostic(r: float, s: float, N: int, tol: Tolerances = DEFAULT) -> dict:
    """Slopes b_n of g across the cells, their drops, and T_N = sum Δ_n (b_n - b_1)."""
    fam = gen_cr_cost(r, s, N)
    triple, primal = lp_triple(fam, tol)
    y = fam.grid["y"]
    g = triple.g_at(y)
    delta = np.diff(y)
    b = np.diff(g) / delta
    drops = b[:-1] - b[1:]
    n = np.arange(1, N)
    pos = drops > 0
    slope = float(np.polyfit(np.log(n[pos]), np.log(drops[pos]), 1)[0]) if pos.sum() >= 2 else math.nan
    return {
        "N": N,
        "b": b,
        "drops": drops,
        "regression_slope": slope,
        "expected_slope": s - s * r,
        "cumulative": float(np.sum(delta * (b - b[0]))),
        "primal_value": primal.value,
    }


# nonintegrable dual -----------------------------------------------------------------


def xi(y):
    """Concave, <= 0, vanishing at 1/2, with non-integrable poles at 0 and 1."""
    y = np.asarray(y, dtype=float)
    return 4.0 - 1.0 / y - 1.0 / (1.0 - y)


def xi_prime(y):
    y = np.asarray(y, dtype=float)
    return 1.0 / y**2 - 1.0 / (1.0 - y) ** 2


def _xi_prime_inverse(slope: float) -> float:
    # xi' decreases from +inf to -inf on ]0, 1[
    return brentq(lambda t: float(xi_prime(t)) - slope, _EDGE, 1 - _EDGE, xtol=1e-15, maxiter=500)


def _tangency(x: float) -> tuple[float, float, float, float]:
    """(f, h, y_minus, y_plus) with f + h(y - x) - |x - y| tangent to xi on both sides of x."""
    def mismatch(h):
        lo, hi = _xi_prime_inverse(h + 1), _xi_prime_inverse(h - 1)
        t_lo = float(xi(lo)) + (h + 1) * (x - lo)
        t_hi = float(xi(hi)) + (h - 1) * (x - hi)
        return t_lo - t_hi

    # the kink sits at the crossing of the two tangents; mismatch is increasing in h
    span = float(abs(xi_prime(x))) + 2.0
    lo_h, hi_h = -span, span
    for _ in range(60):
        if mismatch(lo_h) < 0 < mismatch(hi_h):
            break
        lo_h, hi_h = 2 * lo_h, 2 * hi_h
    try:
        h = brentq(mismatch, lo_h, hi_h, xtol=1e-14, maxiter=500)
    except ValueError as exc:
        raise RootFindFailed(f"no tangency slope found at x={x}", x) from exc
    y_lo, y_hi = _xi_prime_inverse(h + 1), _xi_prime_inverse(h - 1)
    if not (0 < y_lo < x < y_hi < 1):
        raise RootFindFailed(f"tangency points {y_lo}, {y_hi} do not bracket x={x}", x)
    f = float(xi(y_lo)) + (h + 1) * (x - y_lo)
    return f, h, y_lo, y_hi


def gen_nonintegrable(K: int) -> TruncatedFamily:
    """mu uniform on K midpoints of [0, 1], c = -|x - y|, g = xi on the two-point kernel support."""
    if K < 8:
        raise BadParameters("K must be at least 8")
    x = (np.arange(K) + 0.5) / K
    sol = [_tangency(float(t)) for t in x]
    f = np.array([s[0] for s in sol])
    h = np.array([s[1] for s in sol])
    ys = np.unique(np.array([[s[2], s[3]] for s in sol]).ravel())
    rows = []
    for t, (_, _, lo, hi) in zip(x, sol):
        rows.append((1.0 / K, [(lo, (hi - t) / (hi - lo)), (hi, (t - lo) / (hi - lo))]))
    nu_w, pi = _kernel_coupling(x, ys, rows)
    mu = DiscreteMeasure(x, np.full(K, 1.0 / K))
    nu = DiscreteMeasure(ys, nu_w)
    cost = PowerCost(-1, 1)
    triple = DualTriple(x, f, h, ys, xi(ys))
    coupling = Coupling(pi, float(np.sum(pi * cost.matrix(x, ys))), x, ys)
    return TruncatedFamily("nonintegrable", K, mu, nu, cost, {"x": x, "y": ys},
                           {"K": K, "xi": "4 - 1/x - 1/(1-x)"}, triple, coupling)


def nonintegrable_diagnostic(levels: Sequence[int] = (16, 64, 256), tol: Tolerances = DEFAULT) -> dict:
    fams = [gen_nonintegrable(K) for K in levels]
    reports = [verify_duality(f.triple, f.mu, f.nu, f.cost, f.coupling, tol) for f in fams]
    probe: ProbeResult = integrability_probe([(f.nu, f.triple.g) for f in fams], tol.conv_tol)
    return {"levels": list(levels), "nu_g": probe.values, "divergent": probe.divergent, "reports": reports}


__all__ = [
    "TruncatedFamily", "NormalizationVerdict",
    "gen_linear_growth", "gen_local_convexity", "gen_cr_cost", "gen_nonintegrable",
    "linear_growth_diagnostic", "local_convexity_diagnostic", "cr_diagnostic", "nonintegrable_diagnostic",
    "fit_log_constant", "log_slope", "lp_triple", "xi", "xi_prime",
]
