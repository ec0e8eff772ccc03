"""The martingale transport LP over supp(mu) x supp(nu)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import DEFAULT, Tolerances
from .costs import CostSpec
from .errors import Infeasible
from .measures import DiscreteMeasure, check_convex_order
from .simplex import LPResult, solve_lp, to_fraction_array

COUPLING_TOL = 1e-8
# rational reconstruction of float measure data in exact mode
EXACT_DENOMINATOR = 10**12


@dataclass
class Coupling:
    """pi[i, j] = mass sent from mu-atom i to nu-atom j."""

    pi: np.ndarray
    value: float
    x: np.ndarray
    y: np.ndarray

    def support(self, supp_tol: float = DEFAULT.supp_tol) -> list[tuple[int, int]]:
        return [tuple(map(int, ij)) for ij in np.argwhere(self.pi > supp_tol)]

    def residuals(self, mu_weights, nu_weights) -> dict:
        rows = np.array([math.fsum(r) for r in self.pi]) - mu_weights
        cols = np.array([math.fsum(c) for c in self.pi.T]) - nu_weights
        bary = np.array([math.fsum(self.pi[i] * (self.y - self.x[i])) for i in range(self.x.size)])
        return {
            "row": float(np.max(np.abs(rows), initial=0.0)),
            "column": float(np.max(np.abs(cols), initial=0.0)),
            "martingale": float(np.max(np.abs(bary), initial=0.0)),
            "negativity": float(max(0.0, -float(np.min(self.pi, initial=0.0)))),
        }

    def is_valid(self, mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = COUPLING_TOL) -> bool:
        return all(v <= tol for v in self.residuals(mu.weights, nu.weights).values())


@dataclass
class Certificate:
    """Optimal basis and LP multipliers.

    The dual LP reads  max mu.alpha + nu.beta  s.t.
    alpha_i + beta_j + gamma_i (y_j - x_i) <= c_ij, so f = -alpha, g = beta, h = -gamma.
    """

    basis: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    bland_pivots: int
    exact: bool
    lp: LPResult = field(repr=False)

    @property
    def f(self) -> np.ndarray:
        return 0.0 - self.alpha

    @property
    def g(self) -> np.ndarray:
        return self.beta

    @property
    def h(self) -> np.ndarray:
        return 0.0 - self.gamma


@dataclass
class PrimalResult:
    coupling: Coupling
    value: float
    certificate: Certificate

    def __iter__(self):
        return iter((self.coupling, self.value, self.certificate))


def constraint_matrix(x, y):
    """Rows: n row-marginals, m column-marginals, n barycenters; columns pi[i, j] at i*m + j."""
    x = np.asarray(x)
    y = np.asarray(y)
    n, m = x.size, y.size
    dtype = object if x.dtype == object else float
    zero = Fraction(0) if dtype is object else 0.0
    A = np.full((2 * n + m, n * m), zero, dtype=dtype)
    for i in range(n):
        for j in range(m):
            k = i * m + j
            A[i, k] = 1
            A[n + j, k] = 1
            A[n + m + i, k] = y[j] - x[i]
    return A


def feasible(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: Tolerances = DEFAULT) -> bool:
    """Strassen: a martingale coupling exists iff mu <= nu in convex order."""
    return check_convex_order(mu, nu, tol).ordered


def _balance(x, mu_w, y, nu_w):
    """Adjust the two extreme nu-weights so mass and first moment equal mu's exactly."""
    if y.size < 2:
        return nu_w
    mass = sum(mu_w) - sum(nu_w)
    moment = sum(mu_w * x) - sum(nu_w * y)
    lo, hi = 0, y.size - 1
    d_hi = (moment - y[lo] * mass) / (y[hi] - y[lo])
    out = nu_w.copy()
    out[hi] += d_hi
    out[lo] += mass - d_hi
    if out[lo] < 0 or out[hi] < 0:
        raise Infeasible("rational rebalancing of nu produced a negative weight")
    return out


def solve_primal(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec, tol: Tolerances = DEFAULT,
                 exact: bool = False, check_order: bool = True) -> PrimalResult:
    """Optimal basic solution of min sum c_ij pi_ij over martingale couplings of (mu, nu).

    ``check_order=False`` skips the convex-order precheck; sub-probability
    pieces of a decomposition go through this path.
    """
    if check_order:
        report = check_convex_order(mu, nu, tol)
        if not report.ordered:
            raise Infeasible(f"mu is not dominated by nu in convex order (witness {report.witness})")
    n, m = len(mu), len(nu)
    C = cost.matrix(mu.positions, nu.positions)
    if exact:
        x = to_fraction_array(mu.positions, EXACT_DENOMINATOR)
        y = to_fraction_array(nu.positions, EXACT_DENOMINATOR)
        mu_w = to_fraction_array(mu.weights, EXACT_DENOMINATOR)
        nu_w = _balance(x, mu_w, y, to_fraction_array(nu.weights, EXACT_DENOMINATOR))
        b = np.concatenate([mu_w, nu_w,
                            np.full(n, Fraction(0), dtype=object)])
        c = to_fraction_array(C.ravel())
    else:
        x, y = mu.positions, nu.positions
        b = np.concatenate([mu.weights, nu.weights, np.zeros(n)])
        c = C.ravel()
    A = constraint_matrix(x, y)
    lp = solve_lp(A, b, c, exact=exact, bland_after=tol.bland_after, infeas_tol=tol.infeas_tol)

    pi = np.array([float(v) for v in lp.x]).reshape(n, m)
    value = float(lp.objective) if exact else math.fsum((C * pi).ravel())
    duals = np.array([float(v) for v in lp.duals])
    cert = Certificate(
        basis=lp.basis,
        alpha=duals[:n],
        beta=duals[n:n + m],
        gamma=duals[n + m:],
        reduced_costs=np.array([float(v) for v in lp.reduced_costs]).reshape(n, m),
        iterations=lp.iterations,
        bland_pivots=lp.bland_pivots,
        exact=exact,
        lp=lp,
    )
    coupling = Coupling(pi=pi, value=value, x=mu.positions, y=nu.positions)
    return PrimalResult(coupling, value, cert)
