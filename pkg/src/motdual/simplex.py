"""Dense revised simplex for equality-form LPs: min c.x  s.t.  A x = b, x >= 0.

Phase 1 starts from an all-artificial basis.  Entering columns are picked
by Dantzig's rule; after ``bland_after`` consecutive degenerate pivots the
solver switches to Bland's rule until it makes progress again.  The basis
inverse is kept explicitly and refactorized periodically in float mode.
With ``exact=True`` all arithmetic is done on ``fractions.Fraction`` values
held in object arrays and every tolerance is zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import Infeasible, Unbounded

log = logging.getLogger(__name__)

OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64


@dataclass
class LPResult:
    x: np.ndarray
    objective: object
    basis: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    bland_pivots: int
    exact: bool
    redundant_rows: tuple[int, ...] = ()


def to_fraction_array(a, limit: int | None = None) -> np.ndarray:
    """Object array of Fractions; floats are converted exactly unless ``limit`` caps the denominator."""
    arr = np.asarray(a)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        fr = v if isinstance(v, Fraction) else Fraction(v)
        out[idx] = fr.limit_denominator(limit) if limit else fr
    return out


def _exact_inverse(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    aug = np.empty((n, 2 * n), dtype=object)
    aug[:, :n] = M
    aug[:, n:] = Fraction(0)
    for i in range(n):
        aug[i, n + i] = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r, col] != 0), None)
        if piv is None:
            raise np.linalg.LinAlgError("singular basis")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = aug[col] / aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0:
                aug[r] = aug[r] - aug[r, col] * aug[col]
    return aug[:, n:]


class RevisedSimplex:
    def __init__(self, A, b, c, exact: bool = False, bland_after: int = 50,
                 infeas_tol: float = 1e-9, max_iter: int | None = None):
        self.exact = exact
        if exact:
            A, b, c = to_fraction_array(A), to_fraction_array(b), to_fraction_array(c)
            zero, one = Fraction(0), Fraction(1)
            self.opt_tol = self.piv_tol = self.infeas_tol = zero
        else:
            A = np.array(A, dtype=float)
            b = np.array(b, dtype=float)
            c = np.array(c, dtype=float)
            zero, one = 0.0, 1.0
            self.opt_tol, self.piv_tol, self.infeas_tol = OPT_TOL, PIVOT_TOL, infeas_tol
        m, n = A.shape
        if b.shape != (m,) or c.shape != (n,):
            raise ValueError("inconsistent LP dimensions")
        self.m, self.n = m, n
        self.sign = np.array([-1 if bi < 0 else 1 for bi in b])
        A = A * self.sign[:, None]
        b = b * self.sign
        eye = np.full((m, m), zero, dtype=object if exact else float)
        for i in range(m):
            eye[i, i] = one
        self.A = np.hstack([A, eye])
        self.b = b
        self.c = c
        self.zero = zero
        self.bland_after = bland_after
        self.max_iter = max_iter or 50 * (m + n) + 1000
        self.basis = np.arange(n, n + m)
        self.Binv = eye.copy()
        self.xB = b.copy()
        self.iterations = 0
        self.bland_pivots = 0
        self._since_refactor = 0
        self.locked = np.zeros(m, dtype=bool)

    # linear algebra helpers -------------------------------------------

    def _refactor(self):
        B = self.A[:, self.basis]
        if self.exact:
            self.Binv = _exact_inverse(B)
            self.xB = self.Binv @ self.b
        else:
            self.Binv = np.linalg.inv(B)
            self.xB = np.linalg.solve(B, self.b)
        self._since_refactor = 0

    def _pivot(self, r: int, q: int, u: np.ndarray):
        pr = u[r]
        theta = self.xB[r] / pr
        self.xB = self.xB - theta * u
        self.xB[r] = theta
        row = self.Binv[r] / pr
        self.Binv = self.Binv - np.outer(u, row)
        self.Binv[r] = row
        self.basis[r] = q
        self.iterations += 1
        self._since_refactor += 1
        if not self.exact and self._since_refactor >= REFACTOR_EVERY:
            self._refactor()

    def _duals(self, cost):
        return cost[self.basis] @ self.Binv

    # main loop ----------------------------------------------------------

    def _run(self, cost: np.ndarray, allowed: np.ndarray):
        degenerate_run = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise RuntimeError(f"simplex did not terminate within {self.max_iter} pivots")
            y = self._duals(cost)
            d = cost - y @ self.A
            mask = allowed.copy()
            mask[self.basis] = False
            if self.exact:
                neg = np.array([j for j in np.flatnonzero(mask) if d[j] < 0], dtype=int)
            else:
                neg = np.flatnonzero(mask & (d < -self.opt_tol))
            if neg.size == 0:
                return
            if bland:
                q = int(neg[0])
                self.bland_pivots += 1
            else:
                q = int(neg[np.argmin(d[neg].astype(float))])
            u = self.Binv @ self.A[:, q]
            if self.exact:
                rows = np.array([i for i in range(self.m) if u[i] > 0 and not self.locked[i]], dtype=int)
            else:
                rows = np.flatnonzero((u > self.piv_tol) & ~self.locked)
            if rows.size == 0:
                raise Unbounded("LP objective is unbounded below")
            if self.exact:
                ratios = np.array([self.xB[i] / u[i] for i in rows], dtype=object)
                best = min(ratios)
                ties = rows[np.array([t == best for t in ratios], dtype=bool)]
            else:
                ratios = self.xB[rows] / u[rows]
                best = float(ratios.min())
                ties = rows[ratios <= best + self.piv_tol]
            if bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(max(ties, key=lambda i: float(u[i])))
            if best <= self.piv_tol:
                degenerate_run += 1
                if degenerate_run >= self.bland_after:
                    bland = True
            else:
                degenerate_run = 0
                bland = False
            self._pivot(r, q, u)

    def _drive_out_artificials(self):
        """Pivot basic artificials out where possible; lock rows that are redundant."""
        struct = self.A[:, : self.n]
        for r in range(self.m):
            if self.basis[r] < self.n:
                continue
            row = self.Binv[r] @ struct
            nonbasic = np.ones(self.n, dtype=bool)
            nonbasic[self.basis[self.basis < self.n]] = False
            cand = [j for j in np.flatnonzero(nonbasic) if abs(row[j]) > self.piv_tol]
            if not cand:
                self.locked[r] = True
                continue
            q = max(cand, key=lambda j: abs(float(row[j])))
            u = self.Binv @ self.A[:, q]
            self._pivot(r, q, u)
            if not self.exact:
                self.xB = np.where(np.abs(self.xB) < 1e-13, 0.0, self.xB)

    def solve(self) -> LPResult:
        n, m = self.n, self.m
        phase1 = np.concatenate([np.full(n, self.zero, dtype=object if self.exact else float),
                                 np.full(m, Fraction(1) if self.exact else 1.0, dtype=object if self.exact else float)])
        allowed = np.ones(n + m, dtype=bool)
        self._run(phase1, allowed)
        if not self.exact:
            self._refactor()
        residual = sum(self.xB[i] for i in range(m) if self.basis[i] >= n)
        if residual > self.infeas_tol:
            raise Infeasible(f"phase 1 left artificial mass {float(residual):.3e}")
        self._drive_out_artificials()

        phase2 = np.concatenate([self.c, np.full(m, self.zero, dtype=object if self.exact else float)])
        allowed = np.zeros(n + m, dtype=bool)
        allowed[:n] = True
        self._run(phase2, allowed)
        self._refactor()
        if not self.exact:
            self.xB = np.maximum(self.xB, 0.0)

        x = np.full(n, self.zero, dtype=object if self.exact else float)
        for i, j in enumerate(self.basis):
            if j < n:
                x[j] = self.xB[i]
        y = self._duals(phase2)
        reduced = self.c - y @ self.A[:, :n]
        duals = y * self.sign
        objective = sum((self.c[j] * x[j] for j in range(n)), self.zero) if self.exact else float(self.c @ x)
        log.debug("simplex finished: %d pivots (%d Bland), objective %s", self.iterations, self.bland_pivots, objective)
        return LPResult(
            x=x, objective=objective, basis=self.basis.copy(), duals=duals, reduced_costs=reduced,
            iterations=self.iterations, bland_pivots=self.bland_pivots, exact=self.exact,
            redundant_rows=tuple(int(i) for i in np.flatnonzero(self.locked)),
        )


def solve_lp(A, b, c, exact: bool = False, bland_after: int = 50, infeas_tol: float = 1e-9) -> LPResult:
    return RevisedSimplex(A, b, c, exact=exact, bland_after=bland_after, infeas_tol=infeas_tol).solve()
