"""Random convex-ordered instances and independent oracles shared by the tests."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from motdual.measures import DiscreteMeasure
from motdual.primal import constraint_matrix


def kernel_instance(rng, n, m, lo=-1.0, hi=1.0, spread=2.0, grid_step=None):
    """mu on n points of ]lo, hi[, nu the image of a random martingale kernel.

    nu always carries atoms at lo - spread and hi + spread so every x is
    bracketed.  With ``grid_step`` all positions are snapped to a lattice.
    Returns (mu, nu, pi) where pi is the generating martingale coupling.
    """
    if grid_step:
        cells = np.arange(lo + grid_step, hi, grid_step)
        x = np.unique(rng.choice(cells, size=min(n, cells.size), replace=False))
        inner = np.arange(lo - spread, hi + spread + grid_step / 2, grid_step)
        ys = np.unique(np.concatenate([[lo - spread, hi + spread], rng.choice(inner, size=max(m - 2, 0))]))
    else:
        x = np.sort(rng.uniform(lo, hi, n))
        ys = np.unique(np.concatenate([[lo - spread, hi + spread], rng.uniform(lo - spread, hi + spread, m - 2)]))
    w = rng.dirichlet(np.ones(x.size))
    pi = np.zeros((x.size, ys.size))
    for i, xi in enumerate(x):
        left = np.flatnonzero(ys < xi)
        right = np.flatnonzero(ys > xi)
        pairs = [(l, r) for l in left for r in right]
        a = rng.dirichlet(np.ones(len(pairs)))
        for (l, r), ak in zip(pairs, a):
            t = (ys[r] - xi) / (ys[r] - ys[l])
            pi[i, l] += w[i] * ak * t
            pi[i, r] += w[i] * ak * (1 - t)
    keep = pi.sum(axis=0) > 0
    return DiscreteMeasure(x, w), DiscreteMeasure(ys[keep], pi.sum(axis=0)[keep]), pi[:, keep]


def multi_component_instance(rng, k=2, diagonal=1, n=3, m=5):
    """k disjoint blocks side by side plus ``diagonal`` atoms shared by mu and nu."""
    xs, ws, ys, vs = [], [], [], []
    parts = k + diagonal
    for b in range(k):
        mu, nu, _ = kernel_instance(rng, n, m)
        shift = 8.0 * b
        xs += list(mu.positions + shift)
        ys += list(nu.positions + shift)
        ws += list(mu.weights / parts)
        vs += list(nu.weights / parts)
    for d in range(diagonal):
        p = 8.0 * k + 2.0 * d
        xs.append(p)
        ys.append(p)
        ws.append(1.0 / parts)
        vs.append(1.0 / parts)
    return DiscreteMeasure(xs, ws), DiscreteMeasure(ys, vs)


def touching_components_instance():
    """Two components sharing the endpoint atom 0: ]-1, 0[ and ]0, 1[."""
    mu = DiscreteMeasure([-0.5, 0.5], [0.5, 0.5])
    nu = DiscreteMeasure([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    return mu, nu


def random_instance(rng, max_atoms=20):
    """Mixture of the generators above, as used by the property suites."""
    mode = rng.integers(0, 4)
    if mode == 0:
        return kernel_instance(rng, rng.integers(1, max_atoms + 1), rng.integers(3, max_atoms + 1))[:2]
    if mode == 1:
        return kernel_instance(rng, rng.integers(1, 8), rng.integers(3, max_atoms + 1), grid_step=0.25)[:2]
    if mode == 2:
        return multi_component_instance(rng, k=int(rng.integers(1, 3)), diagonal=int(rng.integers(0, 2)))
    return kernel_instance(rng, rng.integers(1, max_atoms + 1), rng.integers(3, max_atoms + 1),
                           lo=0.0, hi=5.0, spread=rng.uniform(0.1, 3.0))[:2]


# oracles --------------------------------------------------------------------


def lp_data(mu, nu, cost):
    A = constraint_matrix(mu.positions, nu.positions)
    b = np.concatenate([mu.weights, nu.weights, np.zeros(len(mu))])
    c = cost.matrix(mu.positions, nu.positions).ravel()
    return A, b, c


def brute_force_lp(A, b, c, tol=1e-10):
    """min c.x over Ax = b, x >= 0 by enumerating every basis."""
    A = np.asarray(A, dtype=float)
    rank = np.linalg.matrix_rank(A)
    # independent rows, greedily
    rows = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[rows + [i]]) > len(rows):
            rows.append(i)
    A_r, b_r = A[rows], np.asarray(b, dtype=float)[rows]
    best, best_x = np.inf, None
    for cols in itertools.combinations(range(A.shape[1]), rank):
        B = A_r[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b_r)
        if np.any(xb < -tol):
            continue
        x = np.zeros(A.shape[1])
        x[list(cols)] = xb
        if np.max(np.abs(A @ x - b)) > 1e-9:
            continue
        val = float(c @ x)
        if val < best:
            best, best_x = val, x
    return best, best_x


def highs_value(mu, nu, cost):
    A, b, c = lp_data(mu, nu, cost)
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def chord_envelope(ys, values):
    """O(n^3) least concave majorant: max over chords through pairs straddling each point."""
    n = len(ys)
    out = []
    for k in range(n):
        best = values[k]
        for i in range(k + 1):
            for j in range(k, n):
                if i == j:
                    continue
                v = values[i] + (values[j] - values[i]) * (ys[k] - ys[i]) / (ys[j] - ys[i])
                if v > best:
                    best = v
        out.append(best)
    return out
