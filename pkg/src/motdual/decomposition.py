"""Splitting a convex-ordered pair into irreducible components and a diagonal part."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import InconsistentSplit, NotInConvexOrder
from .measures import DiscreteMeasure, Interval, check_convex_order, positive_region

REASSEMBLY_TOL = 1e-9


@dataclass(frozen=True)
class Component:
    interval: Interval
    mu: DiscreteMeasure
    nu: DiscreteMeasure

    @property
    def mass(self) -> float:
        return self.mu.mass


@dataclass(frozen=True)
class ComponentDecomposition:
    components: list[Component]
    diagonal: DiscreteMeasure
    nu_diagonal: DiscreteMeasure = field(repr=False)

    def __len__(self) -> int:
        return len(self.components)

    def component_of(self, x: float) -> int:
        """1-based index of the component whose interval holds x, 0 for the diagonal."""
        for k, comp in enumerate(self.components, start=1):
            if comp.interval.contains(x):
                return k
        return 0

    def tags(self, positions) -> np.ndarray:
        return np.array([self.component_of(x) for x in np.asarray(positions, dtype=float)], dtype=int)


def endpoint_split(nu: DiscreteMeasure, interval: Interval, target_mass: float, target_mean: float,
                   tol: float = REASSEMBLY_TOL) -> tuple[float, float]:
    """Masses (alpha_lo, alpha_hi) to put at the ends so nu's piece matches mass and mean.

    Only the atoms of ``nu`` strictly inside ``interval`` are counted as the
    interior; the remaining mass and first moment are solved for exactly.
    """
    if not interval.bounded:
        raise InconsistentSplit("endpoint split needs a bounded interval")
    if target_mass <= 0:
        raise InconsistentSplit("target mass must be positive")
    a, b = interval.lo, interval.hi
    inside = Interval.open(a, b).contains(nu.positions)
    rest_mass = target_mass - math.fsum(nu.weights[inside])
    rest_moment = target_mass * target_mean - math.fsum(nu.weights[inside] * nu.positions[inside])
    alpha_hi = (rest_moment - a * rest_mass) / (b - a)
    alpha_lo = rest_mass - alpha_hi
    scale = max(1.0, target_mass)
    if alpha_lo < -tol * scale or alpha_hi < -tol * scale:
        raise InconsistentSplit(
            f"negative endpoint mass on {interval}: alpha_lo={alpha_lo:.3g}, alpha_hi={alpha_hi:.3g}")
    return max(alpha_lo, 0.0), max(alpha_hi, 0.0)


def decompose(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: Tolerances = DEFAULT) -> ComponentDecomposition:
    """Irreducible components I_k = connected pieces of {u_mu < u_nu} plus mu_0 = nu_0.

    Endpoint atoms of nu shared by neighbouring components (or by the
    diagonal) are handed out left to right: each component claims the mass
    its mass/mean balance requires and the leftover stays with nu_0.
    """
    report = check_convex_order(mu, nu, tol)
    if not report.ordered:
        raise NotInConvexOrder("mu is not dominated by nu in convex order", report.witness)

    remaining = dict(zip(nu.positions.tolist(), nu.weights.tolist()))
    mu_left = np.ones(len(mu), dtype=bool)
    components = []
    for interval in positive_region(mu, nu, tol):
        a, b = interval.lo, interval.hi
        assert a < b
        in_mu = interval.contains(mu.positions)
        mu_k = DiscreteMeasure(mu.positions[in_mu], mu.weights[in_mu], total=None)
        mu_left &= ~in_mu
        if len(mu_k) == 0:
            raise InconsistentSplit(f"component {interval} carries no mass of mu")
        alpha_lo, alpha_hi = endpoint_split(nu, interval, mu_k.mass, mu_k.mean)
        for end, alpha in ((a, alpha_lo), (b, alpha_hi)):
            available = remaining.get(end, 0.0)
            if alpha > available + REASSEMBLY_TOL:
                raise InconsistentSplit(
                    f"component {interval} needs mass {alpha:.6g} at {end:g}, only {available:.6g} left")
            remaining[end] = available - alpha
        in_nu = interval.contains(nu.positions)
        for y in nu.positions[in_nu]:
            remaining[float(y)] = 0.0
        nu_k = DiscreteMeasure.partial(
            np.concatenate([[a], nu.positions[in_nu], [b]]),
            np.concatenate([[alpha_lo], nu.weights[in_nu], [alpha_hi]]),
        )
        components.append(Component(interval, mu_k, nu_k))

    diagonal = DiscreteMeasure(mu.positions[mu_left], mu.weights[mu_left], total=None)
    nu_pos = np.array(sorted(remaining))
    nu_w = np.array([remaining[y] for y in nu_pos])
    nu_diag = DiscreteMeasure.partial(nu_pos, nu_w, drop_below=REASSEMBLY_TOL)
    result = ComponentDecomposition(components, diagonal, nu_diag)
    _check_invariants(result, mu, nu)
    return result


def _atomwise(parts, grid) -> np.ndarray:
    index = {y: i for i, y in enumerate(grid.tolist())}
    out = np.zeros(grid.size)
    for m in parts:
        for x, w in m.atoms:
            out[index[x]] += w
    return out


def _check_invariants(dec: ComponentDecomposition, mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    grid = np.unique(np.concatenate([mu.positions, nu.positions]))
    mu_parts = [c.mu for c in dec.components] + [dec.diagonal]
    nu_parts = [c.nu for c in dec.components] + [dec.nu_diagonal]
    if np.max(np.abs(_atomwise(mu_parts, grid) - _atomwise([mu], grid))) > REASSEMBLY_TOL:
        raise InconsistentSplit("mu parts do not reassemble to mu")
    if np.max(np.abs(_atomwise(nu_parts, grid) - _atomwise([nu], grid))) > REASSEMBLY_TOL:
        raise InconsistentSplit("nu parts do not reassemble to nu")
    diag_gap = _atomwise([dec.diagonal], grid) - _atomwise([dec.nu_diagonal], grid)
    if np.max(np.abs(diag_gap), initial=0.0) > REASSEMBLY_TOL:
        raise InconsistentSplit("diagonal parts of mu and nu differ")
    for comp in dec.components:
        if abs(comp.mu.mass - comp.nu.mass) > REASSEMBLY_TOL:
            raise InconsistentSplit(f"mass mismatch on {comp.interval}")
        if abs(comp.mu.first_moment - comp.nu.first_moment) > REASSEMBLY_TOL:
            raise InconsistentSplit(f"mean mismatch on {comp.interval}")
