"""Numerical tolerances shared by all modules."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace

ENV_OVERRIDES = "MOT_TOL_OVERRIDES"


@dataclass(frozen=True)
class Tolerances:
    mass_tol: float = 1e-12
    order_tol: float = 1e-9
    gap_tol: float = 1e-9
    eq_tol: float = 1e-7
    viol_tol: float = 1e-7
    supp_tol: float = 1e-10
    conv_tol: float = 1e-6
    # phase-1 residual artificial mass above which the LP is declared infeasible
    infeas_tol: float = 1e-9
    # consecutive degenerate Dantzig pivots before switching to Bland's rule
    bland_after: int = 50

    def updated(self, **overrides) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = Tolerances()


def from_environment(base: Tolerances = DEFAULT, env=None) -> Tolerances:
    """Apply JSON overrides found in ``MOT_TOL_OVERRIDES``."""
    env = os.environ if env is None else env
    raw = env.get(ENV_OVERRIDES)
    if not raw:
        return base
    overrides = json.loads(raw)
    if not isinstance(overrides, dict):
        raise ValueError(f"{ENV_OVERRIDES} must hold a JSON object")
    return base.updated(**overrides)
