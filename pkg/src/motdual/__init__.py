"""Discrete martingale optimal transport: primal LP, dual maximizers, regularity checks."""

from .config import DEFAULT, Tolerances
from .costs import FunctionCost, GridCost, PiecewiseLinear, PowerCost, ShiftedCost, auto_u
from .decomposition import Component, ComponentDecomposition, decompose
from .dual import (DualTriple, construct_dual, contact_set, envelope_g, glue, halfinfinite_normalize,
                   normalize_component, recover_component_dual, verify_duality)
from .errors import (BadParameters, GlueViolation, InconsistentSplit, Infeasible, MOTError, NotCompact,
                     NotInConvexOrder, RootFindFailed, ShapeViolation, SlacknessViolated, Unbounded)
from .measures import DiscreteMeasure, Interval, check_convex_order, is_irreducible, potential
from .primal import Coupling, solve_primal
from .regularity import concave_envelope, integrability_probe, lipschitz_postprocess, smooth

__version__ = "0.1.0"

__all__ = [
    "DEFAULT", "Tolerances",
    "FunctionCost", "GridCost", "PiecewiseLinear", "PowerCost", "ShiftedCost", "auto_u",
    "Component", "ComponentDecomposition", "decompose",
    "DualTriple", "construct_dual", "contact_set", "envelope_g", "glue", "halfinfinite_normalize",
    "normalize_component", "recover_component_dual", "verify_duality",
    "BadParameters", "GlueViolation", "InconsistentSplit", "Infeasible", "MOTError", "NotCompact",
    "NotInConvexOrder", "RootFindFailed", "ShapeViolation", "SlacknessViolated", "Unbounded",
    "DiscreteMeasure", "Interval", "check_convex_order", "is_irreducible", "potential",
    "Coupling", "solve_primal",
    "concave_envelope", "integrability_probe", "lipschitz_postprocess", "smooth",
]
