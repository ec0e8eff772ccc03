"""Versioned JSON instance and solution files, CSV plot data."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .costs import CostSpec, GridCost, PiecewiseLinear, PowerCost, ShiftedCost
from .dual import DualTriple
from .measures import DiscreteMeasure, potential, union_grid
from .primal import Coupling

FORMAT = 1


class InstanceError(ValueError):
    """Malformed instance or solution file."""


@dataclass
class Instance:
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    cost: CostSpec
    tolerances: dict = field(default_factory=dict)
    grid_refine: int = 0
    exact_mode: bool = False

    def tol(self, base: Tolerances = DEFAULT) -> Tolerances:
        return base.updated(**self.tolerances)


def _check_keys(obj, allowed: set, where: str, required: set = frozenset()):
    if not isinstance(obj, dict):
        raise InstanceError(f"{where} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise InstanceError(f"unknown field(s) in {where}: {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise InstanceError(f"missing field(s) in {where}: {sorted(missing)}")


def _pairs(obj, where: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"{where} must be a list of [position, value] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise InstanceError(f"{where} must be a non-empty list of [position, value] pairs")
    return arr[:, 0], arr[:, 1]


def _measure(obj, where: str) -> DiscreteMeasure:
    pos, w = _pairs(obj, where)
    try:
        return DiscreteMeasure(pos, w)
    except ValueError as exc:
        raise InstanceError(f"{where}: {exc}") from exc


def parse_cost(obj, mu: DiscreteMeasure, nu: DiscreteMeasure) -> CostSpec:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise InstanceError("cost must be an object with exactly one of power, grid, shifted")
    (kind, body), = obj.items()
    if kind == "power":
        _check_keys(body, {"sign", "exponent"}, "cost.power", {"sign", "exponent"})
        try:
            return PowerCost(int(body["sign"]), float(body["exponent"]))
        except ValueError as exc:
            raise InstanceError(f"cost.power: {exc}") from exc
    if kind == "grid":
        _check_keys(body, {"values", "x", "y"}, "cost.grid", {"values"})
        xs = body.get("x", mu.positions.tolist())
        ys = body.get("y", nu.positions.tolist())
        try:
            cost = GridCost(xs, ys, body["values"])
        except ValueError as exc:
            raise InstanceError(f"cost.grid: {exc}") from exc
        if not cost.defined_on(mu.positions, nu.positions):
            raise InstanceError("cost.grid does not cover supp(mu) x supp(nu)")
        return cost
    if kind == "shifted":
        _check_keys(body, {"base", "u_knots"}, "cost.shifted", {"base", "u_knots"})
        knots, values = _pairs(body["u_knots"], "cost.shifted.u_knots")
        try:
            u = PiecewiseLinear(knots, values)
        except ValueError as exc:
            raise InstanceError(f"cost.shifted.u_knots: {exc}") from exc
        return ShiftedCost(parse_cost(body["base"], mu, nu), u)
    raise InstanceError(f"unknown cost kind {kind!r}")


def parse_instance(obj) -> Instance:
    _check_keys(obj, {"format", "mu", "nu", "cost", "options"}, "instance", {"mu", "nu", "cost"})
    if obj.get("format", FORMAT) != FORMAT:
        raise InstanceError(f"unsupported format {obj.get('format')!r}")
    mu = _measure(obj["mu"], "mu")
    nu = _measure(obj["nu"], "nu")
    cost = parse_cost(obj["cost"], mu, nu)
    opts = obj.get("options", {})
    _check_keys(opts, {"tolerances", "grid_refine", "exact_mode"}, "options")
    tols = opts.get("tolerances", {})
    try:
        DEFAULT.updated(**tols)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"options.tolerances: {exc}") from exc
    refine = opts.get("grid_refine", 0)
    if not isinstance(refine, int) or refine < 0:
        raise InstanceError("options.grid_refine must be a non-negative integer")
    exact = opts.get("exact_mode", False)
    if not isinstance(exact, bool):
        raise InstanceError("options.exact_mode must be a boolean")
    return Instance(mu, nu, cost, dict(tols), refine, exact)


def instance_to_json(inst: Instance) -> dict:
    out = {
        "format": FORMAT,
        "mu": [[x, w] for x, w in inst.mu.atoms],
        "nu": [[y, w] for y, w in inst.nu.atoms],
        "cost": inst.cost.to_json(),
    }
    opts = {}
    if inst.tolerances:
        opts["tolerances"] = dict(inst.tolerances)
    if inst.grid_refine:
        opts["grid_refine"] = inst.grid_refine
    if inst.exact_mode:
        opts["exact_mode"] = True
    if opts:
        out["options"] = opts
    return out


def grid_cost_instance(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec, **options) -> Instance:
    """Materialize any cost on supp(mu) x supp(nu) so it can be written to a file."""
    try:
        cost.to_json()
        materialized = cost
    except TypeError:
        materialized = GridCost(mu.positions, nu.positions, cost.matrix(mu.positions, nu.positions))
    return Instance(mu, nu, materialized, **options)


def load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from exc


def load_instance(path: str) -> Instance:
    return parse_instance(load_json(path))


def dump_json(obj, path: str | None = None) -> str:
    text = json.dumps(_plain(obj), indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def _plain(obj):
    """numpy scalars and arrays to builtin types; floats keep repr (shortest round-trip) precision."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


# solutions ------------------------------------------------------------------


def triple_to_json(t: DualTriple) -> dict:
    return {"atoms": t.atoms, "f": t.f, "h": t.h, "grid": t.grid, "g": t.g, "tags": t.tags}


def triple_from_json(obj) -> DualTriple:
    _check_keys(obj, {"atoms", "f", "h", "grid", "g", "tags"}, "triple", {"atoms", "f", "h", "grid", "g"})
    try:
        return DualTriple(obj["atoms"], obj["f"], obj["h"], obj["grid"], obj["g"], tags=obj.get("tags"))
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"triple: {exc}") from exc


def solution_to_json(inst: Instance, triple: DualTriple, coupling: Coupling, report: dict) -> dict:
    return {
        "format": FORMAT,
        "kind": "solution",
        "instance": instance_to_json(inst),
        "triple": triple_to_json(triple),
        "coupling": {"pi": coupling.pi},
        "report": report,
    }


def parse_solution(obj) -> tuple[Instance, DualTriple, Coupling, dict]:
    _check_keys(obj, {"format", "kind", "instance", "triple", "coupling", "report"}, "solution",
                {"instance", "triple", "coupling"})
    if obj.get("format", FORMAT) != FORMAT or obj.get("kind", "solution") != "solution":
        raise InstanceError("not a format-1 solution file")
    inst = parse_instance(obj["instance"])
    triple = triple_from_json(obj["triple"])
    _check_keys(obj["coupling"], {"pi"}, "coupling", {"pi"})
    pi = np.asarray(obj["coupling"]["pi"], dtype=float)
    if pi.shape != (len(inst.mu), len(inst.nu)):
        raise InstanceError(f"coupling has shape {pi.shape}, expected {(len(inst.mu), len(inst.nu))}")
    value = float(np.sum(pi * inst.cost.matrix(inst.mu.positions, inst.nu.positions)))
    coupling = Coupling(pi, value, inst.mu.positions, inst.nu.positions)
    return inst, triple, coupling, obj.get("report", {})


# csv ------------------------------------------------------------------------

POTENTIALS_HEADER = ["x", "u_mu", "u_nu"]
DUAL_HEADER = ["point", "f", "g", "h"]
COUPLING_HEADER = ["i", "j", "x", "y", "pi"]


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_csvs(directory: str, mu: DiscreteMeasure, nu: DiscreteMeasure, triple: DualTriple | None,
               coupling: Coupling | None, supp_tol: float = DEFAULT.supp_tol) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    written = []
    grid = union_grid(mu, nu)
    path = os.path.join(directory, "potentials.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POTENTIALS_HEADER)
        for x, a, b in zip(grid, potential(mu, grid), potential(nu, grid)):
            w.writerow([_fmt(x), _fmt(a), _fmt(b)])
    written.append(path)
    if triple is not None:
        fh_map = {float(x): (f, h) for x, f, h in zip(triple.atoms, triple.f, triple.h)}
        g_map = {float(y): g for y, g in zip(triple.grid, triple.g)}
        path = os.path.join(directory, "dual.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DUAL_HEADER)
            for p in sorted(set(fh_map) | set(g_map)):
                f, h = fh_map.get(p, (None, None))
                w.writerow([_fmt(p), _fmt(f), _fmt(g_map.get(p)), _fmt(h)])
        written.append(path)
    if coupling is not None:
        path = os.path.join(directory, "coupling.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COUPLING_HEADER)
            for i, j in coupling.support(supp_tol):
                w.writerow([i, j, _fmt(coupling.x[i]), _fmt(coupling.y[j]), _fmt(coupling.pi[i, j])])
        written.append(path)
    return written
