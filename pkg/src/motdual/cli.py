"""Command line front end: motdual {check-order,decompose,solve,smooth,example,report}."""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import counterexamples as cx
from .config import DEFAULT, Tolerances, from_environment
from .costs import PiecewiseLinear, auto_u
from .decomposition import decompose
from .dual import DualSolution, construct_dual, verify_duality
from .errors import BadParameters, Infeasible, MOTError, NotInConvexOrder
from .io import (Instance, InstanceError, dump_json, grid_cost_instance, instance_to_json, load_instance,
                 load_json, parse_solution, solution_to_json, write_csvs)
from .measures import check_convex_order
from .regularity import smooth

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _tol_override(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    return key.strip(), float(value)


def _tolerances(inst: Instance | None, args) -> Tolerances:
    """defaults < instance options < MOT_TOL_OVERRIDES < --tol flags."""
    tol = DEFAULT
    if inst is not None:
        tol = inst.tol(tol)
    tol = from_environment(tol)
    flags = dict(getattr(args, "tol", None) or [])
    if "bland_after" in flags:
        flags["bland_after"] = int(flags["bland_after"])
    return tol.updated(**flags)


def _emit(report: dict, args) -> None:
    text = dump_json(report, getattr(args, "report", None))
    if not getattr(args, "quiet", False):
        print(text)


def _order_block(inst: Instance, tol: Tolerances) -> dict:
    rep = check_convex_order(inst.mu, inst.nu, tol)
    return {"ordered": rep.ordered, "witness": rep.witness, "mean_gap": rep.mean_gap}


def _components_block(dec) -> dict:
    return {
        "count": len(dec),
        "intervals": [c.interval.to_json() for c in dec.components],
        "masses": [c.mass for c in dec.components],
        "diagonal_mass": dec.diagonal.mass,
    }


def _solution_report(inst: Instance, sol: DualSolution, order: dict, timings: dict) -> dict:
    rep = sol.report
    return {
        "format": 1,
        "convex_order": order,
        "components": _components_block(sol.decomposition),
        "primal_value": sol.primal.value,
        "dual_value": rep.dual_value,
        "gap": rep.gap,
        "max_ineq_violation": rep.max_ineq_violation,
        "max_support_residual": rep.max_support_residual,
        "verdicts": sol.verdicts,
        "lp": {"iterations": sol.primal.certificate.iterations,
               "bland_pivots": sol.primal.certificate.bland_pivots,
               "exact": sol.primal.certificate.exact},
        "timings": timings,
    }


# subcommands ------------------------------------------------------------------


def cmd_check_order(args) -> int:
    inst = load_instance(args.instance)
    order = _order_block(inst, _tolerances(inst, args))
    _emit({"format": 1, "convex_order": order}, args)
    return EXIT_OK if order["ordered"] else EXIT_INFEASIBLE


def cmd_decompose(args) -> int:
    inst = load_instance(args.instance)
    tol = _tolerances(inst, args)
    dec = decompose(inst.mu, inst.nu, tol)
    _emit({"format": 1, "convex_order": _order_block(inst, tol), "components": _components_block(dec)}, args)
    return EXIT_OK


def _solve(inst: Instance, args, tol: Tolerances) -> tuple[DualSolution, dict]:
    exact = args.exact or inst.exact_mode
    refine = args.grid_refine if args.grid_refine is not None else inst.grid_refine
    t0 = time.perf_counter()
    sol = construct_dual(inst.mu, inst.nu, inst.cost, tol, exact=exact, grid_refine=refine)
    timings = {"total_s": time.perf_counter() - t0}
    return sol, timings


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    tol = _tolerances(inst, args)
    sol, timings = _solve(inst, args, tol)
    report = _solution_report(inst, sol, _order_block(inst, tol), timings)
    if args.out:
        dump_json(solution_to_json(inst, sol.triple, sol.coupling, report), args.out)
    if args.csv_out:
        write_csvs(args.csv_out, inst.mu, inst.nu, sol.triple, sol.coupling, tol.supp_tol)
    _emit(report, args)
    return EXIT_OK if sol.report.passes(tol) else EXIT_VERIFY


def _read_u(text: str) -> PiecewiseLinear:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = load_json(text)
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InstanceError("--u expects a list of [y, value] knots (inline JSON or a file)")
    return PiecewiseLinear(arr[:, 0], arr[:, 1])


def cmd_smooth(args) -> int:
    inst = load_instance(args.instance)
    tol = _tolerances(inst, args)
    lam = None
    if args.auto_u:
        grid = np.unique(np.concatenate([inst.mu.positions, inst.nu.positions]))
        u, lam = auto_u(inst.cost, inst.mu.positions, grid)
    else:
        u = _read_u(args.u)
    t0 = time.perf_counter()
    res = smooth(inst.mu, inst.nu, inst.cost, u, tol, exact=args.exact or inst.exact_mode,
                 grid_refine=inst.grid_refine)
    timings = {"total_s": time.perf_counter() - t0}
    base = _solution_report(inst, res.base, _order_block(inst, tol), timings)
    cert = res.result.certificate
    final = res.report
    report = {
        **base,
        "primal_value": final.primal_value,
        "dual_value": final.dual_value,
        "gap": final.gap,
        "max_ineq_violation": final.max_ineq_violation,
        "max_support_residual": final.max_support_residual,
        "lipschitz_certificate": {**cert.to_json(), "summary": cert.summary(), "lambda": lam,
                                  "u_knots": u.to_json()},
    }
    if args.out:
        dump_json(solution_to_json(inst, res.result.triple, res.base.coupling, report), args.out)
    if args.csv_out:
        write_csvs(args.csv_out, inst.mu, inst.nu, res.result.triple, res.base.coupling, tol.supp_tol)
    _emit(report, args)
    ok = final.passes(tol) and cert.passed
    return EXIT_OK if ok else EXIT_VERIFY


def _example_linear(args, tol):
    d = cx.linear_growth_diagnostic(args.levels or (4, 8, 16), tol)
    v = d["verdict"]
    fam = cx.gen_linear_growth(args.N or d["levels"][-1])
    return fam, {
        "levels": d["levels"],
        "g_at_minus_one": d["g_at_minus_one"],
        "expected": [-(n - 1) for n in d["levels"]],
        "converged": v.converged,
        "profile": v.profile,
        "probe_profiles": v.probe_profiles,
    }


def _example_local(args, tol):
    N = args.N or 32
    d = cx.local_convexity_diagnostic(N, tol)
    return cx.gen_local_convexity(N), {
        "N": N,
        "slope_decrease_check": d["slope_decrease_ok"],
        "min_slope_gap": d["min_slope_gap"],
        "statistic": d["statistic"],
        "bound": d["bound"],
        "shape_violations": len(d["shape_violations"]),
    }


def _example_cr(args, tol):
    N = args.N or 64
    d = cx.cr_diagnostic(args.r, args.s, N, tol)
    return cx.gen_cr_cost(args.r, args.s, N), {
        "N": N, "r": args.r, "s": args.s,
        "regression_slope": d["regression_slope"],
        "expected_slope": d["expected_slope"],
        "cumulative": d["cumulative"],
    }


def _example_nonintegrable(args, tol):
    levels = args.levels or (16, 64, 256)
    d = cx.nonintegrable_diagnostic(levels, tol)
    return cx.gen_nonintegrable(args.N or levels[0]), {
        "levels": list(levels),
        "nu_g": d["nu_g"],
        "divergent": d["divergent"],
        "max_ineq_violation": [r.max_ineq_violation for r in d["reports"]],
        "gap": [r.gap for r in d["reports"]],
        "xi": "4 - 1/x - 1/(1-x)",
    }


EXAMPLES = {
    "linear": _example_linear,
    "local-convexity": _example_local,
    "cr": _example_cr,
    "nonintegrable": _example_nonintegrable,
}


def cmd_example(args) -> int:
    tol = _tolerances(None, args)
    fam, diagnostic = EXAMPLES[args.name](args, tol)
    inst = grid_cost_instance(fam.mu, fam.nu, fam.cost)
    if args.emit:
        dump_json(instance_to_json(inst), args.emit)
    _emit({"format": 1, "example": args.name, "level": fam.level, "params": fam.params,
           "diagnostic": diagnostic}, args)
    return EXIT_OK


def cmd_report(args) -> int:
    inst, triple, coupling, saved = parse_solution(load_json(args.solution))
    tol = _tolerances(inst, args)
    rep = verify_duality(triple, inst.mu, inst.nu, inst.cost, coupling, tol)
    fields = ("gap", "max_ineq_violation", "max_support_residual")
    fresh = rep.as_dict()
    drift = {k: abs(fresh[k] - saved[k]) for k in fields if k in saved}
    _emit({"format": 1, **fresh, "saved": {k: saved.get(k) for k in fields}, "drift": drift}, args)
    return EXIT_OK if rep.passes(tol) else EXIT_VERIFY


# parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="motdual", description="Martingale transport duals on discrete marginals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--tol", action="append", type=_tol_override, metavar="KEY=VALUE",
                        help="override a tolerance (repeatable)")
        sp.add_argument("--report", metavar="FILE", help="also write the JSON report here")
        sp.add_argument("-q", "--quiet", action="store_true", help="do not print the report")

    sp = sub.add_parser("check-order", help="decide mu <= nu in convex order")
    sp.add_argument("instance")
    common(sp)
    sp.set_defaults(func=cmd_check_order)

    sp = sub.add_parser("decompose", help="irreducible components")
    sp.add_argument("instance")
    common(sp)
    sp.set_defaults(func=cmd_decompose)

    for name, func, helptext in (("solve", cmd_solve, "primal LP, dual construction and verification"),
                                 ("smooth", cmd_smooth, "Lipschitz post-processing with a convexifying u")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("instance")
        sp.add_argument("--out", metavar="FILE", help="write the solution (instance, triple, coupling)")
        sp.add_argument("--csv-out", metavar="DIR", help="write potentials.csv, dual.csv, coupling.csv")
        sp.add_argument("--exact", action="store_true", help="exact rational simplex")
        if name == "solve":
            sp.add_argument("--grid-refine", type=int, default=None, metavar="K")
        else:
            g = sp.add_mutually_exclusive_group(required=True)
            g.add_argument("--u", metavar="KNOTS", help="u as [[y, value], ...] inline or in a file")
            g.add_argument("--auto-u", action="store_true", help="u(y) = lam*y^2 from second differences of c")
        common(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("example", help="generate a counterexample family and run its diagnostic")
    sp.add_argument("name", choices=sorted(EXAMPLES))
    sp.add_argument("--N", type=int, default=None, help="truncation level (K for nonintegrable)")
    sp.add_argument("--levels", type=int, nargs="+", default=None)
    sp.add_argument("--r", type=float, default=1.5)
    sp.add_argument("--s", type=float, default=1.2)
    sp.add_argument("--emit", metavar="FILE", help="write the generated instance")
    common(sp)
    sp.set_defaults(func=cmd_example)

    sp = sub.add_parser("report", help="re-verify a saved solution")
    sp.add_argument("solution")
    common(sp)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, BadParameters, FileNotFoundError, ValueError) as exc:
        print(f"motdual: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (Infeasible, NotInConvexOrder) as exc:
        print(f"motdual: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except MOTError as exc:
        print(f"motdual: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
