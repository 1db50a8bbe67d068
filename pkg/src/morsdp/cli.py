"""Command-line front end.

Exit codes: 0 success, 2 invalid model or arguments, 3 budget exceeded,
1 internal inconsistency or numerical failure (including a failed
``bandit --check``).  Errors go to standard error as ``code: <code>: <message>``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__, bandit, bellman, kernels, oracle, pomdp_reduce
from .augment import DEFAULT_BUDGET, layer_sizes_csv
from .core.io import load_model
from .core.model import FiniteMDP, POMDPModel
from .errors import BudgetError, InconsistencyError, ModelError, MorsdpError, NumericalError

EXIT_OK, EXIT_INTERNAL, EXIT_MODEL, EXIT_BUDGET = 0, 1, 2, 3


class CheckFailed(InconsistencyError):
    code = "check-failed"


def _add_common(p, horizon=False, tol=False):
    p.add_argument("model", help="model document (JSON)")
    if horizon:
        p.add_argument("--horizon", "-n", type=int, required=True, help="number of stages N >= 1")
    if tol:
        p.add_argument("--tol", type=float, default=1e-6, help="bracket width to stop at (default 1e-6)")
    p.add_argument("--out", help="write the result here instead of standard output")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for the backups (default: MORSDP_THREADS or all cores)")
    p.add_argument("--budget-states", type=int, default=DEFAULT_BUDGET,
                   help=f"largest allowed layer / information-state count (default {DEFAULT_BUDGET})")


def _add_pomdp(p):
    p.add_argument("--theta0", help="initial hidden-state distribution, comma separated (default uniform)")
    p.add_argument("--y0", help="initial observation label (default: the first one)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morsdp", description="Multi-objective risk-sensitive MDP solver.")
    ap.add_argument("--version", action="version", version=f"morsdp {__version__}")
    ap.add_argument("--verbose", "-v", action="store_true", help="log progress to standard error")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("solve", help="finite-horizon optimum of an mdp document")
    _add_common(p, horizon=True)
    p.add_argument("--x0", help="start state label (default: the first state)")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="json: value and policy; csv: all value tables")
    p.add_argument("--dump-layers", metavar="PATH", help="write reachable layer sizes as CSV")

    p = sub.add_parser("solve-inf", help="infinite-horizon discounted bracket of an mdp document")
    _add_common(p, tol=True)
    p.add_argument("--x0", help="start state label (default: the first state)")
    p.add_argument("--max-iter", type=int, default=500, help="iteration cap (default 500)")
    p.add_argument("--dump-layers", metavar="PATH", help="write reachable layer sizes as CSV")

    p = sub.add_parser("solve-pomdp", help="finite-horizon optimum of a pomdp document")
    _add_common(p, horizon=True)
    _add_pomdp(p)
    p.add_argument("--no-shift", action="store_true", help="skip the positive cost shift")
    p.add_argument("--dump-layers", metavar="PATH", help="write reachable layer sizes as CSV")

    p = sub.add_parser("reduce", help="dump the information MDP of a pomdp document (inspection only)")
    _add_common(p, horizon=True)
    _add_pomdp(p)

    p = sub.add_parser("oracle", help="exact optimum by exhaustive policy enumeration")
    _add_common(p, horizon=True)
    _add_pomdp(p)
    p.add_argument("--x0", help="start state label for mdp documents")
    p.add_argument("--exact", action="store_true", help="accepted for symmetry; enumeration is always exact")
    p.add_argument("--budget-atoms", type=int, default=oracle.DEFAULT_ATOMS,
                   help=f"largest allowed number of path atoms (default {oracle.DEFAULT_ATOMS})")
    p.add_argument("--budget-policies", type=int, default=oracle.DEFAULT_POLICIES,
                   help=f"largest allowed number of enumerated policies (default {oracle.DEFAULT_POLICIES})")

    p = sub.add_parser("bandit", help="two-armed investment bandit")
    p.add_argument("--mu", type=float, default=1.0, help="silver weight in U(g,s) = g^2 + mu*s, in (0, 2]")
    p.add_argument("--horizon", "-n", type=int, default=2, help="number of periods (default 2)")
    p.add_argument("--grid", type=int, default=5, help="number of action grid points (default 5)")
    p.add_argument("--check", action="store_true", help="compare with the closed form; exit 1 on mismatch")
    p.add_argument("--export", metavar="PATH", help="also write the discretized model document")
    p.add_argument("--out", help="write the result here instead of standard output")
    p.add_argument("--threads", type=int, default=None, help="worker threads for the backups")

    p = sub.add_parser("validate", help="parse and validate a model document")
    p.add_argument("model", help="model document (JSON)")
    p.add_argument("--out", help="write the summary here instead of standard output")
    return ap


def _threads(args):
    return kernels.default_threads() if getattr(args, "threads", None) is None else max(1, args.threads)


def _emit(args, text):
    if not text.endswith("\n"):
        text += "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=1, allow_nan=False)


def _dump_layers(args, layers):
    if getattr(args, "dump_layers", None):
        with open(args.dump_layers, "w", encoding="utf-8") as fh:
            fh.write(layer_sizes_csv(layers))


def _load(args, kind):
    m = load_model(args.model)
    want = FiniteMDP if kind == "mdp" else POMDPModel
    if not isinstance(m, want):
        raise ModelError(f"this command needs a {kind} document")
    return m


def _horizon(args):
    if args.horizon < 1:
        raise ModelError("--horizon must be at least 1")
    return args.horizon


def _theta0(args, p):
    if args.theta0 is None:
        return np.full(len(p.hidden_states), 1.0 / len(p.hidden_states))
    try:
        return np.array([float(v) for v in args.theta0.split(",")])
    except ValueError:
        raise ModelError(f"cannot parse --theta0 {args.theta0!r}") from None


def cmd_solve(args):
    m = _load(args, "mdp")
    x0 = args.x0 if args.x0 is not None else 0
    sol = bellman.solve_finite(m, None, None, _horizon(args), x0, budget=args.budget_states,
                               threads=_threads(args))
    _dump_layers(args, sol.layers)
    _emit(args, sol.tables_csv() if args.format == "csv" else _json(sol.to_json_dict()))


def cmd_solve_inf(args):
    m = _load(args, "mdp")
    if not args.tol > 0:
        raise ModelError("--tol must be positive")
    x0 = args.x0 if args.x0 is not None else 0
    sol = bellman.solve_infinite(m, None, None, x0, args.tol, args.max_iter, args.budget_states,
                                 _threads(args))
    _dump_layers(args, sol.layers)
    _emit(args, _json(sol.to_json_dict()))


def cmd_solve_pomdp(args):
    p = _load(args, "pomdp")
    sol = pomdp_reduce.solve_rspomdp(p, _theta0(args, p), _horizon(args), args.y0,
                                     shift=not args.no_shift, budget=args.budget_states,
                                     threads=_threads(args))
    _dump_layers(args, sol.solution.layers)
    _emit(args, _json(sol.to_json_dict()))


def cmd_reduce(args):
    p = _load(args, "pomdp")
    info = pomdp_reduce.information_mdp(p, _theta0(args, p), _horizon(args), args.y0, args.budget_states)
    _emit(args, _json(info.to_document()))


def cmd_oracle(args):
    m = load_model(args.model)
    N = _horizon(args)
    if isinstance(m, POMDPModel):
        theta0 = _theta0(args, m)
        value, pol = oracle.enumerate_pomdp_policies(m, theta0, N, args.budget_policies, args.budget_atoms)
        ev = oracle.enumerate_pomdp(m, theta0, pol, N, args.budget_atoms)
        doc = {"value": value, "atoms": ev.atoms, "policy": pol.entries()}
    else:
        x0 = args.x0 if args.x0 is not None else 0
        history = oracle.enumerate_mdp_policies(m, None, None, x0, N, "history", args.budget_policies)
        markov = oracle.enumerate_mdp_policies(m, None, None, x0, N, "markov", args.budget_policies)
        doc = {"value": history, "value_markov": markov,
               "atoms": oracle.count_mdp_paths(m, x0, N, args.budget_atoms)}
    _emit(args, _json(doc))


def cmd_bandit(args):
    if args.horizon < 1:
        raise ModelError("--horizon must be at least 1")
    try:
        params = bandit.BanditParams(args.mu, args.grid)
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    m = bandit.as_mdp(params)
    if args.export:
        from .core.io import dump_model
        with open(args.export, "w", encoding="utf-8") as fh:
            fh.write(dump_model(m) + "\n")
    sol = bellman.solve_finite(m, None, None, args.horizon, "00", threads=_threads(args))
    exact = bandit.analytic_value(args.horizon, 0.0, 0.0, args.mu)
    doc = {"value": sol.value, "analytic": exact, "mu": args.mu, "horizon": args.horizon,
           "grid": [float(a) for a in params.grid]}
    _emit(args, _json(doc))
    if args.check and not abs(sol.value - exact) <= 1e-10:
        raise CheckFailed(f"solver value {sol.value!r} differs from the closed form {exact!r}")


def cmd_validate(args):
    m = load_model(args.model)
    if isinstance(m, POMDPModel):
        doc = {"kind": "pomdp", "hidden_states": len(m.hidden_states),
               "observations": len(m.observations), "actions": len(m.actions), "terms": m.n_terms}
    else:
        doc = {"kind": "mdp", "states": len(m.states), "actions": len(m.actions),
               "objectives": m.n_objectives, "discounted": m.discount.discounted,
               "finite_horizon_only": bool(m.allow_zero_cost)}
    _emit(args, _json(doc))


COMMANDS = {
    "solve": cmd_solve, "solve-inf": cmd_solve_inf, "solve-pomdp": cmd_solve_pomdp,
    "reduce": cmd_reduce, "oracle": cmd_oracle, "bandit": cmd_bandit, "validate": cmd_validate,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ModelError as exc:
        return _fail(exc.code, exc, EXIT_MODEL)
    except BudgetError as exc:
        return _fail(exc.code, exc, EXIT_BUDGET)
    except (InconsistencyError, NumericalError) as exc:
        return _fail(exc.code, exc, EXIT_INTERNAL)
    except MorsdpError as exc:
        return _fail(exc.code, exc, EXIT_INTERNAL)
    except OSError as exc:
        return _fail("io-error", exc, EXIT_MODEL)
    except OverflowError as exc:
        return _fail("numerical-failure", exc, EXIT_INTERNAL)
    except ValueError as exc:
        return _fail("invalid-argument", exc, EXIT_MODEL)
    return EXIT_OK


def _fail(code, exc, status):
    print(f"code: {code}: {exc}", file=sys.stderr)
    return status


def main():
    sys.exit(run())
