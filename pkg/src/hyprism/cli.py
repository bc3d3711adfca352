"""Command-line interface.

Exit codes: 0 success, 1 parse/program/usage/learning errors, 2 derivation
failures (depth or count limit, cycles), 3 type errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import gallery
from .density import evaluate, log_evaluate
from .derivation import DEFAULT_MAX_DEPTH, DEFAULT_MAX_DERIVATIONS, Limits, derive
from .em import EMConfig, parse_csv_examples, parse_examples, train
from .errors import DerivationError, HyprismError, TypeConflictError
from .oracles.sampler import NonGenerativeError, sample_goals
from .parser import parse_program, parse_query, query_vars
from .program import DEFAULT_VARIANCE_FLOOR, REAL, DiscreteParams, Program, format_program, set_sw_lines
from .render import fmt, render_debug, render_success, success_json
from .success import goal_success, switches_used
from .terms import format_term

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DERIVATION = 2
EXIT_TYPE = 3


class UsageError(Exception):
    pass


def load_program(spec: str) -> Program:
    """``spec`` is a file path or ``gallery:<name>``."""
    if spec.startswith("gallery:"):
        try:
            return gallery.load(spec.split(":", 1)[1])
        except KeyError as e:
            raise UsageError(e.args[0]) from None
    try:
        text = Path(spec).read_text()
    except OSError as e:
        raise UsageError(f"cannot read program {spec}: {e.strerror}") from None
    return parse_program(text)


def _limits(args) -> Limits:
    return Limits(args.max_depth, args.max_derivations)


def _valuation(query, at: list[str]) -> dict:
    by_name = {v.name: v for v in query_vars(query)}
    out = {}
    for item in at or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--at expects NAME=VALUE, got {item!r}")
        name = name.strip()
        if name not in by_name:
            raise UsageError(f"--at names {name}, which is not a query variable")
        try:
            out[by_name[name]] = float(value)
        except ValueError:
            raise UsageError(f"--at value for {name} is not a number: {value!r}") from None
    return out


def _psi(prog, text, limits):
    query = parse_query(text, prog)
    tree = derive(prog, query, limits)
    return query, tree, goal_success(tree)


def cmd_psi(prog: Program, query: str, limits: Limits | None = None, debug: bool = False, as_json: bool = False) -> str:
    q, _, psi = _psi(prog, query, limits)
    if as_json:
        return json.dumps({"query": format_term(q), "psi": success_json(psi), "text": render_success(psi)}, indent=2)
    return render_debug(psi) if debug else render_success(psi)


def cmd_density(
    prog: Program, query: str, at=None, limits: Limits | None = None, as_json: bool = False, discrete_only: bool = False
) -> str:
    q, tree, psi = _psi(prog, query, limits)
    if discrete_only:
        real = [sw for sw in switches_used(tree) if prog.domain_of(sw) == REAL]
        if real:
            raise TypeConflictError(
                f"query involves real-valued switch {format_term(real[0])}; use density instead of prob"
            )
    val = _valuation(q, at)
    missing = sorted(v.name for v in psi.vars - set(val))
    if missing:
        raise UsageError(f"query variables {', '.join(missing)} need values (--at NAME=VALUE)")
    value = float(evaluate(psi, val))
    if as_json:
        return json.dumps(
            {
                "query": format_term(q),
                "at": {v.name: x for v, x in val.items()},
                "value": value,
                "log_value": float(log_evaluate(psi, val)),
                "psi": success_json(psi),
            },
            indent=2,
        )
    return fmt(value)


def _theta_json(theta, prog: Program) -> list[dict]:
    out = []
    for sw, p in theta.items():
        if isinstance(p, DiscreteParams):
            dom = prog.domain_of(sw)
            out.append(
                {"switch": format_term(sw), "values": [format_term(v) for v in dom], "probs": list(p.probs)}
            )
        else:
            out.append({"switch": format_term(sw), "mean": p.mean, "var": p.var})
    return out


def cmd_learn(prog: Program, data_text: str, config: EMConfig, goal: str | None = None, as_json: bool = False):
    """Returns ``(output, EMResult)``."""
    if goal:
        examples = parse_csv_examples(data_text, goal, prog)
    else:
        examples = parse_examples(data_text, prog)
    res = train(prog, examples, config)
    if as_json:
        doc = {
            "theta": _theta_json(res.theta, prog),
            "log_likelihood": res.log_likelihood,
            "initial_log_likelihood": res.initial_log_likelihood,
            "history": res.history,
            "iterations": res.iterations,
            "converged": res.converged,
            "last_delta": res.last_delta,
            "restart": res.restart,
            "warnings": res.warnings,
        }
        return json.dumps(doc, indent=2), res
    lines = [f"% iteration 0: log-likelihood {fmt(res.initial_log_likelihood)}"]
    lines += [f"% iteration {i}: log-likelihood {fmt(ll)}" for i, ll in enumerate(res.history, 1)]
    if res.converged:
        lines.append(f"% converged after {res.iterations} iterations")
    elif config.max_iters > 0:
        lines.append(
            f"% not converged after {res.iterations} iterations; last delta {fmt(res.last_delta)}"
        )
    lines += set_sw_lines(res.theta)
    return "\n".join(lines), res


def cmd_sample(prog: Program, query: str, n: int, seed: int) -> str:
    q = parse_query(query, prog)
    goals = sample_goals(prog, q, n, seed)
    return "".join(f"{format_term(g)}.\n" for g in goals)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyprism", description="Symbolic inference and EM for hybrid probabilistic logic programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, query=True):
        p.add_argument("-p", "--program", required=True, help="program file, or gallery:<name>")
        if query:
            p.add_argument("-q", "--query", required=True, help="query goal, e.g. 'fmix(X)'")
        p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)
        p.add_argument("--max-derivations", type=int, default=DEFAULT_MAX_DERIVATIONS)
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("psi", help="print the success function of a query")
    common(p)
    p.add_argument("--debug", action="store_true", help="print the term-by-term debug form")

    for name, what in (("prob", "probability of a discrete query"), ("density", "density or probability of a query")):
        p = sub.add_parser(name, help=what)
        common(p)
        p.add_argument("--at", action="append", metavar="NAME=VALUE", help="value of a free query variable")

    p = sub.add_parser("learn", help="fit switch parameters by EM")
    common(p, query=False)
    p.add_argument("-d", "--data", required=True, help="training data file ('-' for stdin)")
    p.add_argument("--goal", help="goal template for CSV data, e.g. 'fmix($1)'")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--ll-tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--variance-floor", type=float, default=DEFAULT_VARIANCE_FLOOR)
    p.add_argument("--smoothing", type=float, default=0.0, help="added to every discrete expected count")
    p.add_argument("--randomize", action="store_true", help="ignore set_sw values when initializing")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-o", "--output", help="write the program with learned parameters here")

    p = sub.add_parser("sample", help="forward-sample ground goals")
    common(p)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="output file (default stdout)")
    return ap


def _run(args) -> str:
    prog = load_program(args.program)
    as_json = args.format == "json"
    limits = _limits(args)
    if args.command == "psi":
        return cmd_psi(prog, args.query, limits, args.debug, as_json)
    if args.command in ("prob", "density"):
        return cmd_density(prog, args.query, args.at, limits, as_json, args.command == "prob")
    if args.command == "learn":
        if args.data == "-":
            data = sys.stdin.read()
        else:
            try:
                data = Path(args.data).read_text()
            except OSError as e:
                raise UsageError(f"cannot read data {args.data}: {e.strerror}") from None
        config = EMConfig(
            max_iters=args.max_iters,
            ll_tol=args.ll_tol,
            seed=args.seed,
            variance_floor=args.variance_floor,
            smoothing=args.smoothing,
            restarts=args.restarts,
            randomize=args.randomize,
            threads=args.threads,
            limits=limits,
        )
        out, res = cmd_learn(prog, data, config, args.goal, as_json)
        for w in res.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if args.output:
            Path(args.output).write_text(format_program(prog, res.theta))
        return out
    if args.command == "sample":
        if args.n < 0:
            raise UsageError("-n must be >= 0")
        text = cmd_sample(prog, args.query, args.n, args.seed)
        if args.output:
            Path(args.output).write_text(text)
            return ""
        return text.rstrip("\n")
    raise UsageError(f"unknown command {args.command}")


def exit_code(err: BaseException) -> int:
    if isinstance(err, TypeConflictError):
        return EXIT_TYPE
    if isinstance(err, DerivationError) and not isinstance(err, NonGenerativeError):
        return EXIT_DERIVATION
    return EXIT_INPUT


RECURSION_LIMIT = 20_000


def main(argv=None) -> int:
    # Term nesting depth (e.g. list length) is bounded by the recursion limit.
    sys.setrecursionlimit(max(sys.getrecursionlimit(), RECURSION_LIMIT))
    logging.basicConfig(level=logging.ERROR, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        out = _run(args)
    except (HyprismError, UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)
    except RecursionError:
        print("error: derivation too deep for the host stack", file=sys.stderr)
        return EXIT_DERIVATION
    if out:
        print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
