"""Forward sampling of generative programs and kernel density estimates.

Goals are run left to right like Prolog.  Each ``msw`` draws its outcome
from the current parameters; a linear constraint with exactly one unknown is
solved for it, and a fully known one is checked.  A run that fails is
restarted from scratch (rejection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import HyprismError
from ..program import REAL, Call, DiscreteParams, GaussianParams, LinearConstraint, Msw, Program
from ..terms import Num, Term, Var, format_term, is_ground, resolve, term_vars, unify

_TOL = 1e-9


class NonGenerativeError(HyprismError):
    """The program cannot be run forwards from the given query."""


@dataclass(frozen=True)
class SampleEstimate:
    estimate: float
    stderr: float
    n: int


def _rename(clause):
    mapping = {v: Var(v.name) for v in clause.vars()}
    return resolve(clause.head, mapping), [b.resolve(mapping) for b in clause.body]


class _Failed(Exception):
    pass


def _switch_info(prog: Program, sw: Term, cache: dict):
    info = cache.get(sw)
    if info is None:
        p = prog.theta.lookup(sw)
        if p is None:
            raise NonGenerativeError(f"no parameters for {format_term(sw)}")
        info = cache[sw] = (prog.domain_of(sw), p)
    return info


def _draw(prog: Program, sw: Term, rng: np.random.Generator, cache: dict) -> Term:
    dom, p = _switch_info(prog, sw, cache)
    if dom == REAL:
        assert isinstance(p, GaussianParams)
        return Num(float(rng.normal(p.mean, math.sqrt(p.var))))
    assert isinstance(p, DiscreteParams)
    cum = np.cumsum(p.probs)
    i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return dom[min(i, len(dom) - 1)]


def _constraint(c: LinearConstraint, s: dict) -> dict:
    coefs, const = c.equation()
    unknown = {}
    for v, a in coefs.items():
        t = resolve(v, s)
        if isinstance(t, Var):
            unknown[t] = unknown.get(t, 0.0) + a
        elif isinstance(t, Num):
            const += a * t.value
        else:
            raise _Failed()
    unknown = {v: a for v, a in unknown.items() if a != 0.0}
    if not unknown:
        if abs(const) > _TOL:
            raise _Failed()
        return s
    if len(unknown) > 1:
        raise NonGenerativeError(f"constraint {c} has more than one unknown when reached")
    (v, a), = unknown.items()
    out = dict(s)
    out[v] = Num(-const / a)
    return out


def _run(prog: Program, goals: list, s: dict, rng, cache: dict):
    # Depth-first with clause backtracking; msw draws are not revisited.
    while goals:
        g, goals = goals[0], goals[1:]
        if isinstance(g, Msw):
            sw = resolve(g.switch, s)
            if not is_ground(sw):
                raise NonGenerativeError(f"switch {format_term(sw)} is not ground when reached")
            out = resolve(g.outcome, s)
            if not isinstance(out, Var) and _switch_info(prog, sw, cache)[0] == REAL:
                raise NonGenerativeError(f"outcome of real switch {format_term(sw)} is bound before drawing")
            s = unify(out, _draw(prog, sw, rng, cache), s)
            if s is None:
                raise _Failed()
        elif isinstance(g, LinearConstraint):
            s = _constraint(g, s)
        else:
            t = resolve(g.term, s)
            for clause in prog.clauses_for(g.key):
                head, body = _rename(clause)
                s1 = unify(t, head, s)
                if s1 is None:
                    continue
                try:
                    return _run(prog, body + goals, s1, rng, cache)
                except _Failed:
                    continue
            raise _Failed()
    return s


def sample_goals(prog: Program, query: Term, n: int, seed: int = 0, max_restarts: int = 1000) -> list[Term]:
    """``n`` forward samples of ``query`` with its variables instantiated."""
    rng = np.random.default_rng(seed)
    cache: dict = {}
    out = []
    for _ in range(n):
        for _attempt in range(max_restarts):
            try:
                s = _run(prog, [Call(query)], {}, rng, cache)
                break
            except _Failed:
                continue
        else:
            raise NonGenerativeError(f"no successful run of {format_term(query)} in {max_restarts} tries")
        out.append(resolve(query, s))
    return out


def mc_density(
    prog: Program,
    query: Term,
    point: dict,
    n: int = 100_000,
    seed: int = 0,
    bandwidth: float = 0.05,
) -> SampleEstimate:
    """Gaussian-kernel estimate of the density of ``query`` at ``point``
    (``{variable name: value}``) from ``n`` forward samples."""
    if n < 10_000:
        raise ValueError("mc_density needs at least 10^4 samples")
    names = list(point)
    qvars = {v.name: v for v in term_vars(query)}
    missing = [k for k in names if k not in qvars]
    if missing:
        raise ValueError(f"unknown query variables {missing}")
    samples = sample_goals(prog, query, n, seed)
    cols = []
    for name in names:
        v = qvars[name]
        col = []
        for sample in samples:
            t = _value_of(query, sample, v)
            col.append(t)
        cols.append(np.asarray(col))
    h2 = bandwidth * bandwidth
    logk = np.zeros(n)
    for name, col in zip(names, cols):
        logk += -0.5 * math.log(2 * math.pi * h2) - (col - point[name]) ** 2 / (2 * h2)
    k = np.exp(logk)
    return SampleEstimate(float(k.mean()), float(k.std(ddof=1) / math.sqrt(n)), n)


def _value_of(template: Term, sample: Term, v: Var) -> float:
    s = unify(template, sample)
    t = resolve(v, s)
    if not isinstance(t, Num):
        raise NonGenerativeError(f"variable {v.name} is not numeric in sample {format_term(sample)}")
    return t.value
