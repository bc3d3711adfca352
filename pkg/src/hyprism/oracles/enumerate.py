"""Exhaustive PRISM-style proof enumeration for discrete programs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from ..errors import ProgramError
from ..program import REAL, Call, DiscreteParams, LinearConstraint, Msw, ParameterSet, Program
from ..terms import Term, Var, format_term, is_ground, resolve, unify


@dataclass(frozen=True)
class EnumeratedProof:
    """Switch choices of one proof: ``(switch, instance, value)`` triples."""

    choices: tuple
    prob: float

    def count(self, switch: Term, value: Term) -> int:
        return sum(1 for s, _, v in self.choices if s == switch and v == value)


def _rename(clause):
    mapping = {v: Var(v.name) for v in clause.vars()}
    return resolve(clause.head, mapping), [b.resolve(mapping) for b in clause.body]


def _probs(prog: Program, theta: ParameterSet, sw: Term):
    dom = prog.domain_of(sw)
    if dom == REAL:
        raise ProgramError(f"enumeration needs discrete switches; {format_term(sw)} is real-valued")
    p = theta.lookup(sw)
    if not isinstance(p, DiscreteParams):
        raise ProgramError(f"no probability vector for {format_term(sw)}")
    return dom, p.probs


def _solve(prog, theta, goals, s, choices, prob) -> Iterator[tuple]:
    if not goals:
        yield s, choices, prob
        return
    g, rest = goals[0], goals[1:]
    if isinstance(g, LinearConstraint):
        raise ProgramError("enumeration does not support linear constraints")
    if isinstance(g, Msw):
        sw = resolve(g.switch, s)
        inst = None if g.instance is None else resolve(g.instance, s)
        if not is_ground(sw):
            cands = [c for c in prog.declared_instances(sw) if unify(c, sw, s) is not None]
        else:
            cands = [sw]
        for c in cands:
            s1 = unify(sw, c, s)
            dom, probs = _probs(prog, theta, c)
            for v, p in zip(dom, probs):
                if p <= 0.0:
                    continue
                s2 = unify(g.outcome, v, s1)
                if s2 is None:
                    continue
                yield from _solve(prog, theta, rest, s2, choices + ((c, inst, v),), prob * p)
        return
    assert isinstance(g, Call)
    t = resolve(g.term, s)
    for clause in prog.clauses_for(g.key):
        head, body = _rename(clause)
        s1 = unify(t, head, s)
        if s1 is not None:
            yield from _solve(prog, theta, body + rest, s1, choices, prob)


def enumerate_proofs(prog: Program, query: Term, theta: ParameterSet | None = None) -> list[EnumeratedProof]:
    theta = prog.theta if theta is None else theta
    out = []
    for _, choices, prob in _solve(prog, theta, [Call(query)], {}, (), 1.0):
        out.append(EnumeratedProof(choices, prob))
    return out


def enumerate_prob(prog: Program, query: Term, theta: ParameterSet | None = None) -> float:
    """Sum over all proofs of the product of choice probabilities."""
    return math.fsum(p.prob for p in enumerate_proofs(prog, query, theta))


def enumerate_ess(prog: Program, query: Term, theta: ParameterSet | None = None) -> dict:
    """``{(switch, value): sum_S P(S) * N_S(switch = value)}``."""
    acc: dict = {}
    for proof in enumerate_proofs(prog, query, theta):
        for sw, _, v in proof.choices:
            acc.setdefault((sw, v), []).append(proof.prob)
    return {k: math.fsum(v) for k, v in acc.items()}


def enumeration_em(prog: Program, examples, theta: ParameterSet | None = None, iters: int = 10) -> list:
    """Naive EM over enumerated proofs; returns the parameter set after each
    iteration."""
    theta = prog.theta if theta is None else theta
    out = []
    for _ in range(iters):
        eta: dict = {}
        for t in examples:
            proofs = enumerate_proofs(prog, t, theta)
            z = math.fsum(p.prob for p in proofs)
            if z <= 0.0:
                raise ProgramError(f"example {format_term(t)} has probability 0")
            for proof in proofs:
                for sw, _, v in proof.choices:
                    eta.setdefault(sw, {}).setdefault(v, []).append(proof.prob / z)
        changes = []
        for sw, counts in eta.items():
            dom = prog.domain_of(sw)
            totals = [math.fsum(counts.get(v, [])) for v in dom]
            n = math.fsum(totals)
            changes.append((sw, DiscreteParams(tuple(x / n for x in totals))))
        theta = theta.updated(changes)
        out.append(theta)
    return out
