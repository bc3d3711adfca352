"""Program model: clauses, switch declarations and distribution parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .errors import ProgramError, TypeConflictError
from .terms import (
    Atom,
    Num,
    Struct,
    Term,
    Var,
    format_float,
    format_term,
    is_ground,
    resolve,
    term_vars,
    unify,
)

REAL = "real"
DEFAULT_VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class Call:
    """A call to a user-defined predicate."""

    term: Term

    @property
    def key(self) -> tuple[str, int]:
        return predicate_key(self.term)

    def resolve(self, s) -> "Call":
        return Call(resolve(self.term, s))

    def vars(self) -> Iterator[Var]:
        return term_vars(self.term)

    def __str__(self) -> str:
        return format_term(self.term)


@dataclass(frozen=True)
class Msw:
    switch: Term
    outcome: Term
    instance: Term | None = None

    def resolve(self, s) -> "Msw":
        inst = None if self.instance is None else resolve(self.instance, s)
        return Msw(resolve(self.switch, s), resolve(self.outcome, s), inst)

    def vars(self) -> Iterator[Var]:
        yield from term_vars(self.switch)
        if self.instance is not None:
            yield from term_vars(self.instance)
        yield from term_vars(self.outcome)

    @property
    def family(self) -> tuple[str, int]:
        return predicate_key(self.switch)

    def __str__(self) -> str:
        if self.instance is None:
            return f"msw({format_term(self.switch)}, {format_term(self.outcome)})"
        return (
            f"msw({format_term(self.switch)}, {format_term(self.instance)}, "
            f"{format_term(self.outcome)})"
        )


@dataclass(frozen=True)
class LinearConstraint:
    """``lhs = sum(a_i * X_i) + intercept``.

    ``lhs`` is ``None`` only for ground checks (``0 = intercept``).
    """

    lhs: Var | None
    coeffs: tuple[tuple[Var, float], ...]
    intercept: float

    @classmethod
    def from_equation(cls, coefs: dict, const: float, prefer: Var | None = None):
        """Build from ``sum(coefs[v] * v) + const = 0``."""
        coefs = {v: c for v, c in coefs.items() if c != 0.0}
        for v, c in coefs.items():
            if not math.isfinite(c):
                raise ProgramError(f"non-finite coefficient for {v.name}")
        if not math.isfinite(const):
            raise ProgramError("non-finite constant in constraint")
        if not coefs:
            return cls(None, (), -const)
        lhs = prefer if prefer in coefs else next(iter(coefs))
        c = coefs.pop(lhs)
        rest = tuple((v, -a / c) for v, a in coefs.items())
        return cls(lhs, rest, -const / c)

    def equation(self) -> tuple[dict, float]:
        """Return ``(coefs, const)`` with ``sum(coefs[v] * v) + const = 0``."""
        coefs: dict = {}
        for v, a in self.coeffs:
            coefs[v] = coefs.get(v, 0.0) + a
        if self.lhs is not None:
            coefs[self.lhs] = coefs.get(self.lhs, 0.0) - 1.0
        return coefs, self.intercept

    def resolve(self, s) -> "LinearConstraint":
        coefs, const = self.equation()
        out: dict = {}
        for v, a in coefs.items():
            t = resolve(v, s)
            if isinstance(t, Var):
                out[t] = out.get(t, 0.0) + a
            elif isinstance(t, Num):
                const += a * t.value
            else:
                raise TypeConflictError(
                    f"non-numeric term {format_term(t)} in linear constraint"
                )
        prefer = resolve(self.lhs, s) if self.lhs is not None else None
        return LinearConstraint.from_equation(
            out, const, prefer if isinstance(prefer, Var) else None
        )

    def vars(self) -> Iterator[Var]:
        if self.lhs is not None:
            yield self.lhs
        for v, _ in self.coeffs:
            yield v

    def is_ground(self) -> bool:
        return self.lhs is None

    def __str__(self) -> str:
        lhs = self.lhs.name if self.lhs is not None else "0"
        return f"{lhs} = {format_linear(self.coeffs, self.intercept)}"


BodyItem = Union[Call, Msw, LinearConstraint]


def format_linear(coeffs: Iterable[tuple[Var, float]], const: float) -> str:
    parts = []
    for v, a in coeffs:
        if a == 1.0:
            s = v.name
        elif a == -1.0:
            s = f"-{v.name}"
        else:
            s = f"{format_float(a)}*{v.name}"
        parts.append(s)
    if const != 0.0 or not parts:
        parts.append(format_float(const))
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def predicate_key(t: Term) -> tuple[str, int]:
    if isinstance(t, Atom):
        return (t.name, 0)
    if isinstance(t, Struct):
        return (t.functor, t.arity)
    raise ProgramError(f"not a callable term: {format_term(t)}")


@dataclass(frozen=True)
class Clause:
    head: Term
    body: tuple = ()

    @property
    def key(self) -> tuple[str, int]:
        return predicate_key(self.head)

    def vars(self) -> set[Var]:
        out = set(term_vars(self.head))
        for item in self.body:
            out.update(item.vars())
        return out

    def __str__(self) -> str:
        head = format_term(self.head)
        if not self.body:
            return f"{head}."
        body = ",\n    ".join(str(b) for b in self.body)
        return f"{head} :-\n    {body}."


@dataclass(frozen=True)
class SwitchDecl:
    """``values(pattern, domain)``; ``domain`` is a tuple of ground terms or REAL."""

    pattern: Term
    domain: tuple | str

    @property
    def family(self) -> tuple[str, int]:
        return predicate_key(self.pattern)

    @property
    def is_real(self) -> bool:
        return self.domain == REAL

    def __str__(self) -> str:
        dom = REAL if self.is_real else "[" + ", ".join(map(format_term, self.domain)) + "]"
        return f"values({format_term(self.pattern)}, {dom})."


@dataclass(frozen=True)
class DiscreteParams:
    probs: tuple[float, ...]

    def __str__(self) -> str:
        return "[" + ", ".join(format_float(p) for p in self.probs) + "]"


@dataclass(frozen=True)
class GaussianParams:
    mean: float
    var: float

    def __str__(self) -> str:
        return f"norm({format_float(self.mean)}, {format_float(self.var)})"


Params = Union[DiscreteParams, GaussianParams]


@dataclass(frozen=True)
class ParameterSet:
    """Distribution parameters per ground switch, plus family-wide defaults.

    Immutable: updates return a new set.
    """

    entries: tuple[tuple[Term, Params], ...] = ()
    patterns: tuple[tuple[Term, Params], ...] = ()
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._index.update(self.entries)

    def lookup(self, switch: Term) -> Params | None:
        p = self._index.get(switch)
        if p is not None:
            return p
        for pat, params in self.patterns:
            if unify(pat, switch) is not None:
                return params
        return None

    def __contains__(self, switch: Term) -> bool:
        return self.lookup(switch) is not None

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return list(self.entries)

    def updated(self, changes) -> "ParameterSet":
        merged = dict(self.entries)
        merged.update(dict(changes))
        return ParameterSet(tuple(merged.items()), self.patterns)


@dataclass
class Program:
    clauses: list[Clause] = field(default_factory=list)
    decls: list[SwitchDecl] = field(default_factory=list)
    theta: ParameterSet = field(default_factory=ParameterSet)

    def __post_init__(self):
        self._by_key: dict = {}
        for c in self.clauses:
            self._by_key.setdefault(c.key, []).append(c)

    def clauses_for(self, key: tuple[str, int]) -> list[Clause]:
        return self._by_key.get(key, [])

    def defines(self, key) -> bool:
        return key in self._by_key

    @property
    def families(self) -> set[tuple[str, int]]:
        return {d.family for d in self.decls}

    def matching_decls(self, switch: Term) -> list[SwitchDecl]:
        return [d for d in self.decls if unify(d.pattern, switch) is not None]

    def domain_of(self, switch: Term):
        """Domain (tuple of terms, or REAL) of a ground switch instance."""
        decls = self.matching_decls(switch)
        if not decls:
            raise ProgramError(f"undeclared switch {format_term(switch)}")
        for d in decls:
            if d.pattern == switch:
                return d.domain
        return decls[0].domain

    def declared_instances(self, switch: Term) -> list[Term]:
        """Ground instances unifying with ``switch`` named by declarations or
        parameter entries, in declaration order."""
        seen: list[Term] = []
        for d in self.decls:
            if is_ground(d.pattern) and unify(d.pattern, switch) is not None:
                if d.pattern not in seen:
                    seen.append(d.pattern)
        for s, _ in self.theta.entries:
            if unify(s, switch) is not None and s not in seen:
                seen.append(s)
        return seen

    def with_theta(self, theta: ParameterSet) -> "Program":
        return Program(list(self.clauses), list(self.decls), theta)


def set_sw_lines(theta: ParameterSet) -> list[str]:
    lines = [f":- set_sw({format_term(s)}, {p})." for s, p in theta.patterns]
    lines += [f":- set_sw({format_term(s)}, {p})." for s, p in theta.entries]
    return lines


def format_program(prog: Program, theta: ParameterSet | None = None) -> str:
    """Render ``prog`` as reparsable program text."""
    theta = prog.theta if theta is None else theta
    out = [str(c) for c in prog.clauses]
    out += [str(d) for d in prog.decls]
    out += set_sw_lines(theta)
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Violation:
    switch: Term
    message: str

    def __str__(self) -> str:
        return f"{format_term(self.switch)}: {self.message}"


def validate_parameters(
    prog: Program,
    theta: ParameterSet | None = None,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    require_complete: bool = False,
) -> list[Violation]:
    """Check every parameter entry against the declarations.

    With ``require_complete`` also report ground declared switches that have
    no parameters at all.
    """
    theta = prog.theta if theta is None else theta
    out: list[Violation] = []
    for s, p in list(theta.patterns) + list(theta.entries):
        decls = prog.matching_decls(s)
        if not decls:
            out.append(Violation(s, "no values declaration"))
            continue
        dom = decls[0].domain
        for d in decls:
            if d.pattern == s:
                dom = d.domain
        if isinstance(p, GaussianParams):
            if dom != REAL:
                out.append(Violation(s, "Gaussian parameters on a finite domain"))
            if not (math.isfinite(p.mean) and math.isfinite(p.var)):
                out.append(Violation(s, "non-finite Gaussian parameters"))
            elif p.var < variance_floor:
                out.append(Violation(s, f"variance {p.var} below floor {variance_floor}"))
        else:
            if dom == REAL:
                out.append(Violation(s, "probability vector on a real domain"))
                continue
            if len(p.probs) != len(dom):
                out.append(
                    Violation(s, f"{len(p.probs)} probabilities for {len(dom)} values")
                )
            if any(not (q >= 0.0) for q in p.probs):
                out.append(Violation(s, "negative probability"))
            total = math.fsum(p.probs)
            if abs(total - 1.0) > 1e-12:
                out.append(Violation(s, f"probabilities sum to {total!r}, not 1"))
    if require_complete:
        for d in prog.decls:
            if is_ground(d.pattern) and theta.lookup(d.pattern) is None:
                out.append(Violation(d.pattern, "no parameters"))
    return out
