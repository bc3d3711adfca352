"""Logic terms, substitutions and unification."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

_ids = itertools.count(1)


def fresh_id() -> int:
    return next(_ids)


@dataclass(frozen=True)
class Var:
    name: str
    id: int = field(default_factory=fresh_id)

    def __repr__(self) -> str:
        return self.name

    def __lt__(self, other: "Var") -> bool:
        return self.id < other.id


@dataclass(frozen=True)
class Atom:
    name: str

    def __repr__(self) -> str:
        return format_term(self)


@dataclass(frozen=True, eq=False)
class Num:
    """Numeric constant.  Equality is by value; ``text`` keeps the literal."""

    value: float
    text: str = ""

    def __post_init__(self):
        if not self.text:
            object.__setattr__(self, "text", format_float(self.value))

    def __eq__(self, other) -> bool:
        return isinstance(other, Num) and self.value == other.value

    def __hash__(self) -> int:
        return hash(("num", self.value))

    def __repr__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Struct:
    functor: str
    args: tuple
    ground: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        g = all(isinstance(a, (Atom, Num)) or (isinstance(a, Struct) and a.ground) for a in self.args)
        object.__setattr__(self, "ground", g)

    @property
    def arity(self) -> int:
        return len(self.args)

    def __repr__(self) -> str:
        return format_term(self)


Term = Union[Var, Atom, Num, Struct]

NIL = Atom("[]")


def make_list(items, tail: Term = NIL) -> Term:
    out = tail
    for item in reversed(list(items)):
        out = Struct(".", (item, out))
    return out


def format_float(x: float) -> str:
    """Shortest round-trip text for ``x``, always with a decimal point."""
    s = repr(float(x))
    if s in ("inf", "-inf", "nan"):
        return s
    return s


def _list_items(t: Term):
    items = []
    while isinstance(t, Struct) and t.functor == "." and t.arity == 2:
        items.append(t.args[0])
        t = t.args[1]
    return items, t


def _quote(name: str) -> str:
    if name == "[]" or (name[:1].islower() and name.replace("_", "a").isalnum()):
        return name
    return "'" + name.replace("'", "\\'") + "'"


def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Num):
        return t.text
    if isinstance(t, Atom):
        return _quote(t.name)
    if t.functor == "." and t.arity == 2:
        items, tail = _list_items(t)
        body = ", ".join(format_term(x) for x in items)
        if tail == NIL:
            return f"[{body}]"
        return f"[{body}|{format_term(tail)}]"
    return f"{_quote(t.functor)}({', '.join(format_term(a) for a in t.args)})"


def term_vars(t: Term) -> Iterator[Var]:
    """Variables of ``t`` in left-to-right order (with repeats)."""
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Struct) and not t.ground:
        for a in t.args:
            yield from term_vars(a)


def is_ground(t: Term) -> bool:
    return isinstance(t, (Atom, Num)) or (isinstance(t, Struct) and t.ground)


Subst = Mapping[Var, Term]


def walk(t: Term, s: Subst) -> Term:
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def resolve(t: Term, s: Subst) -> Term:
    """Apply ``s`` fully to ``t``.  Unchanged subterms are returned as the
    same objects."""
    if not s:
        return t
    t = walk(t, s)
    if isinstance(t, Struct) and t.ground:
        return t
    if isinstance(t, Struct):
        args = tuple(resolve(a, s) for a in t.args)
        if all(x is y for x, y in zip(args, t.args)):
            return t
        return Struct(t.functor, args)
    return t


def _occurs(v: Var, t: Term, s: Subst) -> bool:
    t = walk(t, s)
    if t == v:
        return True
    if isinstance(t, Struct) and not t.ground:
        return any(_occurs(v, a, s) for a in t.args)
    return False


def unify(a: Term, b: Term, s: dict | None = None) -> dict | None:
    """Most general unifier with occurs check, extending ``s``.

    When two variables meet, the younger one (larger id) is bound to the
    older one, so goal variables survive resolution against fresh clauses.
    Returns ``None`` on failure.
    """
    s = dict(s or {})
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = walk(x, s), walk(y, s)
        if x is y or x == y:
            continue
        if isinstance(x, Var) and isinstance(y, Var):
            if x.id < y.id:
                x, y = y, x
            s[x] = y
        elif isinstance(x, Var):
            if _occurs(x, y, s):
                return None
            s[x] = y
        elif isinstance(y, Var):
            if _occurs(y, x, s):
                return None
            s[y] = x
        elif isinstance(x, Struct) and isinstance(y, Struct):
            if x.functor != y.functor or x.arity != y.arity:
                return None
            stack.extend(zip(x.args, y.args))
        else:
            return None
    return s


def rename(t: Term, mapping: dict) -> Term:
    """Replace variables via ``mapping``; unmapped variables get fresh copies
    recorded in ``mapping``."""
    if isinstance(t, Var):
        if t not in mapping:
            mapping[t] = Var(t.name)
        return mapping[t]
    if isinstance(t, Struct):
        return Struct(t.functor, tuple(rename(a, mapping) for a in t.args))
    return t


def is_numeric(t: Term) -> bool:
    return isinstance(t, Num)
