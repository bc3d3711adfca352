"""Tokenizer and recursive-descent parser for extended PRISM programs."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError, ProgramError
from .program import (
    REAL,
    Call,
    Clause,
    DiscreteParams,
    GaussianParams,
    LinearConstraint,
    Msw,
    ParameterSet,
    Program,
    SwitchDecl,
    predicate_key,
)
from .terms import NIL, Atom, Num, Struct, Term, Var, format_term, is_ground, make_list, term_vars

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*|/\*.*?\*/)
  | (?P<num>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<atom>[a-z][A-Za-z0-9_]*)
  | (?P<qatom>'(?:[^'\\]|\\.)*')
  | (?P<punct>:-|[()\[\],|.=+\-*/])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "qatom":
                kind, s = "atom", s[1:-1].replace("\\'", "'")
            tokens.append(Token(kind, s, line, m.start() - line_start + 1))
        nl = s.count("\n") if kind == "ws" else 0
        if nl:
            line += nl
            line_start = m.start() + s.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# Arithmetic expression nodes inside clause bodies.
@dataclass(frozen=True)
class _Leaf:
    term: Term


@dataclass(frozen=True)
class _Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class _Neg:
    arg: object


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.scope: dict[str, Var] = {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("punct",) and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    # expressions
    def expr(self):
        node = self.addend()
        while self.tok.kind == "punct" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = _Bin(op, node, self.addend())
        return node

    def addend(self):
        node = self.unary()
        while self.tok.kind == "punct" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = _Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            arg = self.unary()
            if isinstance(arg, _Leaf) and isinstance(arg.term, Num):
                n = arg.term
                text = n.text[1:] if n.text.startswith("-") else "-" + n.text
                return _Leaf(Num(-n.value, text))
            return _Neg(arg)
        if self.accept("+"):
            return self.unary()
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return _Leaf(Num(float(tok.text), tok.text))
        if tok.kind == "var":
            self.i += 1
            return _Leaf(self.variable(tok.text))
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "atom":
            return _Leaf(self.compound())
        if tok.kind == "punct" and tok.text == "[":
            return _Leaf(self.list_term())
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    def variable(self, name: str) -> Var:
        if name == "_":
            return Var("_")
        if name not in self.scope:
            self.scope[name] = Var(name)
        return self.scope[name]

    def compound(self) -> Term:
        name = self.tok.text
        self.i += 1
        if not self.accept("("):
            return Atom(name)
        args = [self.term()]
        while self.accept(","):
            args.append(self.term())
        self.expect(")")
        return Struct(name, tuple(args))

    def list_term(self) -> Term:
        self.expect("[")
        if self.accept("]"):
            return NIL
        items = [self.term()]
        while self.accept(","):
            items.append(self.term())
        tail = self.term() if self.accept("|") else NIL
        self.expect("]")
        return make_list(items, tail)

    def term(self) -> Term:
        tok = self.tok
        node = self.expr()
        if not isinstance(node, _Leaf):
            raise self.error("arithmetic is only allowed in constraints", tok)
        return node.term

    # clauses
    def goal(self):
        tok = self.tok
        left = self.expr()
        if self.accept("="):
            right = self.expr()
            return self.constraint(left, right, tok)
        if not isinstance(left, _Leaf) or not isinstance(left.term, (Atom, Struct)):
            raise self.error("expected a goal", tok)
        t = left.term
        if t == Atom("true"):
            return None
        if isinstance(t, Struct) and t.functor == "msw" and t.arity in (2, 3):
            if t.arity == 2:
                return Msw(t.args[0], t.args[1])
            return Msw(t.args[0], t.args[2], t.args[1])
        return Call(t)

    def constraint(self, left, right, tok) -> LinearConstraint:
        lc, lk = self.linear(left, tok)
        rc, rk = self.linear(right, tok)
        coefs = dict(lc)
        for v, a in rc.items():
            coefs[v] = coefs.get(v, 0.0) - a
        prefer = left.term if isinstance(left, _Leaf) and isinstance(left.term, Var) else None
        if prefer is None:
            prefer = next(iter(lc), None)
        return LinearConstraint.from_equation(coefs, lk - rk, prefer)

    def linear(self, node, tok) -> tuple[dict, float]:
        if isinstance(node, _Leaf):
            t = node.term
            if isinstance(t, Var):
                return {t: 1.0}, 0.0
            if isinstance(t, Num):
                return {}, t.value
            raise self.error(f"non-numeric term {format_term(t)} in constraint", tok)
        if isinstance(node, _Neg):
            c, k = self.linear(node.arg, tok)
            return {v: -a for v, a in c.items()}, -k
        lc, lk = self.linear(node.left, tok)
        rc, rk = self.linear(node.right, tok)
        if node.op in "+-":
            sign = 1.0 if node.op == "+" else -1.0
            out = dict(lc)
            for v, a in rc.items():
                out[v] = out.get(v, 0.0) + sign * a
            return out, lk + sign * rk
        if node.op == "*":
            if lc and rc:
                raise self.error("nonlinear term in constraint", tok)
            if lc:
                return {v: a * rk for v, a in lc.items()}, lk * rk
            return {v: a * lk for v, a in rc.items()}, lk * rk
        if rc:
            raise self.error("division by a variable in constraint", tok)
        if rk == 0.0:
            raise self.error("division by zero in constraint", tok)
        return {v: a / rk for v, a in lc.items()}, lk / rk

    def statement(self):
        """One clause or directive; returns ('clause'|'directive', payload)."""
        self.scope = {}
        if self.accept(":-"):
            items = [self.term()]
            while self.accept(","):
                items.append(self.term())
            self.expect(".")
            return "directive", items
        tok = self.tok
        head = self.term()
        if not isinstance(head, (Atom, Struct)):
            raise self.error("clause head must be an atom or compound term", tok)
        body = []
        if self.accept(":-"):
            g = self.goal()
            if g is not None:
                body.append(g)
            while self.accept(","):
                g = self.goal()
                if g is not None:
                    body.append(g)
        self.expect(".")
        return "clause", (Clause(head, tuple(body)), tok)

    def statements(self):
        while self.tok.kind != "eof":
            yield self.statement()


def _number(t: Term, what: str) -> float:
    if not isinstance(t, Num):
        raise ProgramError(f"{what} must be a number, got {format_term(t)}")
    return t.value


def _list_items(t: Term, what: str) -> list[Term]:
    items = []
    while isinstance(t, Struct) and t.functor == "." and t.arity == 2:
        items.append(t.args[0])
        t = t.args[1]
    if t != NIL:
        raise ProgramError(f"{what} must be a proper list")
    return items


def _set_sw(t: Term, prog_decls):
    if not (isinstance(t, Struct) and t.functor == "set_sw" and t.arity == 2):
        raise ProgramError(f"unsupported directive {format_term(t)}")
    sw, spec = t.args
    decls = [d for d in prog_decls if _unifies(d.pattern, sw)]
    if not decls:
        raise ProgramError(f"set_sw for undeclared switch {format_term(sw)}")
    exact = [d for d in decls if d.pattern == sw]
    domain = (exact or decls)[0].domain
    if isinstance(spec, Struct) and spec.functor == "norm" and spec.arity == 2:
        if domain != REAL:
            raise ProgramError(f"Gaussian parameters for finite switch {format_term(sw)}")
        params = GaussianParams(_number(spec.args[0], "mean"), _number(spec.args[1], "variance"))
    else:
        if domain == REAL:
            raise ProgramError(f"probability vector for real-valued switch {format_term(sw)}")
        probs = tuple(_number(p, "probability") for p in _list_items(spec, "set_sw vector"))
        params = DiscreteParams(probs)
    return sw, params


def _unifies(a, b) -> bool:
    from .terms import unify

    return unify(a, b) is not None


def _values_decl(clause: Clause) -> SwitchDecl:
    sw, dom = clause.head.args
    predicate_key(sw)
    if dom == Atom(REAL):
        return SwitchDecl(sw, REAL)
    items = _list_items(dom, "values domain")
    for v in items:
        if not is_ground(v):
            raise ProgramError(f"non-ground value {format_term(v)} in domain of {format_term(sw)}")
    if not items:
        raise ProgramError(f"empty domain for {format_term(sw)}")
    return SwitchDecl(sw, tuple(items))


def _check_body(clause: Clause, families, defined, line):
    for item in clause.body:
        if isinstance(item, Msw):
            try:
                fam = item.family
            except ProgramError:
                raise ParseError(f"bad switch term {format_term(item.switch)}", line)
            if fam not in families:
                raise ProgramError(
                    f"msw on undeclared switch {format_term(item.switch)} (line {line})"
                )
        elif isinstance(item, Call):
            if item.key not in defined:
                name, arity = item.key
                raise ProgramError(f"call to undefined predicate {name}/{arity} (line {line})")


def parse_program(text: str) -> Program:
    """Parse program text.

    Variables are standardized apart: every clause gets its own ``Var``
    objects with globally unique ids.
    """
    p = _Parser(text)
    clauses: list[tuple[Clause, Token]] = []
    decls: list[SwitchDecl] = []
    directives = []
    for kind, payload in p.statements():
        if kind == "directive":
            directives.extend(payload)
            continue
        clause, tok = payload
        if clause.key == ("values", 2) and not clause.body:
            decls.append(_values_decl(clause))
        else:
            clauses.append((clause, tok))
    families = {d.family for d in decls}
    defined = {c.key for c, _ in clauses}
    for c, tok in clauses:
        _check_body(c, families, defined, tok.line)
    entries, patterns = {}, {}
    for d in directives:
        sw, params = _set_sw(d, decls)
        target = entries if is_ground(sw) else patterns
        target[sw] = params
    theta = ParameterSet(tuple(entries.items()), tuple(patterns.items()))
    return Program([c for c, _ in clauses], decls, theta)


def parse_term(text: str, scope: dict[str, Var] | None = None) -> Term:
    """Parse a single term, optionally terminated by ``.``."""
    p = _Parser(text)
    if scope is not None:
        p.scope = scope
    t = p.term()
    p.accept(".")
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return t


def parse_query(text: str, prog: Program | None = None) -> Term:
    """Parse a query goal and check it calls a defined predicate."""
    t = parse_term(text)
    if not isinstance(t, (Atom, Struct)):
        raise ProgramError(f"query must be a predicate call, got {format_term(t)}")
    if prog is not None and not prog.defines(predicate_key(t)):
        name, arity = predicate_key(t)
        raise ProgramError(f"query calls undefined predicate {name}/{arity}")
    return t


def query_vars(t: Term) -> list[Var]:
    seen = []
    for v in term_vars(t):
        if v not in seen and v.name != "_":
            seen.append(v)
    return seen
