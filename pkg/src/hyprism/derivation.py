"""Symbolic derivations.

A derivation tree is built by SLD resolution over user predicates.  ``msw``
atoms and linear constraints are not resolved; they are recorded as MSW and
CONS steps and later interpreted by the success-function algebra.

Nodes are whole goal sequences.  A goal that is a variant of an already
expanded goal becomes a ``ref`` node pointing at the earlier node together
with a variable renaming, so the tree is really a DAG and repeated
sub-derivations are shared.  Meeting a variant of a goal that is still
being expanded means the derivation cannot terminate and raises
:class:`CycleError`.
"""

from __future__ import annotations

import sys

from dataclasses import dataclass, field
from typing import Iterator

from .density import SAT_TOL, VarInfo
from .errors import CycleError, DerivationError, DerivationLimitError, TypeConflictError
from .program import REAL, Call, Clause, LinearConstraint, Msw, Program
from .terms import Atom, Num, Struct, Term, Var, format_term, is_ground, resolve, unify

DEFAULT_MAX_DEPTH = 10_000
DEFAULT_MAX_DERIVATIONS = 1_000_000


@dataclass(frozen=True)
class Limits:
    max_depth: int = DEFAULT_MAX_DEPTH
    max_derivations: int = DEFAULT_MAX_DERIVATIONS

    def __post_init__(self):
        if self.max_depth < 1 or self.max_derivations < 1:
            raise ValueError("derivation limits must be positive")


@dataclass(eq=False)
class Branch:
    """One PCR alternative: the clause used, the bindings its mgu gives to
    variables of the parent goal, and the derived goal."""

    clause: Clause
    bindings: tuple
    child: "Node" = None


@dataclass(eq=False)
class Node:
    goal: tuple
    kind: str = "pending"  # success | fail | pcr | msw | cons | ref
    branches: list = field(default_factory=list)
    item: object = None
    child: "Node" = None
    target: "Node" = None
    mapping: dict = None
    successes: int = 0

    @property
    def goal_vars(self) -> set[Var]:
        return goal_vars(self.goal)

    def __str__(self) -> str:
        return format_goal(self.goal)


def goal_vars(goal) -> set[Var]:
    out: set = set()
    for item in goal:
        out.update(item.vars())
    return out


def format_goal(goal) -> str:
    return ", ".join(str(g) for g in goal) if goal else "true"


# --------------------------------------------------------- canonical keys


class _Interner:
    """Small integer ids for ground subterms, memoized by object identity.

    Goals along a derivation share their ground subterms (list suffixes in
    particular), so each one is keyed once instead of once per node."""

    def __init__(self):
        self.by_obj: dict = {}  # id(term) -> (term, key); holding term keeps the id valid
        self.ids: dict = {}

    def ground(self, x, args_key):
        k = ("s", x.functor, args_key)
        i = self.ids.get(k)
        if i is None:
            i = self.ids[k] = ("g", len(self.ids))
        self.by_obj[id(x)] = (x, i)
        return i


def _canon(goal, interner: _Interner | None = None):
    """Variant-invariant key of ``goal`` plus its variables in canonical
    order."""
    interner = interner or _Interner()
    memo = interner.by_obj
    idx: dict = {}
    order: list = []

    def t(x):
        # Returns (key, ground).
        if isinstance(x, Var):
            if x not in idx:
                idx[x] = len(idx)
                order.append(x)
            return ("v", idx[x]), False
        if isinstance(x, Num):
            return ("n", x.value), True
        if isinstance(x, Atom):
            return ("a", x.name), True
        if x is None:
            return None, True
        hit = memo.get(id(x))
        if hit is not None:
            return hit[1], True
        parts = [t(a) for a in x.args]
        args_key = tuple(k for k, _ in parts)
        if all(g for _, g in parts):
            return interner.ground(x, args_key), True
        return ("s", x.functor, args_key), False

    def k(x):
        return t(x)[0]

    key = []
    for item in goal:
        if isinstance(item, Call):
            key.append(("call", k(item.term)))
        elif isinstance(item, Msw):
            key.append(("msw", k(item.switch), k(item.instance), k(item.outcome)))
        else:
            coeffs = tuple((k(v), a) for v, a in item.coeffs)
            key.append(("lc", k(item.lhs), coeffs, item.intercept))
    return tuple(key), order


# ------------------------------------------------------------- expansion


def _rename_clause(clause: Clause) -> Clause:
    mapping = {v: Var(v.name) for v in clause.vars()}
    head = resolve(clause.head, mapping)
    return Clause(head, tuple(b.resolve(mapping) for b in clause.body))


def _ground_false(c: LinearConstraint) -> bool:
    return c.is_ground() and abs(c.intercept) > SAT_TOL


def _outside_domain(m: Msw, prog: Program) -> bool:
    # A ground outcome that a finite switch cannot take has probability 0.
    if not (is_ground(m.switch) and is_ground(m.outcome)):
        return False
    dom = prog.domain_of(m.switch)
    return dom != REAL and m.outcome not in dom


def _expand(node: Node, prog: Program) -> list:
    """Fill in ``node.kind`` and return the child goals to expand."""
    goal = node.goal
    if not goal:
        node.kind = "success"
        return []
    first, rest = goal[0], goal[1:]
    if isinstance(first, Msw):
        if first.instance is not None and not is_ground(first.instance):
            raise DerivationError(f"msw instance must be ground: {first}")
        if _outside_domain(first, prog):
            node.kind = "fail"
            return []
        node.kind, node.item = "msw", first
        return [rest]
    if isinstance(first, LinearConstraint):
        if _ground_false(first):
            node.kind = "fail"
            return []
        node.kind, node.item = "cons", first
        return [rest]
    gvars = goal_vars(goal)
    children = []
    for clause in prog.clauses_for(first.key):
        c = _rename_clause(clause)
        s = unify(first.term, c.head)
        if s is None:
            continue
        bindings = []
        for x in sorted(gvars, key=lambda v: v.id):
            if x in s:
                t = resolve(x, s)
                if isinstance(t, Var) and t not in gvars:
                    raise DerivationError("goal variable bound to a clause variable")
                bindings.append((x, t))
        new_goal = tuple(b.resolve(s) for b in c.body) + tuple(g.resolve(s) for g in rest)
        node.branches.append(Branch(clause, tuple(bindings)))
        children.append(new_goal)
    node.kind = "pcr" if node.branches else "fail"
    return children


def _attach(parent: Node, i: int, child: Node):
    if parent.kind == "pcr":
        parent.branches[i].child = child
    else:
        parent.child = child


def derive(prog: Program, query: Term, limits: Limits | None = None) -> "DerivationTree":
    """Build the derivation DAG of ``query``."""
    try:
        return _derive(prog, query, limits or Limits())
    except RecursionError:
        # Term utilities recurse on nesting depth (long lists).
        raise DerivationLimitError(
            f"terms nested deeper than the interpreter recursion limit ({sys.getrecursionlimit()})"
        ) from None


def _derive(prog: Program, query: Term, limits: Limits) -> "DerivationTree":
    if isinstance(query, (Atom, Struct)):
        goal = (Call(query),)
    else:
        raise DerivationError(f"query must be a predicate call: {format_term(query)}")
    done: dict = {}
    active: set = set()
    order: list[Node] = []
    node_budget = limits.max_derivations
    interner = _Interner()

    def open_node(g):
        key, vs = _canon(g, interner)
        hit = done.get(key)
        if hit is not None:
            target, tvars = hit
            if tvars == vs:
                return target, None
            ref = Node(g, kind="ref", target=target, mapping=dict(zip(tvars, vs)))
            ref.successes = target.successes
            order.append(ref)
            return ref, None
        if key in active:
            raise CycleError(f"goal {format_goal(g)} recurs inside its own derivation")
        node = Node(g)
        kids = _expand(node, prog)
        active.add(key)
        return node, [key, vs, kids, 0]

    root, frame = open_node(goal)
    stack = [(root, frame)]
    created = 1
    while stack:
        node, frame = stack[-1]
        key, vs, kids, i = frame
        if i < len(kids):
            frame[3] += 1
            child, cframe = open_node(kids[i])
            _attach(node, i, child)
            if cframe is not None:
                created += 1
                if created > node_budget:
                    raise DerivationLimitError(
                        f"more than {node_budget} derivation nodes",
                        [str(n) for n, _ in stack],
                    )
                stack.append((child, cframe))
                if len(stack) > limits.max_depth:
                    raise DerivationLimitError(
                        f"derivation depth exceeds {limits.max_depth}",
                        [str(n) for n, _ in stack],
                    )
            continue
        stack.pop()
        active.discard(key)
        if node.kind == "success":
            node.successes = 1
        elif node.kind == "pcr":
            node.successes = sum(b.child.successes for b in node.branches)
        elif node.kind in ("msw", "cons"):
            node.successes = node.child.successes
        if node.successes > limits.max_derivations:
            raise DerivationLimitError(
                f"more than {limits.max_derivations} derivations",
                [str(n) for n, _ in stack] + [str(node)],
            )
        done[key] = (node, vs)
        order.append(node)
    tree = DerivationTree(prog, query, root, order)
    tree.types = infer_types(tree)
    _check_instances(tree)
    return tree


# ---------------------------------------------------------------- tree


@dataclass(frozen=True)
class Step:
    """One step of a derivation path: the goal and how it was reduced."""

    goal: tuple
    kind: str
    label: object = None

    def __str__(self) -> str:
        return f"{format_goal(self.goal)}  [{self.kind}]"


class DerivationTree:
    def __init__(self, prog: Program, query: Term, root: Node, order: list[Node]):
        self.prog = prog
        self.query = query
        self.root = root
        self.order = order  # children before parents
        self.types: "TypeMap" = None

    @property
    def num_derivations(self) -> int:
        return self.root.successes

    def __len__(self) -> int:
        return len(self.order)

    def paths(self) -> Iterator[list[Step]]:
        """Every successful derivation as a list of steps ending with the
        empty goal.  References are followed with their renaming applied."""
        yield from _paths(self.root, {})

    def msw_nodes(self) -> Iterator[Node]:
        for n in self.order:
            if n.kind == "msw":
                yield n


def _rename_goal(goal, mapping):
    if not mapping:
        return goal
    return tuple(g.resolve(mapping) for g in goal)


def _paths(node: Node, mapping) -> Iterator[list[Step]]:
    # Iterative over a stack of partial paths; yields lazily.
    stack = [(node, mapping, [])]
    while stack:
        n, m, prefix = stack.pop()
        while n.kind == "ref":
            m = {k: m.get(v, v) for k, v in n.mapping.items()}
            n = n.target
        if n.successes == 0:
            continue
        g = _rename_goal(n.goal, m)
        if n.kind == "success":
            yield prefix + [Step(g, "success")]
        elif n.kind in ("msw", "cons"):
            label = n.item.resolve(m) if m else n.item
            stack.append((n.child, m, prefix + [Step(g, n.kind, label)]))
        elif n.kind == "pcr":
            for b in reversed(n.branches):
                stack.append((b.child, m, prefix + [Step(g, "pcr", b.clause)]))


# --------------------------------------------------------- type inference


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        while p != x:
            self.parent[x] = self.parent.setdefault(p, p)
            x, p = p, self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra.id < rb.id:
                ra, rb = rb, ra
            self.parent[ra] = rb


@dataclass
class _Evidence:
    continuous: bool = False
    finite: list = field(default_factory=list)  # outcome domains
    family: list = field(default_factory=list)  # (switch term, arg position)
    where: list = field(default_factory=list)  # goal items, stringified only for errors


def _ordered_union(seqs):
    out = []
    for seq in seqs:
        for v in seq:
            if v not in out:
                out.append(v)
    return tuple(out)


class TypeMap:
    """Variable kinds of a derivation tree.

    Read as a mapping ``Var -> VarInfo``; only variables that occur as an
    ``msw`` outcome or parameter or in a constraint (directly or through
    aliasing) are present.
    """

    def __init__(self, uf: _UnionFind, info: dict):
        self._uf = uf
        self._info = info

    def __contains__(self, v) -> bool:
        return self._uf.find(v) in self._info

    def __getitem__(self, v) -> VarInfo:
        return self._info[self._uf.find(v)]

    def get(self, v, default=None):
        return self._info.get(self._uf.find(v), default)

    def classify(self, variables) -> tuple[set, dict]:
        """Split ``variables`` into ``(V_c, V_d)``; ``V_d`` maps each discrete
        variable to its domain."""
        vc, vd = set(), {}
        for v in variables:
            info = self.get(v)
            if info is None:
                continue
            if info.continuous:
                vc.add(v)
            else:
                vd[v] = info.domain
        return vc, vd


def _family_domain(prog: Program, switch: Term, pos: int) -> tuple:
    vals = []
    for d in prog.matching_decls(switch):
        if isinstance(d.pattern, Struct):
            a = d.pattern.args[pos]
            if is_ground(a):
                vals.append(a)
    for s in prog.declared_instances(switch):
        if isinstance(s, Struct):
            vals.append(s.args[pos])
    return _ordered_union([vals])


def infer_types(tree: DerivationTree) -> TypeMap:
    prog = tree.prog
    uf = _UnionFind()
    ev: dict = {}

    def add(v):
        uf.find(v)
        return ev.setdefault(v, _Evidence())

    for n in tree.order:
        for v in n.goal_vars:
            uf.find(v)
        if n.kind == "ref":
            for a, b in n.mapping.items():
                uf.union(a, b)
        elif n.kind == "pcr":
            for b in n.branches:
                for x, t in b.bindings:
                    if isinstance(t, Var):
                        uf.union(x, t)
        elif n.kind == "cons":
            for v in n.item.vars():
                e = add(v)
                e.continuous = True
                e.where.append(n.item)
        elif n.kind == "msw":
            m: Msw = n.item
            if isinstance(m.switch, Struct):
                for pos, a in enumerate(m.switch.args):
                    if isinstance(a, Var):
                        e = add(a)
                        e.family.append((m.switch, pos))
                        e.where.append(m)
                    elif not is_ground(a):
                        raise DerivationError(f"switch parameter {format_term(a)} must be a variable or ground")
            if isinstance(m.outcome, Var):
                decls = prog.matching_decls(m.switch)
                if not decls:
                    raise DerivationError(f"no values declaration matches {format_term(m.switch)}")
                e = add(m.outcome)
                e.where.append(m)
                for d in decls:
                    if d.domain == REAL:
                        e.continuous = True
                    else:
                        e.finite.append(d.domain)

    merged: dict = {}
    for v, e in ev.items():
        r = uf.find(v)
        m = merged.setdefault(r, _Evidence())
        m.continuous |= e.continuous
        m.finite += e.finite
        m.family += e.family
        m.where += e.where

    info: dict = {}
    for r, e in merged.items():
        if e.continuous:
            if e.family:
                raise TypeConflictError(
                    f"variable {r.name} is continuous but used as a switch parameter ({'; '.join(map(str, e.where))})"
                )
            for dom in e.finite:
                if not all(isinstance(x, Num) for x in dom):
                    raise TypeConflictError(
                        f"variable {r.name} is continuous but also the outcome of a switch "
                        f"with non-numeric values ({'; '.join(map(str, e.where))})"
                    )
            info[r] = VarInfo("c")
            continue
        if e.finite:
            dom = _ordered_union(e.finite)
        else:
            dom = _ordered_union([_family_domain(prog, s, p) for s, p in e.family])
        info[r] = VarInfo("d", dom or None)
    return TypeMap(uf, info)


def infer_var_types(tree: DerivationTree, path: list[Step]) -> list[tuple[set, dict]]:
    """``(V_c, V_d)`` for every goal on ``path``; ``V_d`` maps variables to
    their domains."""
    return [tree.types.classify(goal_vars(step.goal)) for step in path]


# ------------------------------------------------- repeated switch instances


def _instance_key(m: Msw):
    return (m.switch, m.instance)


def _check_instances(tree: DerivationTree):
    """No successful path may use the same switch instance twice."""
    used: dict = {}
    for n in tree.order:
        if n.successes == 0:
            used[id(n)] = frozenset()
        elif n.kind == "success":
            used[id(n)] = frozenset()
        elif n.kind == "ref":
            inner = used[id(n.target)]
            m = n.mapping
            used[id(n)] = frozenset((resolve(s, m), None if i is None else resolve(i, m)) for s, i in inner)
        elif n.kind == "pcr":
            out: set = set()
            for b in n.branches:
                out |= used[id(b.child)]
            used[id(n)] = frozenset(out)
        elif n.kind == "cons":
            used[id(n)] = used[id(n.child)]
        elif n.kind == "msw":
            below = used[id(n.child)]
            k = _instance_key(n.item)
            if k in below:
                inst = "" if n.item.instance is None else f" instance {format_term(n.item.instance)}"
                raise DerivationError(
                    f"switch {format_term(n.item.switch)}{inst} is used twice in one derivation; "
                    "use msw/3 with distinct instance ids"
                )
            used[id(n)] = below | {k}
