"""Success and ESS functions of goals in a derivation tree.

Both are computed bottom-up in one pass over the derivation DAG:

* success leaf: ``psi = 1``, no ESS terms;
* MSW step: ``psi = psi_msw * psi'`` and, per statistic,
  ``xi = psi_msw * xi' + psi' * xi_msw``;
* CONS step: ``psi = <1, C> * psi'`` and ``xi = <1, C> * xi'``;
* PCR step: per clause, bindings of goal variables become delta factors or
  equalities, variables local to the derived goal are marginalized, and the
  alternatives are summed.
"""

from __future__ import annotations

import itertools

from .density import (
    TRUE,
    DeltaFactor,
    LinearForm,
    Piece,
    PPDF,
    SuccessFunction,
    coef_of,
    combine_like,
    join,
    make_ppdf,
    marginalize,
)
from .derivation import DerivationTree, Limits, Node, derive
from .errors import DerivationError, ParameterError, ProgramError
from .ess import ONE, ESSFunction, ESSKey, Quadratic, ess_add, ess_join, ess_marginalize
from .program import REAL, DiscreteParams, GaussianParams, LinearConstraint, Msw, ParameterSet, Program
from .terms import Num, Struct, Term, Var, format_term, is_ground, resolve


def _uniq_vars(t: Term) -> list[Var]:
    out: list = []
    stack = [t]
    while stack:
        x = stack.pop(0)
        if isinstance(x, Var):
            if x not in out:
                out.append(x)
        elif isinstance(x, Struct):
            stack[:0] = list(x.args)
    return out


def switch_instances(m: Msw, types) -> list[tuple[dict, Term]]:
    """Ground switches ``m`` may denote: ``[(assignment, switch)]`` where the
    assignment gives values of its unbound family parameters."""
    params = _uniq_vars(m.switch)
    if not params:
        return [({}, m.switch)]
    domains = []
    for v in params:
        info = types.get(v) if types is not None else None
        if info is None or info.continuous or not info.domain:
            raise DerivationError(
                f"cannot expand switch {format_term(m.switch)}: unknown domain for {v.name}"
            )
        domains.append(info.domain)
    out = []
    for combo in itertools.product(*domains):
        assign = dict(zip(params, combo))
        out.append((assign, resolve(m.switch, assign)))
    return out


def _params(prog: Program, theta: ParameterSet, sw: Term):
    dom = prog.domain_of(sw)
    p = theta.lookup(sw)
    if p is None:
        raise ParameterError(f"no parameters for switch {format_term(sw)}")
    if dom == REAL:
        if not isinstance(p, GaussianParams):
            raise ParameterError(f"switch {format_term(sw)} is real-valued but has a probability vector")
    elif not isinstance(p, DiscreteParams) or len(p.probs) != len(dom):
        raise ParameterError(f"parameters of {format_term(sw)} do not match its {len(dom)} values")
    return dom, p


def _msw_pieces(m: Msw, prog: Program, theta: ParameterSet, types):
    """Yield ``(switch, kind, value, piece)``; ``kind`` is ``"value"`` for a
    discrete outcome and ``"gauss"`` for a Gaussian one."""
    out = m.outcome
    for assign, sw in switch_instances(m, types):
        expand = [DeltaFactor(v, t) for v, t in assign.items()]
        dom, p = _params(prog, theta, sw)
        if isinstance(p, GaussianParams):
            if isinstance(out, Var):
                ppdf = make_ppdf(0.0, expand, [(LinearForm.var(out), p.mean, p.var)])
            elif isinstance(out, Num):
                ppdf = make_ppdf(0.0, expand, [(LinearForm({}, out.value), p.mean, p.var)])
            else:
                continue
            if ppdf is not None:
                yield sw, "gauss", None, Piece(ppdf)
            continue
        cont = isinstance(out, Var) and types is not None and out in types and types[out].continuous
        for v, pv in zip(dom, p.probs):
            if pv <= 0.0:
                continue
            if isinstance(out, Var):
                point = float(v.value) if cont else v
                ppdf = make_ppdf(0.0, expand + [DeltaFactor(out, point)], coef=coef_of(pv))
            elif out == v:
                ppdf = make_ppdf(0.0, expand, coef=coef_of(pv))
            else:
                continue
            if ppdf is not None:
                yield sw, "value", v, Piece(ppdf)


def msw_success(m: Msw, prog: Program, theta: ParameterSet, types=None) -> SuccessFunction:
    """``sum_v p_v delta_v(V)`` for a discrete switch, ``N_V(mu, var)`` for a
    Gaussian one; unbound family parameters are summed over their domain."""
    return SuccessFunction(p for _, _, _, p in _msw_pieces(m, prog, theta, types))


def _outcome_chi(out: Term, power: int) -> Quadratic:
    if isinstance(out, Num):
        return Quadratic.constant(out.value**power)
    if power == 1:
        return Quadratic(lin={out: 1.0})
    return Quadratic(quad={(out, out): 1.0})


def msw_ess(m: Msw, prog: Program, theta: ParameterSet, types=None) -> dict:
    """Base ESS functions of an ``msw`` atom for every statistic it touches.

    Statistics of other switches are absent (zero).
    """
    out: dict = {}
    for sw, kind, value, piece in _msw_pieces(m, prog, theta, types):
        if kind == "value":
            key = ESSKey(sw, "value", value)
            out.setdefault(key, []).append(Piece(piece.ppdf, piece.cons, ONE))
            continue
        for stat, chi in (
            ("mean", _outcome_chi(m.outcome, 1)),
            ("var", _outcome_chi(m.outcome, 2)),
            ("count", ONE),
        ):
            out.setdefault(ESSKey(sw, stat), []).append(Piece(piece.ppdf, piece.cons, chi))
    return {k: ESSFunction(v) for k, v in out.items()}


def constraint_success(c: LinearConstraint) -> SuccessFunction:
    """``<1, {c}>``; the zero function if ``c`` is unsatisfiable."""
    coefs, const = c.equation()
    cons = TRUE.add_equation(LinearForm(coefs, const))
    if cons is None:
        return SuccessFunction.zero()
    return SuccessFunction([Piece(PPDF(), cons)])


def binding_success(bindings, types) -> SuccessFunction | None:
    """Factor recording how a clause head binds goal variables; ``None``
    when no tracked variable is bound."""
    pieces = [Piece(PPDF())]
    touched = False
    for x, t in bindings:
        info = types.get(x)
        if info is None:
            continue
        touched = True
        if isinstance(t, Var):
            if info.continuous:
                cs = TRUE.add_equation(LinearForm({x: 1.0, t: -1.0}))
                factor = [Piece(PPDF(), cs)]
            else:
                if not info.domain:
                    raise DerivationError(f"unknown domain for discrete variable {x.name}")
                factor = [Piece(PPDF(0.0, [DeltaFactor(x, v), DeltaFactor(t, v)])) for v in info.domain]
        elif info.continuous:
            if not isinstance(t, Num):
                return SuccessFunction.zero()
            factor = [Piece(PPDF(0.0, [DeltaFactor(x, float(t.value))]))]
        else:
            if not is_ground(t):
                raise DerivationError(
                    f"discrete variable {x.name} bound to non-ground term {format_term(t)}"
                )
            factor = [Piece(PPDF(0.0, [DeltaFactor(x, t)]))]
        pieces = join(SuccessFunction(pieces), SuccessFunction(factor)).pieces
    if not touched:
        return None
    return SuccessFunction(pieces)


class Annotation:
    """Success function (and optionally ESS functions) of every node."""

    def __init__(self, tree: DerivationTree, theta: ParameterSet | None = None, ess: bool = False):
        self.tree = tree
        self.theta = tree.prog.theta if theta is None else theta
        self.with_ess = ess
        self.psi: dict = {}
        self.xi: dict = {}
        self._run()

    def _marg(self, f, node: Node):
        local = f.vars - node.goal_vars
        if not local:
            return f
        if isinstance(f, ESSFunction):
            return ess_marginalize(f, local, self.tree.types)
        return marginalize(f, local, self.tree.types)

    def _run(self):
        prog, types, theta = self.tree.prog, self.tree.types, self.theta
        psi, xi = self.psi, self.xi
        for n in self.tree.order:
            k = id(n)
            if k in psi:
                continue
            if n.successes == 0:
                psi[k], xi[k] = SuccessFunction.zero(), {}
            elif n.kind == "success":
                psi[k], xi[k] = SuccessFunction.one(), {}
            elif n.kind == "ref":
                m = n.mapping
                psi[k] = psi[id(n.target)].rename(m)
                xi[k] = {
                    ESSKey(resolve(key.switch, m), key.kind, key.value): f.rename(m)
                    for key, f in xi[id(n.target)].items()
                }
            elif n.kind == "cons":
                base = constraint_success(n.item)
                c = id(n.child)
                psi[k] = join(base, psi[c])
                xi[k] = {key: ess_join(base, f) for key, f in xi[c].items()}
            elif n.kind == "msw":
                base = msw_success(n.item, prog, theta, types)
                c = id(n.child)
                psi[k] = join(base, psi[c])
                if self.with_ess:
                    bx = msw_ess(n.item, prog, theta, types)
                    out = {key: ess_join(base, f) for key, f in xi[c].items()}
                    for key, f in bx.items():
                        term = ess_join(psi[c], f)
                        out[key] = ess_add(out[key], term) if key in out else term
                    xi[k] = out
                else:
                    xi[k] = {}
            elif n.kind == "pcr":
                total: list = []
                xtot: dict = {}
                for b in n.branches:
                    c = id(b.child)
                    if b.child.successes == 0:
                        continue
                    bind = binding_success(b.bindings, types)
                    f = self._marg(psi[c], n)
                    if bind is not None:
                        f = join(bind, f)
                    total.extend(f.pieces)
                    for key, g in xi[c].items():
                        g = self._marg(g, n)
                        if bind is not None:
                            g = ess_join(bind, g)
                        xtot.setdefault(key, []).extend(g.pieces)
                psi[k] = SuccessFunction(combine_like(total))
                xi[k] = {key: ESSFunction(combine_like(ps)) for key, ps in xtot.items()}
            else:
                psi[k], xi[k] = SuccessFunction.zero(), {}

    def success(self, node: Node | None = None) -> SuccessFunction:
        return self.psi[id(node or self.tree.root)]

    def ess(self, node: Node | None = None) -> dict:
        return self.xi[id(node or self.tree.root)]


def goal_success(tree: DerivationTree, theta: ParameterSet | None = None) -> SuccessFunction:
    return Annotation(tree, theta).success()


def goal_ess_all(tree: DerivationTree, theta: ParameterSet | None = None) -> dict:
    """ESS functions of the root goal for every statistic it touches."""
    return Annotation(tree, theta, ess=True).ess()


def goal_ess(tree: DerivationTree, key: ESSKey, theta: ParameterSet | None = None) -> ESSFunction:
    return goal_ess_all(tree, theta).get(key, ESSFunction())


def query_success(
    prog: Program, query: Term, theta: ParameterSet | None = None, limits: Limits | None = None
) -> SuccessFunction:
    return goal_success(derive(prog, query, limits), theta)


def switches_used(tree: DerivationTree) -> list[Term]:
    """Ground switches reachable on some successful derivation, in first-use
    order."""
    out: list = []
    for n in tree.msw_nodes():
        if n.successes == 0:
            continue
        for _, sw in switch_instances(n.item, tree.types):
            if sw not in out:
                if not tree.prog.matching_decls(sw):
                    raise ProgramError(f"undeclared switch instance {format_term(sw)}")
                out.append(sw)
    return out
