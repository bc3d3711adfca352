"""Success functions: sums of constrained product-PDF terms.

A term is ``k * prod(delta_v(V)) * prod(N(f_i; mu_i, var_i))`` paired with a
conjunction of linear equalities.  ``k`` is kept as a mantissa and binary
exponent, so products of probabilities are exact float products that
cannot underflow.  The same term
machinery carries an optional quadratic numerator for ESS functions (see
:mod:`hyprism.ess`); success-function terms have ``chi is None``.

Conventions:

* A delta on a continuous variable evaluates to 1 on exact match (within
  ``SAT_TOL``) and 0 elsewhere, i.e. values are densities with respect to
  Lebesgue measure plus counting measure on the delta points.
* A variable absent from a term integrates to that term unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import AlgebraError
from .terms import Num, Var

SAT_TOL = 1e-9
RANK_TOL = 1e-12
_CANCEL = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)
_LN2 = math.log(2.0)

# --------------------------------------------------------------- coefficients
# A coefficient is ``(m, e)`` with value ``m * 2**e``; ``m`` in [0.5, 1) or 0.

ZERO_COEF = (0.0, 0)


def _norm(m: float, e: int) -> tuple:
    if m == 0.0:
        return ZERO_COEF
    f, de = math.frexp(m)
    return (f, e + de)


def coef_of(x: float) -> tuple:
    if x < 0.0:
        raise AlgebraError(f"negative coefficient {x}")
    return _norm(float(x), 0)


def coef_from_log(logk: float) -> tuple:
    if logk == -math.inf:
        return ZERO_COEF
    e = math.floor(logk / _LN2)
    return _norm(math.exp(logk - e * _LN2), e)


def coef_mul(a: tuple, b: tuple) -> tuple:
    return _norm(a[0] * b[0], a[1] + b[1])


def coef_scale(a: tuple, log_factor: float) -> tuple:
    """``a * exp(log_factor)``."""
    if log_factor == 0.0:
        return a
    return coef_mul(a, coef_from_log(log_factor))


def coef_sum(cs) -> tuple:
    cs = [c for c in cs if c[0] != 0.0]
    if not cs:
        return ZERO_COEF
    top = max(e for _, e in cs)
    return _norm(math.fsum(math.ldexp(m, e - top) for m, e in cs), top)


def coef_log(c: tuple) -> float:
    return -math.inf if c[0] == 0.0 else math.log(c[0]) + c[1] * _LN2


def coef_value(c: tuple) -> float:
    return math.ldexp(c[0], c[1])



def _add_coef(d: dict, v: Var, a: float):
    old = d.get(v)
    if old is None:
        if a != 0.0:
            d[v] = a
        return
    new = old + a
    if abs(new) <= _CANCEL * (abs(old) + abs(a)):
        del d[v]
    else:
        d[v] = new


class LinearForm:
    """``sum(coefs[v] * v) + const``; never stores zero coefficients."""

    __slots__ = ("coefs", "const")

    def __init__(self, coefs: Mapping[Var, float] | None = None, const: float = 0.0):
        self.coefs = {v: float(a) for v, a in (coefs or {}).items() if a != 0.0}
        self.const = float(const)

    @classmethod
    def var(cls, v: Var, coef: float = 1.0) -> "LinearForm":
        return cls({v: coef})

    @property
    def vars(self) -> set[Var]:
        return set(self.coefs)

    def coef(self, v: Var) -> float:
        return self.coefs.get(v, 0.0)

    def is_constant(self) -> bool:
        return not self.coefs

    def __add__(self, other: "LinearForm") -> "LinearForm":
        out = dict(self.coefs)
        for v, a in other.coefs.items():
            _add_coef(out, v, a)
        return LinearForm(out, self.const + other.const)

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return self + other.scale(-1.0)

    def scale(self, a: float) -> "LinearForm":
        return LinearForm({v: a * c for v, c in self.coefs.items()}, a * self.const)

    def shift(self, b: float) -> "LinearForm":
        return LinearForm(self.coefs, self.const + b)

    def without(self, v: Var) -> "LinearForm":
        return LinearForm({u: c for u, c in self.coefs.items() if u != v}, self.const)

    def substitute(self, v: Var, form: "LinearForm") -> "LinearForm":
        a = self.coefs.get(v)
        if a is None:
            return self
        return self.without(v) + form.scale(a)

    def rename(self, mapping: Mapping[Var, Var]) -> "LinearForm":
        out: dict = {}
        for v, a in self.coefs.items():
            _add_coef(out, mapping.get(v, v), a)
        return LinearForm(out, self.const)

    def evaluate(self, valuation):
        total = self.const
        for v, a in self.coefs.items():
            if v not in valuation:
                raise AlgebraError(f"missing variable {v.name} in valuation")
            total = total + a * valuation[v]
        return total

    def sorted_items(self):
        return sorted(self.coefs.items(), key=lambda kv: kv[0].id)

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearForm) and self.coefs == other.coefs and self.const == other.const

    def __repr__(self) -> str:
        from .render import render_form

        return render_form(self)


@dataclass(frozen=True)
class DeltaFactor:
    """``delta_point(var)``.  ``point`` is a ground logic term for discrete
    variables and a float for continuous ones."""

    var: Var
    point: object

    @property
    def continuous(self) -> bool:
        return isinstance(self.point, float)


class GaussianFactor:
    """``N(form; mean, var)`` in canonical shape: the form has no intercept
    and, when it has a single variable, unit coefficient."""

    __slots__ = ("form", "mean", "var")

    def __init__(self, form: LinearForm, mean: float, var: float):
        self.form, self.mean, self.var = form, float(mean), float(var)

    @property
    def vars(self) -> set[Var]:
        return self.form.vars

    def log_density(self, valuation):
        x = self.form.evaluate(valuation)
        return -0.5 * (_LOG_2PI + math.log(self.var)) - (x - self.mean) ** 2 / (2.0 * self.var)

    def rename(self, mapping) -> "GaussianFactor":
        return GaussianFactor(self.form.rename(mapping), self.mean, self.var)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GaussianFactor)
            and self.form == other.form
            and self.mean == other.mean
            and self.var == other.var
        )

    def __repr__(self) -> str:
        from .render import render_gaussian

        return render_gaussian(self)


def gaussian(form: LinearForm, mean: float, var: float) -> tuple[float, GaussianFactor | None]:
    """Canonicalize ``N(form; mean, var)`` into ``(log_scale, factor)``.

    The canonical form has no intercept and a unit coefficient on its
    lowest-id variable, so proportional forms become equal.

    A constant form collapses into ``log_scale`` alone (factor ``None``).
    """
    if not var > 0.0 or not math.isfinite(var):
        raise AlgebraError(f"Gaussian variance must be positive, got {var}")
    mean = mean - form.const
    coefs = form.coefs
    if not coefs:
        return -0.5 * (_LOG_2PI + math.log(var)) - mean * mean / (2.0 * var), None
    if len(coefs) == 1:
        (v, c), = coefs.items()
        return -math.log(abs(c)), GaussianFactor(LinearForm({v: 1.0}), mean / c, var / (c * c))
    first = min(coefs, key=lambda u: u.id)
    c = coefs[first]
    if c == 1.0:
        return 0.0, GaussianFactor(LinearForm(coefs), mean, var)
    form = LinearForm({v: a / c for v, a in coefs.items()})
    return -math.log(abs(c)), GaussianFactor(form, mean / c, var / (c * c))


def _merge_gaussians(gs: list) -> tuple[float, list]:
    """Fuse factors over the same (canonical) form:
    ``N(f; m1, v1) N(f; m2, v2) = N(m1; m2, v1 + v2) N(f; m, v)``."""
    out: list = []
    logk = 0.0
    for g in gs:
        for i, h in enumerate(out):
            if h.form == g.form:
                s = h.var + g.var
                d = h.mean - g.mean
                logk += -0.5 * (_LOG_2PI + math.log(s)) - d * d / (2.0 * s)
                var = h.var * g.var / s
                mean = (h.mean * g.var + g.mean * h.var) / s
                out[i] = GaussianFactor(h.form, mean, var)
                break
        else:
            out.append(g)
    return logk, out


class ConstraintSet:
    """Conjunction of linear equalities in reduced row-echelon form.

    Each row is ``pivot = rhs`` where ``rhs`` mentions no pivot.
    """

    __slots__ = ("rows",)

    def __init__(self, rows: tuple = ()):
        self.rows = tuple(rows)

    def __bool__(self) -> bool:
        return bool(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def vars(self) -> set[Var]:
        out = set()
        for p, rhs in self.rows:
            out.add(p)
            out |= rhs.vars
        return out

    def mentions(self, v: Var) -> bool:
        return any(p == v or v in rhs.coefs for p, rhs in self.rows)

    def equations(self) -> list[LinearForm]:
        """Each row as a form equal to zero."""
        return [rhs.scale(-1.0) + LinearForm.var(p) for p, rhs in self.rows]

    @classmethod
    def from_equations(cls, eqs: Iterable[LinearForm]):
        cs = TRUE
        for eq in eqs:
            cs = cs.add_equation(eq)
            if cs is None:
                return None
        return cs

    def add_equation(self, eq: LinearForm):
        """Conjoin ``eq = 0``; ``None`` if the result is unsatisfiable."""
        for p, rhs in self.rows:
            eq = eq.substitute(p, rhs)
        if eq.is_constant():
            if abs(eq.const) > SAT_TOL:
                return None
            return self
        pivot = max(eq.coefs, key=lambda v: (abs(eq.coefs[v]), -v.id))
        a = eq.coefs[pivot]
        sol = eq.without(pivot).scale(-1.0 / a)
        rows = [(p, rhs.substitute(pivot, sol)) for p, rhs in self.rows]
        rows.append((pivot, sol))
        rows.sort(key=lambda r: r[0].id)
        return ConstraintSet(rows)

    def conjoin(self, other: "ConstraintSet"):
        if not other.rows:
            return self
        if not self.rows:
            return other
        out = self
        for eq in other.equations():
            out = out.add_equation(eq)
            if out is None:
                return None
        return out

    def solve_for(self, v: Var):
        """Eliminate ``v``: return ``(solution, remaining)`` or ``None`` if no
        row mentions ``v``."""
        for i, (p, rhs) in enumerate(self.rows):
            if p == v:
                return rhs, ConstraintSet(self.rows[:i] + self.rows[i + 1 :])
        best = None
        for i, (p, rhs) in enumerate(self.rows):
            a = rhs.coefs.get(v)
            if a is not None and (best is None or abs(a) > abs(self.rows[best][1].coefs[v])):
                best = i
        if best is None:
            return None
        p, rhs = self.rows[best]
        a = rhs.coefs[v]
        sol = (LinearForm.var(p) - rhs.without(v)).scale(1.0 / a)
        rows = [(q, r.substitute(v, sol)) for j, (q, r) in enumerate(self.rows) if j != best]
        return sol, ConstraintSet(rows)

    def substitute(self, v: Var, form: LinearForm):
        if not self.mentions(v):
            return self
        eqs = [eq.substitute(v, form) for eq in self.equations()]
        return ConstraintSet.from_equations(eqs)

    def rename(self, mapping) -> "ConstraintSet":
        return ConstraintSet.from_equations(eq.rename(mapping) for eq in self.equations())

    def satisfied(self, valuation):
        ok = True
        for p, rhs in self.rows:
            if p not in valuation:
                raise AlgebraError(f"missing variable {p.name} in valuation")
            ok = ok & (np.abs(valuation[p] - rhs.evaluate(valuation)) <= SAT_TOL)
        return ok

    def __repr__(self) -> str:
        from .render import render_constraints

        return render_constraints(self)


TRUE = ConstraintSet()


class PPDF:
    """``k * prod(deltas) * prod(gaussians)``; ``k`` is given either as
    ``coef`` or as ``logk``."""

    __slots__ = ("coef", "deltas", "gaussians")

    def __init__(self, logk: float = 0.0, deltas=(), gaussians=(), coef: tuple | None = None):
        self.coef = coef_from_log(float(logk)) if coef is None else coef
        self.deltas = tuple(sorted(deltas, key=lambda d: d.var.id))
        self.gaussians = tuple(gaussians)

    @property
    def k(self) -> float:
        return coef_value(self.coef)

    @property
    def logk(self) -> float:
        return coef_log(self.coef)

    @property
    def vars(self) -> set[Var]:
        out = {d.var for d in self.deltas}
        for g in self.gaussians:
            out |= g.vars
        return out

    def delta_on(self, v: Var) -> DeltaFactor | None:
        for d in self.deltas:
            if d.var == v:
                return d
        return None

    def rename(self, mapping) -> "PPDF":
        return PPDF(
            0.0,
            [DeltaFactor(mapping.get(d.var, d.var), d.point) for d in self.deltas],
            [g.rename(mapping) for g in self.gaussians],
            self.coef,
        )


def make_ppdf(logk: float = 0.0, deltas=(), gaussians=(), coef: tuple | None = None) -> PPDF | None:
    """Build a normalized PPDF from raw ``(form, mean, var)`` triples or
    factors; merges duplicate deltas.  ``None`` means the zero function.

    The coefficient is ``coef`` when given, else ``exp(logk)``.
    """
    c = coef_from_log(float(logk)) if coef is None else coef
    if c[0] == 0.0:
        return None
    merged: dict = {}
    for d in deltas:
        old = merged.get(d.var)
        if old is None:
            merged[d.var] = d
        elif not _same_point(old.point, d.point):
            return None
    gs = []
    for g in gaussians:
        if isinstance(g, GaussianFactor):
            gs.append(g)
            continue
        ls, f = gaussian(*g)
        c = coef_scale(c, ls)
        if f is not None:
            gs.append(f)
    if len(gs) > 1:
        ls, gs = _merge_gaussians(gs)
        c = coef_scale(c, ls)
    return PPDF(0.0, merged.values(), gs, c)


def _same_point(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return isinstance(a, float) and isinstance(b, float) and abs(a - b) <= SAT_TOL
    return a == b


class Piece:
    """One constrained term ``<chi * phi, C>``; ``chi is None`` means 1."""

    __slots__ = ("chi", "ppdf", "cons")

    def __init__(self, ppdf: PPDF, cons: ConstraintSet = TRUE, chi=None):
        self.ppdf, self.cons, self.chi = ppdf, cons, chi

    @property
    def vars(self) -> set[Var]:
        out = self.ppdf.vars | self.cons.vars
        if self.chi is not None:
            out |= self.chi.vars
        return out

    def rename(self, mapping) -> "Piece":
        chi = None if self.chi is None else self.chi.rename(mapping)
        return Piece(self.ppdf.rename(mapping), self.cons.rename(mapping), chi)


class SuccessFunction:
    """Finite sum of constrained PPDF terms."""

    def __init__(self, pieces: Iterable[Piece] = ()):
        self.pieces = tuple(pieces)

    @classmethod
    def one(cls) -> "SuccessFunction":
        return cls([Piece(PPDF())])

    @classmethod
    def zero(cls) -> "SuccessFunction":
        return cls()

    @classmethod
    def constant(cls, k: float) -> "SuccessFunction":
        if k <= 0.0:
            return cls()
        return cls([Piece(PPDF(coef=coef_of(k)))])

    def __len__(self) -> int:
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def D(self, i: int) -> PPDF:
        return self.pieces[i].ppdf

    def C(self, i: int) -> ConstraintSet:
        return self.pieces[i].cons

    @property
    def vars(self) -> set[Var]:
        out: set = set()
        for p in self.pieces:
            out |= p.vars
        return out

    def __add__(self, other: "SuccessFunction") -> "SuccessFunction":
        return type(self)(self.pieces + other.pieces)

    def rename(self, mapping):
        return type(self)(p.rename(mapping) for p in self.pieces)

    def __repr__(self) -> str:
        from .render import render_success

        return render_success(self)


# ---------------------------------------------------------------- join


def join_pieces(a: Piece, b: Piece) -> Piece | None:
    if a.chi is not None and b.chi is not None:
        raise AlgebraError("cannot join two ESS terms")
    cons = a.cons.conjoin(b.cons)
    if cons is None:
        return None
    pa, pb = a.ppdf, b.ppdf
    ppdf = make_ppdf(0.0, pa.deltas + pb.deltas, pa.gaussians + pb.gaussians, coef_mul(pa.coef, pb.coef))
    if ppdf is None:
        return None
    return Piece(ppdf, cons, a.chi if a.chi is not None else b.chi)


def join_terms(xs: Iterable[Piece], ys: Iterable[Piece]) -> list[Piece]:
    ys = list(ys)
    out = []
    for a in xs:
        for b in ys:
            p = join_pieces(a, b)
            if p is not None:
                out.append(p)
    return out


def join(psi1: SuccessFunction, psi2: SuccessFunction) -> SuccessFunction:
    """``psi1 * psi2`` with delta simplification and unsatisfiable terms
    dropped."""
    return SuccessFunction(join_terms(psi1.pieces, psi2.pieces))


# --------------------------------------------------- substitution / projection


def substitute_piece(p: Piece, v: Var, form: LinearForm) -> Piece | None:
    """Replace continuous ``v`` by ``form`` everywhere in ``p``."""
    cons = p.cons.substitute(v, form)
    if cons is None:
        return None
    deltas = []
    for d in p.ppdf.deltas:
        if d.var == v:
            cons = cons.add_equation(form.shift(-d.point))
            if cons is None:
                return None
        else:
            deltas.append(d)
    gs = [(g.form.substitute(v, form), g.mean, g.var) if v in g.form.coefs else g for g in p.ppdf.gaussians]
    ppdf = make_ppdf(0.0, deltas, gs, p.ppdf.coef)
    if ppdf is None:
        return None
    chi = None if p.chi is None else p.chi.substitute(v, form)
    return Piece(ppdf, cons, chi)


def project_piece(p: Piece, v: Var) -> Piece | None:
    solved = p.cons.solve_for(v)
    if solved is None:
        return p
    sol, rest = solved
    return substitute_piece(Piece(p.ppdf, rest, p.chi), v, sol)


def project(psi: SuccessFunction, v: Var) -> SuccessFunction:
    """``psi`` projected on ``v``: constraints on ``v`` are solved and
    substituted away."""
    out = []
    for p in psi.pieces:
        q = project_piece(p, v)
        if q is not None:
            out.append(q)
    return type(psi)(out)


# ------------------------------------------------------------ integration


def _pivoted_ldl(M: np.ndarray, n: int):
    """Factor PSD ``M`` (over ``n`` variables plus a trailing constant slot)
    as ``sum_l d_l (l . z)^2 + r``.  Returns ``([(d, l)], r)``."""
    M = M.copy()
    remaining = list(range(n))
    diag = [M[i, i] for i in remaining]
    scale = max([1.0] + [abs(x) for x in diag])
    out = []
    while remaining:
        p = max(remaining, key=lambda i: M[i, i])
        d = M[p, p]
        if d <= RANK_TOL * scale:
            break
        l = M[:, p] / d
        l[p] = 1.0
        big = np.max(np.abs(l))
        l[np.abs(l) <= 1e-13 * big] = 0.0
        M -= d * np.outer(l, l)
        M[p, :] = 0.0
        M[:, p] = 0.0
        remaining.remove(p)
        out.append((d, l))
    return out, float(M[n, n])


def integrate_piece(p: Piece, v: Var) -> Piece:
    """Integrate ``v`` out of a term with no constraint or delta on ``v``."""
    hit = [g for g in p.ppdf.gaussians if v in g.form.coefs]
    if not hit:
        if p.chi is not None and v in p.chi.vars:
            raise AlgebraError(f"ESS numerator mentions {v.name} with no density over it")
        return p
    keep = [g for g in p.ppdf.gaussians if v not in g.form.coefs]
    others = sorted({u for g in hit for u in g.form.coefs if u != v}, key=lambda u: u.id)
    idx = {u: i + 1 for i, u in enumerate(others)}
    n = len(others)
    size = n + 2
    M = np.zeros((size, size))
    logk = 0.0
    for g in hit:
        r = np.zeros(size)
        for u, a in g.form.coefs.items():
            r[0 if u == v else idx[u]] = a
        r[-1] = g.form.const - g.mean
        M += np.outer(r, r) / g.var
        logk -= 0.5 * (_LOG_2PI + math.log(g.var))
    A = M[0, 0]
    b = M[0, 1:]
    schur = M[1:, 1:] - np.outer(b, b) / A
    logk += 0.5 * (_LOG_2PI - math.log(A))
    factors, resid = _pivoted_ldl(schur, n)
    logk -= 0.5 * resid
    new = list(keep)
    for d, l in factors:
        form = LinearForm({others[q]: l[q] for q in range(n) if l[q] != 0.0}, l[n])
        logk += 0.5 * (_LOG_2PI - math.log(d))
        ls, f = gaussian(form, 0.0, 1.0 / d)
        logk += ls
        if f is not None:
            new.append(f)
    chi = p.chi
    if chi is not None and v in chi.vars:
        cond_mean = LinearForm({others[q]: -b[q] / A for q in range(n) if b[q] != 0.0}, -b[n] / A)
        chi = chi.expect_gaussian(v, cond_mean, 1.0 / A)
    return Piece(make_ppdf(0.0, p.ppdf.deltas, new, coef_scale(p.ppdf.coef, logk)), p.cons, chi)


def integrate_out(psi: SuccessFunction, v: Var) -> SuccessFunction:
    """Integrate continuous ``v`` out of every term (closed form)."""
    for p in psi.pieces:
        if p.cons.mentions(v):
            raise AlgebraError(f"project constraints on {v.name} before integrating")
        if p.ppdf.delta_on(v) is not None:
            raise AlgebraError(f"delta on {v.name}: use marginalize")
    return type(psi)(integrate_piece(p, v) for p in psi.pieces)


# ---------------------------------------------------------- marginalization


@dataclass(frozen=True)
class VarInfo:
    kind: str  # "c" or "d"
    domain: tuple | None = None

    @property
    def continuous(self) -> bool:
        return self.kind == "c"


def _infer_kind(pieces, v: Var) -> str | None:
    for p in pieces:
        d = p.ppdf.delta_on(v)
        if d is not None:
            return "c" if d.continuous else "d"
        if p.cons.mentions(v) or any(v in g.form.coefs for g in p.ppdf.gaussians):
            return "c"
        if p.chi is not None and v in p.chi.vars:
            return "c"
    return None


def marginalize_pieces(pieces, v: Var, types: Mapping[Var, VarInfo] | None = None) -> list[Piece]:
    if types is not None:
        if v not in types:
            raise AlgebraError(f"type-unknown variable {v.name}")
        info = types[v]
    else:
        kind = _infer_kind(pieces, v)
        if kind is None:
            return list(pieces)
        info = VarInfo(kind)
    out = []
    if not info.continuous:
        size = None
        for p in pieces:
            d = p.ppdf.delta_on(v)
            if d is not None:
                deltas = [x for x in p.ppdf.deltas if x.var != v]
                out.append(Piece(PPDF(0.0, deltas, p.ppdf.gaussians, p.ppdf.coef), p.cons, p.chi))
            else:
                if size is None:
                    if info.domain is None:
                        raise AlgebraError(f"unknown domain for free discrete variable {v.name}")
                    size = len(info.domain)
                c = coef_mul(p.ppdf.coef, coef_of(size))
                out.append(Piece(PPDF(0.0, p.ppdf.deltas, p.ppdf.gaussians, c), p.cons, p.chi))
        return out
    for p in pieces:
        d = p.ppdf.delta_on(v)
        if d is not None:
            q = substitute_piece(p, v, LinearForm({}, float(d.point)))
        elif p.cons.mentions(v):
            q = project_piece(p, v)
        else:
            q = integrate_piece(p, v)
        if q is not None:
            out.append(q)
    return out


def marginalize(psi: SuccessFunction, v, types: Mapping[Var, VarInfo] | None = None) -> SuccessFunction:
    """Sum (discrete) or integrate (continuous) ``v`` out of ``psi``.

    ``v`` may also be an iterable of variables; the empty set is the
    identity.  Variable kinds come from ``types``; without it they are read
    off the terms.
    """
    if isinstance(v, Var):
        return type(psi)(marginalize_pieces(psi.pieces, v, types))
    pieces = list(psi.pieces)
    for u in sorted(v, key=lambda u: u.id):
        pieces = marginalize_pieces(pieces, u, types)
    return type(psi)(pieces)


# -------------------------------------------------------------- evaluation


def _delta_log(d: DeltaFactor, val):
    if d.continuous:
        ok = np.abs(np.asarray(val, dtype=float) - d.point) <= SAT_TOL
    elif isinstance(val, (float, int, np.ndarray, np.floating)):
        if not isinstance(d.point, Num):
            ok = np.zeros(np.shape(val), dtype=bool)
        else:
            ok = np.asarray(val) == d.point.value
    else:
        if isinstance(val, Num) and isinstance(d.point, Num):
            ok = val.value == d.point.value
        else:
            ok = val == d.point
    return np.where(ok, 0.0, -np.inf)


def piece_log(p: Piece, valuation):
    """log of the PPDF part of ``p`` times its constraint indicator."""
    total = p.ppdf.logk
    for d in p.ppdf.deltas:
        if d.var not in valuation:
            raise AlgebraError(f"missing variable {d.var.name} in valuation")
        total = total + _delta_log(d, valuation[d.var])
    for g in p.ppdf.gaussians:
        x = g.form.evaluate(valuation)
        total = total - 0.5 * (_LOG_2PI + math.log(g.var)) - (x - g.mean) ** 2 / (2.0 * g.var)
    if p.cons:
        total = total + np.where(p.cons.satisfied(valuation), 0.0, -np.inf)
    return total


def _logsumexp(logs):
    if not logs:
        return -math.inf
    shape = np.broadcast_shapes(*[np.shape(x) for x in logs])
    arr = np.stack([np.broadcast_to(np.asarray(x, dtype=float), shape) for x in logs])
    m = np.max(arr, axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    out = safe + np.log(np.sum(np.exp(arr - safe), axis=0))
    out = np.where(np.isfinite(m), out, m)
    return float(out) if out.ndim == 0 else out


def log_evaluate(psi: SuccessFunction, valuation: Mapping | None = None):
    """``log psi(valuation)``; arrays in ``valuation`` broadcast."""
    valuation = valuation or {}
    return _logsumexp([piece_log(p, valuation) for p in psi.pieces])


def evaluate(psi: SuccessFunction, valuation: Mapping | None = None):
    """Pointwise value ``sum_i [C_i holds] * D_i(valuation)``."""
    valuation = valuation or {}
    missing = psi.vars - set(valuation)
    if missing:
        names = ", ".join(sorted(v.name for v in missing))
        raise AlgebraError(f"missing variable(s) {names} in valuation")
    total = 0.0
    for p in psi.pieces:
        total = total + np.exp(piece_log(p, valuation))
    return total if np.ndim(total) else float(total)


# ------------------------------------------------------------ like terms


def _piece_key(p: Piece):
    deltas = tuple((d.var.id, d.point) for d in p.ppdf.deltas)
    gs = tuple(sorted((tuple(g.form.sorted_items()), g.mean, g.var) for g in p.ppdf.gaussians))
    cons = tuple((v.id, tuple(rhs.sorted_items()), rhs.const) for v, rhs in p.cons.rows)
    chi = None
    if p.chi is not None:
        q = p.chi
        chi = (tuple(sorted(((a.id, b.id), c) for (a, b), c in q.quad.items())),
               tuple(sorted((v.id, c) for v, c in q.lin.items())), q.const)
    return deltas, gs, cons, chi


def combine_like(pieces) -> list[Piece]:
    """Merge terms that differ only in their coefficient.

    Keeps first-occurrence order; the represented function is unchanged.
    """
    order: list = []
    groups: dict = {}
    for p in pieces:
        try:
            key = _piece_key(p)
            hash(key)
        except TypeError:
            key = object()
        if key in groups:
            groups[key].append(p)
        else:
            groups[key] = [p]
            order.append(key)
    out = []
    for key in order:
        ps = groups[key]
        if len(ps) == 1:
            out.append(ps[0])
            continue
        c = coef_sum([q.ppdf.coef for q in ps])
        first = ps[0]
        out.append(Piece(PPDF(0.0, first.ppdf.deltas, first.ppdf.gaussians, c), first.cons, first.chi))
    return out
