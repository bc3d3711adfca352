"""Expected-sufficient-statistics functions.

An ESS function is a sum of ``<chi_i * phi_i, C_i>`` terms where ``chi_i``
is a polynomial of degree <= 2 over continuous variables.  ``chi`` is kept
as a full quadratic form: integrating a variable out of a linear numerator
yields squares and cross products of the conditional mean, so the diagonal
form is not closed under marginalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .density import (
    LinearForm,
    SuccessFunction,
    VarInfo,
    _add_coef,
    join_terms,
    marginalize_pieces,
    piece_log,
)
from .errors import AlgebraError
from .terms import Term, Var, format_term


def _pair(a: Var, b: Var) -> tuple[Var, Var]:
    return (a, b) if a.id <= b.id else (b, a)


class Quadratic:
    """``sum q[(u, v)] * u * v + sum lin[v] * v + const``."""

    __slots__ = ("quad", "lin", "const")

    def __init__(self, quad=None, lin=None, const: float = 0.0):
        self.quad = {k: float(a) for k, a in (quad or {}).items() if a != 0.0}
        self.lin = {k: float(a) for k, a in (lin or {}).items() if a != 0.0}
        self.const = float(const)

    @classmethod
    def constant(cls, c: float) -> "Quadratic":
        return cls(const=c)

    @classmethod
    def affine(cls, f: LinearForm) -> "Quadratic":
        return cls(lin=f.coefs, const=f.const)

    @classmethod
    def product(cls, f: LinearForm, g: LinearForm) -> "Quadratic":
        quad: dict = {}
        lin: dict = {}
        for u, a in f.coefs.items():
            for v, b in g.coefs.items():
                _add_coef(quad, _pair(u, v), a * b)
            _add_coef(lin, u, a * g.const)
        for v, b in g.coefs.items():
            _add_coef(lin, v, b * f.const)
        return cls(quad, lin, f.const * g.const)

    @property
    def vars(self) -> set[Var]:
        out = set(self.lin)
        for u, v in self.quad:
            out.add(u)
            out.add(v)
        return out

    def is_constant(self) -> bool:
        return not self.quad and not self.lin

    def __add__(self, other: "Quadratic") -> "Quadratic":
        quad, lin = dict(self.quad), dict(self.lin)
        for k, a in other.quad.items():
            _add_coef(quad, k, a)
        for k, a in other.lin.items():
            _add_coef(lin, k, a)
        return Quadratic(quad, lin, self.const + other.const)

    def scale(self, c: float) -> "Quadratic":
        return Quadratic(
            {k: c * a for k, a in self.quad.items()},
            {k: c * a for k, a in self.lin.items()},
            c * self.const,
        )

    def split(self, v: Var) -> tuple[float, LinearForm, "Quadratic"]:
        """Write self as ``alpha * v^2 + v * beta + gamma`` with ``beta``
        affine and ``gamma`` free of ``v``."""
        alpha = 0.0
        beta: dict = {}
        quad = {}
        for (a, b), c in self.quad.items():
            if a == v and b == v:
                alpha += c
            elif a == v:
                _add_coef(beta, b, c)
            elif b == v:
                _add_coef(beta, a, c)
            else:
                quad[(a, b)] = c
        lin = {u: c for u, c in self.lin.items() if u != v}
        return alpha, LinearForm(beta, self.lin.get(v, 0.0)), Quadratic(quad, lin, self.const)

    def substitute(self, v: Var, form: LinearForm) -> "Quadratic":
        if v not in self.vars:
            return self
        alpha, beta, gamma = self.split(v)
        out = gamma + Quadratic.product(beta, form)
        if alpha:
            out = out + Quadratic.product(form, form).scale(alpha)
        return out

    def expect_gaussian(self, v: Var, mean: LinearForm, var: float) -> "Quadratic":
        """Replace ``v`` by its moments under ``N(mean, var)``:
        ``E[v] = mean``, ``E[v^2] = mean^2 + var``."""
        alpha, beta, gamma = self.split(v)
        out = gamma + Quadratic.product(beta, mean)
        if alpha:
            out = out + Quadratic.product(mean, mean).scale(alpha) + Quadratic.constant(alpha * var)
        return out

    def rename(self, mapping) -> "Quadratic":
        quad: dict = {}
        lin: dict = {}
        for (a, b), c in self.quad.items():
            _add_coef(quad, _pair(mapping.get(a, a), mapping.get(b, b)), c)
        for a, c in self.lin.items():
            _add_coef(lin, mapping.get(a, a), c)
        return Quadratic(quad, lin, self.const)

    def evaluate(self, valuation):
        total = self.const
        for v, c in self.lin.items():
            if v not in valuation:
                raise AlgebraError(f"missing variable {v.name} in valuation")
            total = total + c * valuation[v]
        for (a, b), c in self.quad.items():
            if a not in valuation or b not in valuation:
                raise AlgebraError("missing variable in valuation")
            total = total + c * valuation[a] * valuation[b]
        return total

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Quadratic)
            and self.quad == other.quad
            and self.lin == other.lin
            and self.const == other.const
        )

    def __repr__(self) -> str:
        from .render import render_quadratic

        return render_quadratic(self)


ONE = Quadratic.constant(1.0)


@dataclass(frozen=True)
class ESSKey:
    """One sufficient-statistic component of a ground switch.

    ``kind`` is ``"value"`` (with ``value``), ``"mean"``, ``"var"`` or
    ``"count"``.
    """

    switch: Term
    kind: str
    value: Term | None = None

    def __str__(self) -> str:
        if self.kind == "value":
            return f"{format_term(self.switch)}={format_term(self.value)}"
        return f"{format_term(self.switch)}:{self.kind}"


class ESSFunction(SuccessFunction):
    """Sum of ``<chi * phi, C>`` terms; each piece carries a non-null ``chi``."""

    def __init__(self, pieces=()):
        pieces = tuple(pieces)
        for p in pieces:
            if p.chi is None:
                p.chi = ONE
        super().__init__(pieces)

    def __repr__(self) -> str:
        from .render import render_success

        return render_success(self)


def ess_zero() -> ESSFunction:
    return ESSFunction()


def ess_join(psi: SuccessFunction, xi: ESSFunction) -> ESSFunction:
    """``psi * xi``; numerators pass through unchanged."""
    if isinstance(psi, ESSFunction):
        raise AlgebraError("left operand must be a success function")
    return ESSFunction(join_terms(psi.pieces, xi.pieces))


def ess_join_right(psi: SuccessFunction, xi: ESSFunction) -> ESSFunction:
    return ess_join(psi, xi)


def ess_join_left(xi: ESSFunction, psi: SuccessFunction) -> ESSFunction:
    return ess_join(psi, xi)


def ess_add(xi1: ESSFunction, xi2: ESSFunction) -> ESSFunction:
    return ESSFunction(xi1.pieces + xi2.pieces)


def ess_marginalize(xi: ESSFunction, v, types: Mapping[Var, VarInfo] | None = None) -> ESSFunction:
    """Marginalize as for success functions, carrying ``chi`` along:
    substitution on deltas/constraints, Gaussian moments on integration."""
    if isinstance(v, Var):
        return ESSFunction(marginalize_pieces(xi.pieces, v, types))
    pieces = list(xi.pieces)
    for u in sorted(v, key=lambda u: u.id):
        pieces = marginalize_pieces(pieces, u, types)
    return ESSFunction(pieces)


def ess_evaluate(xi: ESSFunction, valuation: Mapping | None = None):
    valuation = valuation or {}
    total = 0.0
    for p in xi.pieces:
        total = total + p.chi.evaluate(valuation) * np.exp(piece_log(p, valuation))
    return total if np.ndim(total) else float(total)


def ess_ratio(xi: ESSFunction, log_psi, valuation: Mapping | None = None):
    """``xi(valuation) / psi(valuation)`` given ``log psi``, computed without
    leaving log space for the PPDF parts."""
    valuation = valuation or {}
    total = 0.0
    for p in xi.pieces:
        total = total + p.chi.evaluate(valuation) * np.exp(piece_log(p, valuation) - log_psi)
    return total if np.ndim(total) else float(total)
