"""Text and JSON rendering of success and ESS functions.

Text grammar (one line)::

    psi      := "0" | term (" + " term)*
    term     := body | "<" body ", {" eq ("; " eq)* "}>"
    body     := [chi "*"] [coef "*"] factor ("*" factor)* | coef
    factor   := "delta(" var "; " point ")" | "N(" form "; " mean ", " var ")"
    eq       := var " = " form

Coefficients, means and variances print with 9 significant digits and a
decimal point.  A coefficient of exactly 1 is omitted when factors follow.
Variables that share a name inside one rendered object get an ``_<id>``
suffix.

The debug form lists every term as ``<k, [deltas], [gaussians], {eqs}>``.
"""

from __future__ import annotations

import math

from .terms import Var, format_term


def fmt(x: float, digits: int = 9) -> str:
    """``x`` with ``digits`` significant digits, always showing a decimal
    point or exponent."""
    x = float(x) + 0.0
    if x == 0.0:
        x = 0.0
    if not math.isfinite(x):
        return repr(x)
    s = format(x, f".{digits}g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


class Namer:
    """Stable display names; disambiguates distinct variables with equal
    names."""

    def __init__(self, variables=()):
        by_name: dict = {}
        for v in variables:
            by_name.setdefault(v.name, set()).add(v)
        self.clash = {n for n, vs in by_name.items() if len(vs) > 1 or n == "_"}

    def __call__(self, v: Var) -> str:
        if v.name in self.clash:
            return f"{'G' if v.name == '_' else v.name}_{v.id}"
        return v.name


def _name_all(obj) -> Namer:
    return Namer(obj.vars)


def render_form(f, namer: Namer | None = None) -> str:
    namer = namer or _name_all(f)
    parts = []
    for v, a in f.sorted_items():
        name = namer(v)
        if a == 1.0:
            parts.append(name)
        elif a == -1.0:
            parts.append("-" + name)
        else:
            parts.append(f"{fmt(a)}*{name}")
    if f.const != 0.0 or not parts:
        parts.append(fmt(f.const))
    return _join_signed(parts)


def _join_signed(parts: list[str]) -> str:
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def render_gaussian(g, namer: Namer | None = None) -> str:
    namer = namer or _name_all(g)
    return f"N({render_form(g.form, namer)}; {fmt(g.mean)}, {fmt(g.var)})"


def render_delta(d, namer: Namer) -> str:
    point = fmt(d.point) if d.continuous else format_term(d.point)
    return f"delta({namer(d.var)}; {point})"


def render_constraints(cs, namer: Namer | None = None) -> str:
    namer = namer or _name_all(cs)
    eqs = [f"{namer(p)} = {render_form(rhs, namer)}" for p, rhs in cs.rows]
    return "{" + "; ".join(eqs) + "}"


def render_quadratic(q, namer: Namer | None = None) -> str:
    namer = namer or Namer(q.vars)
    parts = []
    for (a, b), c in sorted(q.quad.items(), key=lambda kv: (kv[0][0].id, kv[0][1].id)):
        mono = f"{namer(a)}^2" if a == b else f"{namer(a)}*{namer(b)}"
        parts.append(_coef_mono(c, mono))
    for v, c in sorted(q.lin.items(), key=lambda kv: kv[0].id):
        parts.append(_coef_mono(c, namer(v)))
    if q.const != 0.0 or not parts:
        parts.append(fmt(q.const))
    return _join_signed(parts)


def _coef_mono(c: float, mono: str) -> str:
    if c == 1.0:
        return mono
    if c == -1.0:
        return "-" + mono
    return f"{fmt(c)}*{mono}"


def render_piece(p, namer: Namer) -> str:
    factors = [render_delta(d, namer) for d in p.ppdf.deltas]
    factors += [render_gaussian(g, namer) for g in p.ppdf.gaussians]
    coef = fmt(p.ppdf.k)
    if factors:
        body = "*".join(factors if coef == "1.0" else [coef] + factors)
    else:
        body = coef
    chi = p.chi
    if chi is not None and not (chi.is_constant() and chi.const == 1.0):
        text = render_quadratic(chi, namer)
        simple = len(chi.lin) + len(chi.quad) == 1 and chi.const == 0.0 and not text.startswith("-")
        if simple and "*" not in text:
            body = f"{text}*{body}"
        else:
            body = f"({text})*{body}"
    if p.cons:
        return f"<{body}, {render_constraints(p.cons, namer)}>"
    return body


def render_success(psi) -> str:
    if not psi.pieces:
        return "0"
    namer = Namer(psi.vars)
    return " + ".join(render_piece(p, namer) for p in psi.pieces)


def render_debug(psi) -> str:
    if not psi.pieces:
        return "0"
    namer = Namer(psi.vars)
    out = []
    for p in psi.pieces:
        deltas = ", ".join(render_delta(d, namer) for d in p.ppdf.deltas)
        gs = ", ".join(render_gaussian(g, namer) for g in p.ppdf.gaussians)
        cons = render_constraints(p.cons, namer)
        head = fmt(p.ppdf.k)
        if p.chi is not None:
            head = f"({render_quadratic(p.chi, namer)})*{head}"
        out.append(f"<{head}, [{deltas}], [{gs}], {cons}>")
    return " + ".join(out)


def _form_json(f, namer: Namer) -> dict:
    return {"coefs": {namer(v): a for v, a in f.sorted_items()}, "const": f.const}


def success_json(psi) -> list[dict]:
    """Structured terms with full-precision numbers."""
    namer = Namer(psi.vars)
    out = []
    for p in psi.pieces:
        term = {
            "log_k": p.ppdf.logk,
            "k": p.ppdf.k,
            "deltas": [
                {"var": namer(d.var), "point": d.point if d.continuous else format_term(d.point)}
                for d in p.ppdf.deltas
            ],
            "gaussians": [
                {"form": _form_json(g.form, namer), "mean": g.mean, "var": g.var}
                for g in p.ppdf.gaussians
            ],
            "constraints": [
                {"var": namer(v), "rhs": _form_json(rhs, namer)} for v, rhs in p.cons.rows
            ],
        }
        if p.chi is not None:
            q = p.chi
            term["chi"] = {
                "quad": [[namer(a), namer(b), c] for (a, b), c in q.quad.items()],
                "lin": {namer(v): c for v, c in q.lin.items()},
                "const": q.const,
            }
        out.append(term)
    return out
