import json

from hyprism.density import SuccessFunction
from hyprism.parser import parse_program, parse_query
from hyprism.render import Namer, fmt, render_debug, render_success, success_json
from hyprism.success import query_success
from hyprism.terms import Var

SRC = """
values(w, real).
values(c, [1, 2]).
:- set_sw(w, norm(0.0, 1.0)).
:- set_sw(c, [0.25, 0.75]).
g(X, Y) :- msw(w, X), Y = X + 1.
h(X, Y) :- Y = X + 1.
k(Y) :- msw(c, X), msw(w, Z), Y = Z + X.
"""


def psi(q):
    prog = parse_program(SRC)
    return query_success(prog, parse_query(q, prog))


def test_fmt_keeps_a_decimal_point():
    assert fmt(1) == "1.0"
    assert fmt(-0.0) == "0.0"
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt(1e-300) == "1e-300"
    assert fmt(float("inf")) == "inf"


def test_unresolved_constraint_is_bracketed():
    assert render_success(psi("g(X, Y)")) == "<N(X; 0.0, 1.0), {X = Y - 1.0}>"


def test_constraint_without_density_keeps_coefficient():
    assert render_success(psi("h(X, Y)")) == "<1.0, {X = Y - 1.0}>"
    assert render_debug(psi("h(X, Y)")) == "<1.0, [], [], {X = Y - 1.0}>"


def test_shifted_mixture():
    assert render_success(psi("k(Y)")) == "0.25*N(Y; 1.0, 1.0) + 0.75*N(Y; 2.0, 1.0)"


def test_zero():
    assert render_success(SuccessFunction.zero()) == "0"
    assert render_debug(SuccessFunction.zero()) == "0"


def test_namer_disambiguates_equal_names():
    a, b, c = Var("X"), Var("X"), Var("Y")
    n = Namer([a, b, c])
    assert n(a) != n(b) and n(a).startswith("X_")
    assert n(c) == "Y"
    g = Var("_")
    assert Namer([g])(g) == f"G_{g.id}"


def test_json_carries_full_precision():
    doc = success_json(psi("k(Y)"))
    json.dumps(doc)
    assert [t["k"] for t in doc] == [0.25, 0.75]
    assert doc[1]["gaussians"][0] == {"form": {"coefs": {"Y": 1.0}, "const": 0.0}, "mean": 2.0, "var": 1.0}
