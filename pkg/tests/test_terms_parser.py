import pytest

from hyprism.errors import ParseError, ProgramError
from hyprism.parser import parse_program, parse_query, parse_term, query_vars
from hyprism.program import Call, LinearConstraint, Msw
from hyprism.terms import NIL, Atom, Num, Struct, Var, format_term, is_ground, make_list, resolve, unify


def test_parse_term_roundtrip():
    text = "f(X, [1, 2|T], 'A b', -3.5e2)"
    assert format_term(parse_term(text)) == text


def test_numbers_compare_by_value():
    assert parse_term("1") == parse_term("1.0")
    assert isinstance(parse_term("2.5"), Num)


def test_lists():
    t = parse_term("[a, b]")
    assert t == make_list([Atom("a"), Atom("b")])
    assert parse_term("[]") == NIL


def test_anonymous_vars_are_distinct():
    t = parse_term("f(_, _)")
    a, b = t.args
    assert a != b


def test_same_name_same_var_within_term():
    t = parse_term("f(X, X)")
    assert t.args[0] == t.args[1]


def test_unify_binds_and_resolves():
    x, y = Var("X"), Var("Y")
    s = unify(Struct("f", (x, Atom("b"))), Struct("f", (Atom("a"), y)))
    assert resolve(x, s) == Atom("a")
    assert resolve(y, s) == Atom("b")


def test_unify_occurs_check():
    x = Var("X")
    assert unify(x, Struct("f", (x,))) is None


def test_unify_clash():
    assert unify(Atom("a"), Atom("b")) is None
    assert unify(Struct("f", (Atom("a"),)), Struct("g", (Atom("a"),))) is None


def test_is_ground():
    assert is_ground(parse_term("f(a, [1, 2])"))
    assert not is_ground(parse_term("f(a, X)"))


def test_clause_bodies(kalman):
    (clause,) = [c for c in kalman.clauses if c.key == ("kf_steps", 3) and c.body]
    kinds = [type(g) for g in clause.body]
    assert kinds == [Msw, LinearConstraint, Msw, LinearConstraint, Call]
    assert clause.body[0].instance is not None


def test_constraint_equation():
    prog = parse_program("values(s, real).\np(X, Y) :- msw(s, Y), X = 2*Y + 1.")
    (c,) = [g for g in prog.clauses[0].body if isinstance(g, LinearConstraint)]
    coefs, const = c.equation()
    x, y = prog.clauses[0].head.args
    # Solutions of coefs.x + const = 0 are exactly X = 2Y + 1.
    assert coefs[y] / coefs[x] == pytest.approx(-2.0)
    assert const / coefs[x] == pytest.approx(-1.0)


def test_nonlinear_constraint_rejected():
    with pytest.raises(ParseError):
        parse_program("p(X) :- X = 2*Y + Z*W.")


def test_undeclared_switch_rejected():
    with pytest.raises(ProgramError, match="nosuch"):
        parse_program("p(X) :- msw(nosuch, X).")


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as e:
        parse_program("p(a).\np(X :- q.")
    assert e.value.line == 2


def test_query_must_call_defined_predicate(fmix):
    with pytest.raises(ProgramError, match="undefined"):
        parse_query("nope(X)", fmix)


def test_query_vars_skip_anonymous(fmix):
    q = parse_query("fmix(X)", fmix)
    assert [v.name for v in query_vars(q)] == ["X"]


def test_groundness_is_cached_on_structs():
    t = parse_term("f(a, [1, g(b)])")
    assert t.ground and t.args[1].ground
    assert not parse_term("f(a, [1, g(X)])").ground


def test_resolve_keeps_unchanged_subterms():
    x = Var("X")
    tail = parse_term("[1, 2, 3]")
    t = Struct(".", (x, tail))
    r = resolve(t, {x: Atom("a")})
    assert r.args[1] is tail
    assert resolve(tail, {x: Atom("a")}) is tail
