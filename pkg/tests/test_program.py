import pytest

from hyprism import gallery
from hyprism.parser import parse_program, parse_term
from hyprism.terms import format_term
from hyprism.program import REAL, DiscreteParams, GaussianParams, format_program, validate_parameters


def test_gallery_loads():
    for name in gallery.names():
        prog = gallery.load(name)
        assert prog.clauses
        assert validate_parameters(prog) == []


def test_unknown_gallery_name():
    with pytest.raises(KeyError):
        gallery.load("nope")


def test_domains(fmix):
    assert fmix.domain_of(parse_term("m")) == (parse_term("a"), parse_term("b"))
    assert fmix.domain_of(parse_term("w(a)")) == REAL


def test_parameters(fmix):
    assert fmix.theta.lookup(parse_term("m")) == DiscreteParams((0.3, 0.7))
    assert fmix.theta.lookup(parse_term("w(b)")) == GaussianParams(3.0, 1.0)


def test_format_program_reparses(kalman):
    again = parse_program(format_program(kalman))
    assert format_program(again) == format_program(kalman)
    assert again.theta.items() == kalman.theta.items()


def test_full_precision_parameters_roundtrip(fmix):
    p = DiscreteParams((0.1 + 0.2, 1 - (0.1 + 0.2)))
    theta = fmix.theta.updated([(parse_term("m"), p)])
    again = parse_program(format_program(fmix, theta))
    assert again.theta.lookup(parse_term("m")) == p


def test_validate_reports_bad_vectors():
    prog = parse_program("values(m, [a]).\n:- set_sw(m, [0.5, 0.6]).\np(X) :- msw(m, X).")
    messages = [v.message for v in validate_parameters(prog)]
    assert any("probabilities" in m for m in messages)


def test_validate_reports_small_variance():
    prog = parse_program("values(g, real).\n:- set_sw(g, norm(0.0, 1e-9)).\np(X) :- msw(g, X).")
    assert validate_parameters(prog)


def test_declared_instances(sprinkler):
    inst = sprinkler.declared_instances(parse_term("sprinkler(_)"))
    assert [format_term(t) for t in inst] == ["sprinkler(yes)", "sprinkler(no)"]
