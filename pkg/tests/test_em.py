import math
import random

import numpy as np
import pytest

from hyprism.em import (
    EMConfig,
    compile_examples,
    e_step,
    log_likelihood,
    m_step,
    parse_csv_examples,
    parse_examples,
    train,
)
from hyprism.errors import LearningError, ParseError, ProgramError, UnprovableExampleError
from hyprism.ess import ESSKey
from hyprism.oracles import enumeration_em, gmm_em_reference
from hyprism.parser import parse_program, parse_term
from hyprism.program import DiscreteParams, GaussianParams, format_program
from hyprism.success import switches_used

POINTS = [1.2, 2.9, 3.4, 0.8, 2.2]


def fmix_examples(xs):
    return parse_examples("".join(f"fmix({float(x)!r}).\n" for x in xs))


def gmm_params(theta):
    m = theta.lookup(parse_term("m")).probs
    a, b = theta.lookup(parse_term("w(a)")), theta.lookup(parse_term("w(b)"))
    return np.array(m), np.array([a.mean, b.mean]), np.array([a.var, b.var])


def test_parse_examples_tracks_lines():
    ex = parse_examples("% header\nfmix(1.5).\n\nfmix(2.0).  % trailing\n")
    assert [e.line for e in ex] == [2, 4]


def test_parse_examples_rejects_nonground():
    with pytest.raises(ProgramError, match="line 1"):
        parse_examples("fmix(X).\n")


def test_parse_examples_reports_bad_line():
    with pytest.raises(ParseError) as e:
        parse_examples("fmix(1.0).\nfmix(.\n")
    assert e.value.line == 2


def test_csv_template(fmix):
    ex = parse_csv_examples("x\n1.5\n2.25\n", "fmix($1)", fmix, header=True)
    assert [e.goal.args[0].value for e in ex] == [1.5, 2.25]
    assert [e.line for e in ex] == [2, 3]
    with pytest.raises(ProgramError):
        parse_csv_examples("1.0\n", "fmix($2)", fmix)


def test_lifted_and_per_example_e_steps_agree(fmix):
    ex = fmix_examples(POINTS)
    lifted = compile_examples(fmix, ex)
    assert len(lifted) == 1 and lifted[0].lifted
    plain = compile_examples(fmix, ex, lift=False)
    a = e_step(fmix, fmix.theta, ex, lifted)
    b = e_step(fmix, fmix.theta, ex, plain)
    assert a.log_likelihood == pytest.approx(b.log_likelihood, rel=1e-13)
    for k in b.stats:
        assert a.stats[k] == pytest.approx(b.stats[k], rel=1e-12)


def test_responsibilities_sum_to_one(fmix):
    ex = fmix_examples(POINTS)
    est = e_step(fmix, fmix.theta, ex, per_example=True)
    ra = est.per_example[ESSKey(parse_term("m"), "value", parse_term("a"))]
    rb = est.per_example[ESSKey(parse_term("m"), "value", parse_term("b"))]
    assert np.all((ra >= 0) & (ra <= 1))
    assert np.allclose(ra + rb, 1.0, atol=1e-15)


def test_one_iteration_matches_textbook_gmm(fmix):
    ex = fmix_examples(POINTS)
    est = e_step(fmix, fmix.theta, ex)
    theta, warns = m_step(fmix, fmix.theta, est.stats, switches_used(compile_examples(fmix, ex)[0].tree))
    assert not warns
    w, mu, var = gmm_em_reference(POINTS, 2, gmm_params(fmix.theta), iters=1)[0]
    got = gmm_params(theta)
    for x, y in zip(got, (w, mu, var)):
        assert np.allclose(x, y, rtol=0, atol=1e-10)


def test_discrete_vectors_sum_to_one(fmix):
    res = train(fmix, fmix_examples(POINTS), EMConfig(max_iters=5))
    for th in res.thetas:
        p = th.lookup(parse_term("m")).probs
        assert math.fsum(p) == pytest.approx(1.0, abs=1e-15)
        assert min(p) >= 0.0


def test_max_iters_zero_returns_initialization(fmix):
    res = train(fmix, fmix_examples(POINTS), EMConfig(max_iters=0))
    assert res.history == []
    assert res.theta == fmix.theta
    assert res.log_likelihood == res.initial_log_likelihood


def test_likelihood_is_monotone(fmix):
    rng = np.random.default_rng(3)
    xs = np.concatenate([rng.normal(0, 1, 40), rng.normal(4, 1, 60)])
    res = train(fmix, fmix_examples(xs), EMConfig(max_iters=50, ll_tol=0.0))
    seq = [res.initial_log_likelihood] + res.history
    assert all(b >= a - 1e-9 for a, b in zip(seq, seq[1:]))


def test_convergence_flag(fmix):
    res = train(fmix, fmix_examples(POINTS), EMConfig(max_iters=1000, ll_tol=1e-10))
    assert res.converged
    assert abs(res.last_delta) < 1e-10
    short = train(fmix, fmix_examples(POINTS), EMConfig(max_iters=2, ll_tol=0.0))
    assert not short.converged and short.iterations == 2 and short.last_delta is not None


def test_permutation_invariance(fmix):
    xs = list(np.random.default_rng(1).normal(2.5, 1.2, 200))
    ys = xs[:]
    random.Random(0).shuffle(ys)
    a = train(fmix, fmix_examples(xs), EMConfig(max_iters=10))
    b = train(fmix, fmix_examples(ys), EMConfig(max_iters=10))
    for x, y in zip(gmm_params(a.theta), gmm_params(b.theta)):
        assert np.allclose(x, y, rtol=0, atol=1e-9)


def test_threads_do_not_change_result(hmm):
    ex = parse_examples("hmm([a, b]).\nhmm([b]).\nhmm([a, a, b]).\nhmm([b, b, b, a]).\n")
    a = train(hmm, ex, EMConfig(max_iters=5))
    b = train(hmm, ex, EMConfig(max_iters=5, threads=4))
    assert a.history == b.history


def test_complete_data_gives_relative_frequencies(sprinkler):
    rows = ["world(yes, on, yes, yes)", "world(yes, off, yes, yes)", "world(no, off, no, no)",
            "world(no, on, no, yes)", "world(yes, off, yes, no)", "world(no, off, yes, yes)"]
    ex = parse_examples("\n".join(r + "." for r in rows))
    res = train(sprinkler, ex, EMConfig(max_iters=1))
    cloudy = res.theta.lookup(parse_term("cloudy")).probs
    assert cloudy[0] == pytest.approx(3 / 6, abs=1e-10)
    sp = res.theta.lookup(parse_term("sprinkler(no)")).probs
    assert sp[0] == pytest.approx(1 / 3, abs=1e-10)
    rain = res.theta.lookup(parse_term("rain(yes)")).probs
    assert rain == pytest.approx((1.0, 0.0), abs=1e-10)
    # A second iteration changes nothing.
    again = train(sprinkler, ex, EMConfig(max_iters=3, ll_tol=0.0))
    assert again.history[1] == pytest.approx(again.history[0], abs=1e-12)


def test_discrete_trajectory_matches_enumeration_em(hmm):
    goals = ["hmm([a, b, a])", "hmm([b, b])", "hmm([a])", "hmm([b, a, a, b])"]
    ex = parse_examples("\n".join(g + "." for g in goals))
    res = train(hmm, ex, EMConfig(max_iters=10, ll_tol=0.0))
    ref = enumeration_em(hmm, [e.goal for e in ex], hmm.theta, iters=10)
    assert len(res.thetas) == 10
    for got, want in zip(res.thetas, ref):
        for sw, p in want.items():
            assert np.allclose(got.lookup(sw).probs, p.probs, rtol=0, atol=1e-10)


def test_unprovable_example_names_line(fmix):
    prog = parse_program("values(c, [h, t]).\n:- set_sw(c, [1.0, 0.0]).\nf(X) :- msw(c, X).")
    ex = parse_examples("f(h).\nf(t).\n")
    with pytest.raises(UnprovableExampleError) as e:
        train(prog, ex)
    assert e.value.index == 2
    assert "line 2" in str(e.value)


def test_unused_gaussian_is_frozen_with_warning(fmix):
    theta = fmix.theta.updated([(parse_term("m"), DiscreteParams((1.0, 0.0)))])
    res = train(fmix, fmix_examples(POINTS), EMConfig(max_iters=3), theta=theta)
    assert res.theta.lookup(parse_term("w(b)")) == GaussianParams(3.0, 1.0)
    assert any("w(b)" in w for w in res.warnings)
    a = res.theta.lookup(parse_term("w(a)"))
    assert a.mean == pytest.approx(np.mean(POINTS), abs=1e-12)
    assert a.var == pytest.approx(np.var(POINTS), abs=1e-12)


def test_variance_floor(fmix):
    res = train(fmix, fmix_examples([1.0, 1.0, 1.0, 5.0]), EMConfig(max_iters=30, variance_floor=1e-3))
    for sw in ("w(a)", "w(b)"):
        assert res.theta.lookup(parse_term(sw)).var >= 1e-3


def test_smoothing_keeps_values_alive():
    prog = parse_program("values(c, [h, t]).\nf(X) :- msw(c, X).")
    ex = parse_examples("f(h).\nf(h).\n")
    plain = train(prog, ex, EMConfig(max_iters=1))
    assert plain.theta.lookup(parse_term("c")).probs[1] == 0.0
    smooth = train(prog, ex, EMConfig(max_iters=1, smoothing=1.0))
    assert smooth.theta.lookup(parse_term("c")).probs == pytest.approx((0.75, 0.25))


def test_initialization_fills_missing_parameters():
    prog = parse_program("values(m, [a, b]).\nvalues(w(_), real).\nfmix(X) :- msw(m, M), msw(w(M), X).")
    ex = fmix_examples(POINTS)
    a = train(prog, ex, EMConfig(max_iters=0, seed=7))
    b = train(prog, ex, EMConfig(max_iters=0, seed=7))
    assert a.theta == b.theta
    p = a.theta.lookup(parse_term("m")).probs
    assert all(abs(x - 0.5) <= 0.05 + 1e-12 for x in p)
    for sw in ("w(a)", "w(b)"):
        g = a.theta.lookup(parse_term(sw))
        assert min(POINTS) <= g.mean <= max(POINTS)
        assert g.var == pytest.approx(np.var(POINTS))


def test_restarts_keep_best(fmix):
    xs = list(np.random.default_rng(5).normal(2.5, 1.0, 60))
    one = train(fmix, fmix_examples(xs), EMConfig(max_iters=20))
    many = train(fmix, fmix_examples(xs), EMConfig(max_iters=20, restarts=4, seed=2))
    assert many.log_likelihood >= one.log_likelihood - 1e-12


def test_learned_parameters_reload(fmix):
    ex = fmix_examples(POINTS)
    res = train(fmix, ex, EMConfig(max_iters=7))
    reloaded = parse_program(format_program(fmix, res.theta))
    assert log_likelihood(reloaded, ex) == pytest.approx(res.log_likelihood, abs=1e-12)


def test_kalman_learning_is_monotone(kalman):
    ex = parse_examples("kf([0.5, 1.2, 0.9]).\nkf([0.1, -0.4, 0.3]).\nkf([1.0, 1.5, 2.5]).\n")
    res = train(kalman, ex, EMConfig(max_iters=20, ll_tol=0.0))
    seq = [res.initial_log_likelihood] + res.history
    assert all(b >= a - 1e-9 for a, b in zip(seq, seq[1:]))


def test_hybrid_learning_runs(hybrid):
    ex = parse_examples("f(1.0).\nf(2.0).\nf(2.3).\nf(1.0).\nf(0.4).\n")
    res = train(hybrid, ex, EMConfig(max_iters=10))
    seq = [res.initial_log_likelihood] + res.history
    assert all(b >= a - 1e-9 for a, b in zip(seq, seq[1:]))


def test_no_examples(fmix):
    with pytest.raises(LearningError):
        train(fmix, [])


def test_config_validation():
    with pytest.raises(ValueError):
        EMConfig(max_iters=-1)
    with pytest.raises(ValueError):
        EMConfig(restarts=0)
    with pytest.raises(ValueError):
        EMConfig(variance_floor=0.0)
