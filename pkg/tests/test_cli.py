import json
import math
import re

import pytest

from hyprism import gallery
from hyprism.cli import main
from hyprism.density import evaluate
from hyprism.em import log_likelihood, parse_examples
from hyprism.oracles import enumerate_prob
from hyprism.parser import parse_program, parse_query
from hyprism.success import query_success


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out.rstrip("\n"), out.err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_psi_fmix(capsys):
    code, out, _ = run(capsys, "psi", "-p", "gallery:fmix", "-q", "fmix(X)")
    assert code == 0
    assert out == "0.3*N(X; 2.0, 1.0) + 0.7*N(X; 3.0, 1.0)"


def test_psi_from_file(capsys, tmp_path):
    path = write(tmp_path, "fmix.psm", gallery.source("fmix"))
    code, out, _ = run(capsys, "psi", "-p", path, "-q", "fmix(X)")
    assert code == 0 and out.startswith("0.3*N(X;")


def test_psi_hybrid(capsys):
    code, out, _ = run(capsys, "psi", "-p", "gallery:hybrid", "-q", "f(X)")
    assert out == "0.3*N(X; 2.0, 1.0) + 0.35*delta(X; 1.0) + 0.35*delta(X; 2.0)"


def test_psi_zero_derivations(capsys, tmp_path):
    path = write(tmp_path, "p.psm", "p(a).\np(b).\n")
    code, out, _ = run(capsys, "psi", "-p", path, "-q", "p(c)")
    assert (code, out) == (0, "0")


def test_psi_debug_and_json(capsys):
    _, out, _ = run(capsys, "psi", "-p", "gallery:kalman", "-q", "kf_state([0.5, 1.2, 0.9], S)", "--debug")
    assert out.startswith("<0.0343799803, [], [N(S; 0.926732673, 0.183168317)], {}>")
    _, out, _ = run(capsys, "psi", "-p", "gallery:fmix", "-q", "fmix(X)", "--format", "json")
    doc = json.loads(out)
    assert [t["k"] for t in doc["psi"]] == pytest.approx([0.3, 0.7], rel=1e-15)
    assert doc["psi"][0]["gaussians"][0]["mean"] == 2.0


def test_density_ground(capsys):
    code, out, _ = run(capsys, "density", "-p", "gallery:fmix", "-q", "fmix(2.0)")
    assert code == 0
    assert float(out) == pytest.approx(0.2890630, abs=1e-6)


def test_density_at(capsys):
    _, out, _ = run(capsys, "density", "-p", "gallery:fmix", "-q", "fmix(X)", "--at", "X=2.0", "--format", "json")
    doc = json.loads(out)
    want = 0.3 * math.exp(-0.0) / math.sqrt(2 * math.pi) + 0.7 * math.exp(-0.5) / math.sqrt(2 * math.pi)
    assert doc["value"] == pytest.approx(want, rel=1e-14)


def test_density_needs_values(capsys):
    code, _, err = run(capsys, "density", "-p", "gallery:fmix", "-q", "fmix(X)")
    assert code == 1 and "--at" in err


def test_prob_discrete_matches_enumeration(capsys, sprinkler):
    for goal in ("world(yes, on, no, yes)", "world(no, off, yes, yes)"):
        _, out, _ = run(capsys, "prob", "-p", "gallery:sprinkler", "-q", goal, "--format", "json")
        want = enumerate_prob(sprinkler, parse_query(goal, sprinkler))
        assert json.loads(out)["value"] == pytest.approx(want, abs=1e-15)


def test_prob_impossible_is_zero(capsys):
    _, out, _ = run(capsys, "prob", "-p", "gallery:sprinkler", "-q", "world(no, off, no, yes)")
    assert out == "0.0"


def test_prob_rejects_continuous(capsys):
    code, _, err = run(capsys, "prob", "-p", "gallery:fmix", "-q", "fmix(2.0)")
    assert code == 3 and "density" in err


def test_exit_code_parse_error(capsys, tmp_path):
    path = write(tmp_path, "bad.psm", "p(X :- q.\n")
    code, _, err = run(capsys, "psi", "-p", path, "-q", "p(a)")
    assert code == 1 and "line 1" in err
    code, _, _ = run(capsys, "psi", "-p", "gallery:fmix", "-q", "fmix(X")
    assert code == 1


def test_exit_code_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "psi", "-p", str(tmp_path / "nope.psm"), "-q", "p")
    assert code == 1 and "cannot read" in err


def test_exit_code_derivation_limit(capsys, tmp_path):
    path = write(tmp_path, "grow.psm", "grow(X) :- grow(f(X)).\n")
    code, _, err = run(capsys, "psi", "-p", path, "-q", "grow(a)", "--max-depth", "40")
    assert code == 2 and "depth" in err


def test_exit_code_cycle(capsys, tmp_path):
    path = write(tmp_path, "loop.psm", "p(X) :- p(X).\n")
    code, _, _ = run(capsys, "psi", "-p", path, "-q", "p(a)")
    assert code == 2


def test_exit_code_type_error(capsys, tmp_path):
    src = "values(c, [h, t]).\nvalues(g, real).\n:- set_sw(c, [0.5, 0.5]).\n:- set_sw(g, norm(0.0, 1.0)).\nf(X) :- msw(c, X), msw(g, X).\n"
    path = write(tmp_path, "t.psm", src)
    code, _, _ = run(capsys, "psi", "-p", path, "-q", "f(X)")
    assert code == 3


def test_sample_deterministic(capsys):
    _, a, _ = run(capsys, "sample", "-p", "gallery:fmix", "-q", "fmix(X)", "-n", "3", "--seed", "5")
    _, b, _ = run(capsys, "sample", "-p", "gallery:fmix", "-q", "fmix(X)", "-n", "3", "--seed", "5")
    assert a == b
    lines = a.splitlines()
    assert len(lines) == 3
    assert all(re.fullmatch(r"fmix\(-?[0-9.e+-]+\)\.", line) for line in lines)


def test_sample_zero_writes_empty_file(capsys, tmp_path):
    out = tmp_path / "d.txt"
    code, _, _ = run(capsys, "sample", "-p", "gallery:fmix", "-q", "fmix(X)", "-n", "0", "-o", str(out))
    assert code == 0 and out.read_text() == ""


def test_learn_max_iters_zero_echoes_init(capsys, tmp_path):
    data = write(tmp_path, "d.txt", "fmix(1.0).\nfmix(2.5).\n")
    code, out, _ = run(capsys, "learn", "-p", "gallery:fmix", "-d", data, "--max-iters", "0")
    assert code == 0
    assert ":- set_sw(m, [0.3, 0.7])." in out
    assert ":- set_sw(w(a), norm(2.0, 1.0))." in out


def test_learn_output_reloads(capsys, tmp_path):
    data = write(tmp_path, "d.txt", "".join(f"fmix({x}).\n" for x in (1.2, 2.9, 3.4, 0.8, 2.2, 3.1)))
    saved = tmp_path / "learned.psm"
    code, out, _ = run(capsys, "learn", "-p", "gallery:fmix", "-d", data, "--max-iters", "15", "--format", "json", "-o", str(saved))
    assert code == 0
    doc = json.loads(out)
    assert {"theta", "log_likelihood", "iterations", "history"} <= set(doc)
    assert doc["iterations"] == len(doc["history"])
    prog = parse_program(saved.read_text())
    ex = parse_examples((tmp_path / "d.txt").read_text())
    assert log_likelihood(prog, ex) == pytest.approx(doc["log_likelihood"], abs=1e-12)
    total = math.fsum(math.log(evaluate(query_success(prog, e.goal))) for e in ex)
    assert total == pytest.approx(doc["log_likelihood"], abs=1e-12)


def test_learn_text_and_json_agree(capsys, tmp_path):
    data = write(tmp_path, "d.txt", "fmix(1.0).\nfmix(2.5).\nfmix(3.5).\n")
    _, text, _ = run(capsys, "learn", "-p", "gallery:fmix", "-d", data, "--max-iters", "4", "--ll-tol", "0")
    _, js, _ = run(capsys, "learn", "-p", "gallery:fmix", "-d", data, "--max-iters", "4", "--ll-tol", "0", "--format", "json")
    doc = json.loads(js)
    traced = [float(m) for m in re.findall(r"log-likelihood (\S+)", text)]
    assert traced == pytest.approx([doc["initial_log_likelihood"]] + doc["history"], rel=1e-8)
    assert "not converged after 4 iterations; last delta" in text
    for entry in doc["theta"]:
        if "mean" in entry:
            assert f"set_sw({entry['switch']}, norm({entry['mean']!r}, {entry['var']!r}))" in text


def test_learn_unprovable_example(capsys, tmp_path):
    prog = write(tmp_path, "c.psm", "values(c, [h, t]).\n:- set_sw(c, [1.0, 0.0]).\nf(X) :- msw(c, X).\n")
    data = write(tmp_path, "d.txt", "f(h).\n\nf(t).\n")
    code, _, err = run(capsys, "learn", "-p", prog, "-d", data)
    assert code == 1 and "line 3" in err


def test_learn_csv(capsys, tmp_path):
    data = write(tmp_path, "d.csv", "1.0\n2.0\n3.0\n")
    code, out, _ = run(capsys, "learn", "-p", "gallery:fmix", "-d", data, "--goal", "fmix($1)", "--max-iters", "2")
    assert code == 0 and "set_sw(w(a)" in out


def test_learn_complete_bn_data(capsys, tmp_path):
    rows = ["world(yes, on, yes, yes)", "world(yes, off, yes, yes)", "world(no, off, no, no)", "world(no, on, no, yes)"]
    data = write(tmp_path, "d.txt", "".join(r + ".\n" for r in rows))
    _, out, _ = run(capsys, "learn", "-p", "gallery:sprinkler", "-d", data, "--max-iters", "1", "--format", "json")
    theta = {e["switch"]: e for e in json.loads(out)["theta"]}
    assert theta["cloudy"]["probs"] == pytest.approx([0.5, 0.5], abs=1e-10)
    assert theta["sprinkler(yes)"]["probs"] == pytest.approx([0.5, 0.5], abs=1e-10)
    assert theta["rain(no)"]["probs"] == pytest.approx([0.0, 1.0], abs=1e-10)
