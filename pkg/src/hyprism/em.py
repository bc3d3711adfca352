"""Expectation-maximization over ground training goals.

Derivation structure does not depend on the parameters, so each training
goal is derived once and its success/ESS functions are re-evaluated under
the current parameters every iteration.

Goals that differ only in their numeric constants (``fmix(2.31)``,
``fmix(0.7)``, ...) share one derivation: the constants are replaced by
fresh variables, the lifted goal is derived once and its functions are
evaluated on arrays of observed values.  A group falls back to per-goal
derivation when a lifted variable is not tracked by the derivation (then
its binding carries logical rather than probabilistic meaning) or the
lifted derivation fails.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .density import log_evaluate
from .derivation import DerivationTree, Limits, derive
from .errors import (
    DerivationError,
    LearningError,
    ParameterError,
    ParseError,
    ProgramError,
    UnprovableExampleError,
)
from .ess import ESSKey, ess_ratio
from .parser import parse_term
from .program import (
    DEFAULT_VARIANCE_FLOOR,
    REAL,
    DiscreteParams,
    GaussianParams,
    ParameterSet,
    Program,
    predicate_key,
    validate_parameters,
)
from .success import Annotation, switches_used
from .terms import Atom, Num, Struct, Term, Var, format_term, is_ground

log = logging.getLogger(__name__)

MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class Example:
    goal: Term
    line: int | None = None

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line is not None else ""
        return f"{format_term(self.goal)}{where}"


# ------------------------------------------------------------------ data


def _check_example(t: Term, line: int | None, prog: Program | None) -> Example:
    if not isinstance(t, (Struct, Atom)):
        raise ProgramError(f"training example is not a goal: {format_term(t)} (line {line})")
    if not is_ground(t):
        raise ProgramError(f"training example {format_term(t)} is not ground (line {line})")
    if prog is not None and not prog.defines(predicate_key(t)):
        name, arity = predicate_key(t)
        raise ProgramError(f"training example calls undefined predicate {name}/{arity} (line {line})")
    return Example(t, line)


def parse_examples(text: str, prog: Program | None = None) -> list[Example]:
    """One ground goal per line, e.g. ``fmix(2.31).``; ``%`` starts a comment."""
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        try:
            t = parse_term(line)
        except ParseError as e:
            raise ParseError(f"bad training example: {e.message}", i, e.col) from None
        out.append(_check_example(t, i, prog))
    return out


_SLOT = re.compile(r"\$(\d+)")


def parse_csv_examples(text: str, template: str, prog: Program | None = None, header: bool = False) -> list[Example]:
    """Instantiate ``template`` (``$1``, ``$2``, ... name columns) once per
    CSV row."""
    out = []
    rows = csv.reader(io.StringIO(text))
    for i, row in enumerate(rows, start=1):
        if header and i == 1:
            continue
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue

        def cell(m):
            k = int(m.group(1))
            if not 1 <= k <= len(row):
                raise ProgramError(f"column ${k} missing on line {i}")
            return row[k - 1].strip()

        try:
            t = parse_term(_SLOT.sub(cell, template))
        except ParseError as e:
            raise ParseError(f"bad training example: {e.message}", i, e.col) from None
        out.append(_check_example(t, i, prog))
    return out


def numeric_values(examples) -> list[float]:
    out = []
    stack = [e.goal for e in examples]
    while stack:
        t = stack.pop()
        if isinstance(t, Num):
            out.append(t.value)
        elif isinstance(t, Struct):
            stack.extend(t.args)
    return out


# ------------------------------------------------------------ compilation


def _lift(t: Term, slots: list):
    if isinstance(t, Num):
        v = Var(f"_D{len(slots)}")
        slots.append(v)
        return v
    if isinstance(t, Struct):
        return Struct(t.functor, tuple(_lift(a, slots) for a in t.args))
    return t


def _shape(t: Term):
    if isinstance(t, Num):
        return "#"
    if isinstance(t, Struct):
        return (t.functor, tuple(_shape(a) for a in t.args))
    return t


def _nums(t: Term, out: list):
    if isinstance(t, Num):
        out.append(t.value)
    elif isinstance(t, Struct):
        for a in t.args:
            _nums(a, out)
    return out


@dataclass
class _Group:
    tree: DerivationTree
    indices: list
    valuation: dict = field(default_factory=dict)

    @property
    def lifted(self) -> bool:
        return bool(self.valuation)


def _derive_one(prog, ex: Example, limits) -> DerivationTree:
    tree = derive(prog, ex.goal, limits)
    if tree.num_derivations == 0:
        raise UnprovableExampleError(f"training example {ex} has no derivation", ex.line)
    return tree


def compile_examples(prog: Program, examples, limits: Limits | None = None, lift: bool = True) -> list[_Group]:
    groups: dict = {}
    for i, ex in enumerate(examples):
        groups.setdefault(_shape(ex.goal), []).append(i)
    out = []
    for idx in groups.values():
        if lift and len(idx) > 1:
            slots: list = []
            template = _lift(examples[idx[0]].goal, slots)
            if slots:
                try:
                    tree = derive(prog, template, limits)
                except (DerivationError, ProgramError, ParameterError):
                    tree = None
                if tree is not None and all(v in tree.types for v in slots):
                    cols = np.array([_nums(examples[i].goal, []) for i in idx], dtype=float)
                    val = {v: cols[:, j] for j, v in enumerate(slots)}
                    out.append(_Group(tree, list(idx), val))
                    continue
        for i in idx:
            out.append(_Group(_derive_one(prog, examples[i], limits), [i]))
    return out


# ------------------------------------------------------------------ E/M


@dataclass
class EStepResult:
    log_likelihood: float
    log_psi: np.ndarray  # per example, in input order
    stats: dict  # ESSKey -> sum_i xi_i / psi_i
    per_example: dict | None = None  # ESSKey -> array of xi_i / psi_i

    @property
    def psi(self) -> np.ndarray:
        return np.exp(self.log_psi)


def _eval_group(g: _Group, theta: ParameterSet, examples):
    ann = Annotation(g.tree, theta, ess=True)
    lp = np.broadcast_to(np.asarray(log_evaluate(ann.success(), g.valuation), dtype=float), (len(g.indices),))
    if np.any(np.isnan(lp)) or np.any(lp == np.inf):
        raise LearningError("numeric overflow evaluating success functions")
    bad = np.flatnonzero(lp == -np.inf)
    if bad.size:
        ex = examples[g.indices[int(bad[0])]]
        raise UnprovableExampleError(f"training example {ex} has zero probability/density", ex.line)
    ratios = {}
    for key, xi in ann.ess().items():
        ratios[key] = np.broadcast_to(np.asarray(ess_ratio(xi, lp, g.valuation), dtype=float), (len(g.indices),))
    return lp, ratios


def e_step(
    prog: Program,
    theta: ParameterSet,
    examples,
    groups=None,
    per_example: bool = False,
    threads: int = 1,
) -> EStepResult:
    """Evaluate ``psi_t`` and ``xi_t / psi_t`` for every example.

    With ``threads > 1`` groups are evaluated by a thread pool; results are
    reduced in example order either way, so the output does not depend on it.
    """
    if groups is None:
        groups = compile_examples(prog, examples)
    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda g: _eval_group(g, theta, examples), groups))
    else:
        parts = [_eval_group(g, theta, examples) for g in groups]
    n = len(examples)
    log_psi = np.empty(n)
    ratios: dict = {}
    for g, (lp, rs) in zip(groups, parts):
        log_psi[g.indices] = lp
        for key, r in rs.items():
            arr = ratios.get(key)
            if arr is None:
                arr = ratios[key] = np.zeros(n)
            arr[g.indices] = r
    for key, arr in ratios.items():
        if not np.all(np.isfinite(arr)):
            raise LearningError(f"non-finite expected statistic for {key}")
    stats = {k: math.fsum(v) for k, v in ratios.items()}
    ll = math.fsum(log_psi)
    return EStepResult(ll, log_psi, stats, ratios if per_example else None)


def _normalized(p: list[float]) -> tuple:
    s = math.fsum(p)
    q = [x / s for x in p]
    j = max(range(len(q)), key=lambda i: q[i])
    q[j] += 1.0 - math.fsum(q)
    return tuple(q)


def m_step(
    prog: Program,
    theta: ParameterSet,
    stats: dict,
    switches,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    smoothing: float = 0.0,
) -> tuple[ParameterSet, list[str]]:
    """Closed-form updates; returns the new parameters and warnings for
    switches whose statistics are all zero (left unchanged)."""
    changes = []
    warnings = []
    for sw in switches:
        dom = prog.domain_of(sw)
        if dom == REAL:
            n = stats.get(ESSKey(sw, "count"), 0.0)
            if not n > 0.0:
                warnings.append(f"switch {format_term(sw)} has zero expected count; parameters frozen")
                continue
            mu = stats.get(ESSKey(sw, "mean"), 0.0) / n
            var = stats.get(ESSKey(sw, "var"), 0.0) / n - mu * mu
            changes.append((sw, GaussianParams(mu, max(var, variance_floor))))
        else:
            eta = [stats.get(ESSKey(sw, "value", v), 0.0) + smoothing for v in dom]
            if not math.fsum(eta) > 0.0:
                warnings.append(f"switch {format_term(sw)} has zero expected count; parameters frozen")
                continue
            changes.append((sw, DiscreteParams(_normalized(eta))))
    return theta.updated(changes), warnings


# ------------------------------------------------------------ training


@dataclass
class EMConfig:
    max_iters: int = 100
    ll_tol: float = 1e-6
    seed: int = 0
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    smoothing: float = 0.0
    restarts: int = 1
    randomize: bool = False  # ignore set_sw values and draw a fresh start
    threads: int = 1
    limits: Limits | None = None

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.ll_tol >= 0.0:
            raise ValueError("ll_tol must be >= 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.variance_floor > 0.0:
            raise ValueError("variance_floor must be positive")
        if self.smoothing < 0.0:
            raise ValueError("smoothing must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class EMResult:
    theta: ParameterSet
    history: list  # log-likelihood after each iteration
    initial_theta: ParameterSet
    initial_log_likelihood: float
    converged: bool
    last_delta: float | None
    warnings: list
    thetas: list = field(default_factory=list)  # parameters after each iteration
    restart: int = 0

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def log_likelihood(self) -> float:
        return self.history[-1] if self.history else self.initial_log_likelihood


def initial_parameters(
    prog: Program,
    switches,
    data: list[float],
    rng: np.random.Generator,
    randomize: bool = False,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
) -> ParameterSet:
    """Keep declared parameters (unless ``randomize``) and fill in the rest:
    near-uniform discrete vectors with seeded Dirichlet jitter; Gaussians with
    a mean drawn uniformly over the data range and the data variance."""
    theta = prog.theta
    lo, hi = (min(data), max(data)) if data else (0.0, 1.0)
    dvar = float(np.var(data)) if len(data) > 1 else 1.0
    if not dvar > 0.0:
        dvar = 1.0
    changes = []
    for sw in switches:
        if not randomize and theta.lookup(sw) is not None:
            continue
        dom = prog.domain_of(sw)
        if dom == REAL:
            changes.append((sw, GaussianParams(float(rng.uniform(lo, hi)), max(dvar, variance_floor))))
        else:
            k = len(dom)
            jitter = rng.dirichlet(np.ones(k))
            changes.append((sw, DiscreteParams(_normalized([0.9 / k + 0.1 * x for x in jitter]))))
    return theta.updated(changes)


def _run_em(prog, examples, groups, switches, theta, config: EMConfig) -> EMResult:
    est = e_step(prog, theta, examples, groups, threads=config.threads)
    result = EMResult(theta, [], theta, est.log_likelihood, False, None, [])
    ll = est.log_likelihood
    for _ in range(config.max_iters):
        theta_new, warns = m_step(prog, theta, est.stats, switches, config.variance_floor, config.smoothing)
        for w in warns:
            if w not in result.warnings:
                result.warnings.append(w)
                log.warning(w)
        est = e_step(prog, theta_new, examples, groups, threads=config.threads)
        ll_new = est.log_likelihood
        if config.smoothing == 0.0 and ll_new < ll - MONOTONE_TOL:
            raise LearningError(
                f"log-likelihood decreased from {ll!r} to {ll_new!r} (internal error)"
            )
        result.history.append(ll_new)
        result.thetas.append(theta_new)
        result.last_delta = ll_new - ll
        theta, ll = theta_new, ll_new
        if abs(result.last_delta) < config.ll_tol:
            result.converged = True
            break
    result.theta = theta
    return result


def train(prog: Program, examples, config: EMConfig | None = None, theta: ParameterSet | None = None) -> EMResult:
    """Fit switch parameters to ``examples`` by EM.

    Restart 0 starts from ``theta`` (default: the program's parameters,
    completed by :func:`initial_parameters`); further restarts draw fresh
    starting points.  The run with the highest final log-likelihood wins.
    """
    config = config or EMConfig()
    examples = [e if isinstance(e, Example) else Example(e) for e in examples]
    if not examples:
        raise LearningError("no training examples")
    groups = compile_examples(prog, examples, config.limits)
    switches: list = []
    for g in groups:
        for sw in switches_used(g.tree):
            if sw not in switches:
                switches.append(sw)
    data = numeric_values(examples)
    base = prog if theta is None else prog.with_theta(theta)
    rng = np.random.default_rng(config.seed)
    best = None
    for r in range(config.restarts):
        randomize = config.randomize or r > 0
        start = initial_parameters(base, switches, data, rng, randomize, config.variance_floor)
        violations = validate_parameters(prog, start, config.variance_floor)
        if violations:
            raise ParameterError("; ".join(str(v) for v in violations))
        res = _run_em(prog, examples, groups, switches, start, config)
        res.restart = r
        if best is None or res.log_likelihood > best.log_likelihood:
            best = res
    return best


def log_likelihood(prog: Program, examples, theta: ParameterSet | None = None, limits: Limits | None = None) -> float:
    theta = prog.theta if theta is None else theta
    examples = [e if isinstance(e, Example) else Example(e) for e in examples]
    groups = compile_examples(prog, examples, limits)
    return e_step(prog, theta, examples, groups).log_likelihood


__all__ = [
    "EMConfig",
    "EMResult",
    "EStepResult",
    "Example",
    "compile_examples",
    "e_step",
    "initial_parameters",
    "log_likelihood",
    "m_step",
    "numeric_values",
    "parse_csv_examples",
    "parse_examples",
    "train",
]
