"""Probabilistic logic programs over discrete and Gaussian random switches.

Programs mix definite clauses, ``msw`` random choices and linear equality
constraints.  Queries are answered symbolically: derivations skip random
choices and record their effect in success functions (sums of constrained
products of deltas and Gaussians), and parameters are fit by EM using
expected-sufficient-statistics functions of the same shape.
"""

from .density import SuccessFunction, evaluate, integrate_out, log_evaluate, marginalize
from .derivation import DerivationTree, Limits, derive, infer_types
from .em import EMConfig, EMResult, e_step, m_step, parse_csv_examples, parse_examples, train
from .errors import (
    AlgebraError,
    CycleError,
    DerivationError,
    DerivationLimitError,
    HyprismError,
    LearningError,
    ParameterError,
    ParseError,
    ProgramError,
    TypeConflictError,
    UnprovableExampleError,
)
from .ess import ESSKey, ess_evaluate
from .parser import parse_program, parse_query, parse_term
from .program import ParameterSet, Program, format_program, set_sw_lines
from .render import render_debug, render_success, success_json
from .success import goal_ess, goal_ess_all, goal_success, query_success

__version__ = "0.1.0"

__all__ = [
    "AlgebraError",
    "CycleError",
    "DerivationError",
    "DerivationLimitError",
    "DerivationTree",
    "EMConfig",
    "EMResult",
    "ESSKey",
    "HyprismError",
    "LearningError",
    "Limits",
    "ParameterError",
    "ParameterSet",
    "ParseError",
    "Program",
    "ProgramError",
    "SuccessFunction",
    "TypeConflictError",
    "UnprovableExampleError",
    "derive",
    "e_step",
    "ess_evaluate",
    "evaluate",
    "format_program",
    "goal_ess",
    "goal_ess_all",
    "goal_success",
    "infer_types",
    "integrate_out",
    "log_evaluate",
    "m_step",
    "marginalize",
    "parse_csv_examples",
    "parse_examples",
    "parse_program",
    "parse_query",
    "parse_term",
    "query_success",
    "render_debug",
    "render_success",
    "set_sw_lines",
    "success_json",
    "train",
]
