"""Example programs shipped with the package.

Each entry pairs a program with a query template whose variables cover every
observable argument, so marginalizing its success function over all of them
must give 1.
"""

from __future__ import annotations

from importlib import resources

from ..parser import parse_program
from ..program import Program

QUERIES = {
    "fmix": "fmix(X)",
    "hybrid": "f(X)",
    "kalman": "kf([A, B, C])",
    "sprinkler": "world(C, S, R, W)",
    "hmm": "hmm([X, Y, Z])",
}


def names() -> list[str]:
    return list(QUERIES)


def source(name: str) -> str:
    if name not in QUERIES:
        raise KeyError(f"unknown gallery program {name!r}; known: {', '.join(QUERIES)}")
    return resources.files(__package__).joinpath(f"{name}.psm").read_text()


def path(name: str):
    source(name)
    return resources.files(__package__).joinpath(f"{name}.psm")


def load(name: str) -> Program:
    return parse_program(source(name))
