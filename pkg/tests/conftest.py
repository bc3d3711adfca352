import pytest

from hyprism import gallery
from hyprism.parser import parse_program, parse_query


@pytest.fixture
def fmix():
    return gallery.load("fmix")


@pytest.fixture
def hybrid():
    return gallery.load("hybrid")


@pytest.fixture
def kalman():
    return gallery.load("kalman")


@pytest.fixture
def sprinkler():
    return gallery.load("sprinkler")


@pytest.fixture
def hmm():
    return gallery.load("hmm")


def program(text):
    return parse_program(text)


def query(prog, text):
    return parse_query(text, prog)
