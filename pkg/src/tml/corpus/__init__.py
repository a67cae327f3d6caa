"""Bundled example programs, exercised by the tests and the CLI docs.

manifest.json records the expected behaviour of each program: whether it
types, how simulations of it end, and what the analyzer bounds evaluate
to. The test suite replays the manifest; keeping it data keeps the
expectations in one auditable place.
"""

import json
from importlib import resources

from ..ast import Program
from ..parser import parse_program


def _root():
    return resources.files(__package__)


def names() -> list:
    """Corpus file names, manifest order."""
    return list(manifest())


def load(name: str) -> str:
    return (_root() / name).read_text()


def load_program(name: str) -> Program:
    return parse_program(load(name))


def manifest() -> dict:
    return json.loads((_root() / "manifest.json").read_text())
