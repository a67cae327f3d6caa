"""Static cost analysis and timed simulation for the tml language."""

from .ast import pretty_program
from .btypes import type_program
from .costgen import render_cost_system, translate_program
from .costsolve import (
    BUDGET_EXHAUSTED,
    UNBOUNDED,
    canonicalize_cofloco,
    emit_cofloco,
    eval_cost,
)
from .interp import FifoPolicy, SeededRandomPolicy, explore, run, simulate
from .parser import parse_program

__all__ = [
    "parse_program",
    "pretty_program",
    "type_program",
    "translate_program",
    "render_cost_system",
    "eval_cost",
    "emit_cofloco",
    "canonicalize_cofloco",
    "UNBOUNDED",
    "BUDGET_EXHAUSTED",
    "simulate",
    "run",
    "explore",
    "FifoPolicy",
    "SeededRandomPolicy",
]
