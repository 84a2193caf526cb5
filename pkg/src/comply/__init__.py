"""Deterministic constraint-compliance engine.

Pipeline: internalize -> context-map -> ground -> plan/select -> mitigate,
driven tick by tick over two environments (Sudoku and a driving grid world).
"""

from .harness import RunResult, RunSummary, TraceEvent, run_scenario, summarize
from .lang.parser import load_scenario, parse_constraint_file, parse_scenario_file

__version__ = "0.1.0"

__all__ = [
    "RunResult",
    "RunSummary",
    "TraceEvent",
    "load_scenario",
    "parse_constraint_file",
    "parse_scenario_file",
    "run_scenario",
    "summarize",
]
