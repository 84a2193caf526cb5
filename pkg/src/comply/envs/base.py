"""Shared environment surface: action catalog entries, events, task goals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple


@dataclass(frozen=True)
class Action:
    """A concrete catalog entry: parameters baked in, deterministic name."""

    name: str  # e.g. "place(1,1,3)", "measure_gap(lead)", "accelerate"
    base: str  # action family, e.g. "place", "measure_gap"
    params: Tuple = ()
    reveals: Optional[Tuple[str, str]] = None  # (entity, attribute) for measurements


@dataclass(frozen=True)
class EnvEvent:
    kind: str
    payload: Tuple = ()  # ordered (key, value-string) pairs

    TERMINAL_SUCCESS = ("solved", "arrival")
    TERMINAL_FAILURE = ("collision",)


@dataclass(frozen=True)
class TaskGoal:
    """A grounded environment goal evaluable with the shared evaluator."""

    name: str
    expr: object  # ConditionExpr over concrete entities
    binding: Dict[str, str] = field(default_factory=dict)


class ScenarioSetupError(Exception):
    """The scenario is syntactically valid but does not fit the environment."""
