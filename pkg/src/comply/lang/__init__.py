from .nodes import (
    And,
    Arith,
    AttrRef,
    Comparison,
    ConstraintSpec,
    ContextRule,
    Diagnostic,
    FactDecl,
    Literal,
    Not,
    Or,
    PriorityAnswer,
    RelevanceAnswer,
    RunParams,
    ScenarioSpec,
    SetEvent,
    SpawnEvent,
    TeachAnswer,
    VocabEntry,
    expr_attr_refs,
)
from .parser import (
    ParseResult,
    ScenarioResult,
    load_scenario,
    parse_constraint_file,
    parse_scenario_file,
)
from .printer import format_constraint, format_constraint_file, format_expr

__all__ = [
    "And",
    "Arith",
    "AttrRef",
    "Comparison",
    "ConstraintSpec",
    "ContextRule",
    "Diagnostic",
    "FactDecl",
    "Literal",
    "Not",
    "Or",
    "ParseResult",
    "PriorityAnswer",
    "RelevanceAnswer",
    "RunParams",
    "ScenarioResult",
    "ScenarioSpec",
    "SetEvent",
    "SpawnEvent",
    "TeachAnswer",
    "VocabEntry",
    "expr_attr_refs",
    "format_constraint",
    "format_constraint_file",
    "format_expr",
    "load_scenario",
    "parse_constraint_file",
    "parse_scenario_file",
]
