"""Syntax trees for the constraint and scenario languages."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..values import Value

# ── condition expressions ──────────────────────────────────────────

COMPARISON_OPS = ("<", "<=", "=", "!=", ">=", ">")
ARITH_OPS = ("+", "-", "*")


@dataclass(frozen=True)
class AttrRef:
    var: str
    attr: str


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Term"
    right: "Term"


Term = Union[AttrRef, Literal, Arith]


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Term
    right: Term


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: "ConditionExpr"


ConditionExpr = Union[Comparison, And, Or, Not]


def expr_attr_refs(expr) -> set:
    """All AttrRefs appearing anywhere in an expression tree."""
    out = set()

    def walk_term(t):
        if isinstance(t, AttrRef):
            out.add(t)
        elif isinstance(t, Arith):
            walk_term(t.left)
            walk_term(t.right)

    def walk(e):
        if isinstance(e, Comparison):
            walk_term(e.left)
            walk_term(e.right)
        elif isinstance(e, (And, Or)):
            for item in e.items:
                walk(item)
        elif isinstance(e, Not):
            walk(e.item)

    walk(expr)
    return out


# ── constraint files ───────────────────────────────────────────────

MODALITIES = ("require", "forbid", "prefer", "avoid")


@dataclass(frozen=True)
class ConstraintSpec:
    id: str
    modality: str
    context_tags: tuple  # tuple[str, ...], file order
    priority: Optional[int]
    scope: tuple  # tuple[(var, entity_type), ...]
    when: Optional[ConditionExpr]
    holds: ConditionExpr


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    line: int
    column: int
    message: str
    file: Optional[str] = None

    def render(self) -> str:
        prefix = f"{self.file}:" if self.file else ""
        return f"{prefix}{self.line}:{self.column}: {self.severity}: {self.message}"


# ── scenario files ─────────────────────────────────────────────────


@dataclass(frozen=True)
class FactDecl:
    entity: str
    entity_type: str
    attrs: tuple  # tuple[(name, Value), ...]


@dataclass(frozen=True)
class SetEvent:
    tick: int
    entity: str
    attr: str
    value: Value


@dataclass(frozen=True)
class SpawnEvent:
    tick: int
    entity: str
    entity_type: str
    attrs: tuple


@dataclass(frozen=True)
class ContextRule:
    tag: str
    condition: ConditionExpr  # over the distinguished `self` entity


@dataclass(frozen=True)
class VocabEntry:
    external: str
    kind: str  # attribute | type | context
    internal: str


@dataclass(frozen=True)
class TeachAnswer:
    external: str
    kind: str
    internal: str


@dataclass(frozen=True)
class PriorityAnswer:
    first: str
    second: str
    winner: str


@dataclass(frozen=True)
class RelevanceAnswer:
    constraint_id: str
    tag: str
    relevant: bool


InstructorEntry = Union[TeachAnswer, PriorityAnswer, RelevanceAnswer]


@dataclass(frozen=True)
class RunParams:
    max_ticks: int
    seed: int
    staleness: int = 5
    search_depth: int = 3
    grounding_limit: int = 500


@dataclass
class ScenarioSpec:
    environment: str  # sudoku | driving
    facts: tuple = ()
    hidden: tuple = ()  # tuple[(entity, attr), ...]
    events: tuple = ()
    context_rules: tuple = ()
    constraint_files: tuple = ()
    constraints: tuple = ()  # loaded ConstraintSpecs, file order
    vocab: tuple = ()  # tuple[VocabEntry, ...]
    values: tuple = ()  # tuple[(constraint_id, int), ...]
    instructor: tuple = ()
    run: RunParams = field(default_factory=lambda: RunParams(1, 0))
    source_path: Optional[str] = None
