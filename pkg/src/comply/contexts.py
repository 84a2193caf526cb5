"""Context recognition and relevance filtering of internalized constraints."""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Tuple

from .evaluate import eval_expr

WEIGHT_MIN, WEIGHT_MAX = -5, 5


@dataclass(frozen=True)
class AssociationStore:
    """Learned constraint-context association weights, clamped to [-5, +5]."""

    weights: Tuple = ()  # sorted tuple of ((constraint_id, tag), weight)

    def weight(self, constraint_id: str, tag: str) -> int:
        for key, w in self.weights:
            if key == (constraint_id, tag):
                return w
        return 0

    def updated(self, constraint_id: str, tag: str, delta: int) -> "AssociationStore":
        if delta not in (1, -1):
            raise ValueError("association updates move one step at a time")
        key = (constraint_id, tag)
        table = dict(self.weights)
        table[key] = max(WEIGHT_MIN, min(WEIGHT_MAX, table.get(key, 0) + delta))
        return AssociationStore(tuple(sorted(table.items())))


def recognize_contexts(situation, rules) -> FrozenSet[str]:
    """Tags whose condition is true for the `self` entity; unknown is not active."""
    active = set()
    binding = {"self": "self"}
    for rule in rules:
        missing: list = []
        if eval_expr(rule.condition, binding, situation, missing) is True:
            active.add(rule.tag)
    return frozenset(active)


def filter_relevant(constraints, active: FrozenSet[str], store: AssociationStore) -> list:
    """Keep tagged constraints whose tag is active; keep untagged ones unless
    negative evidence exists for some active tag (they are presumed relevant
    everywhere until taught otherwise)."""
    kept = []
    for c in constraints:
        if c.context_tags:
            if set(c.context_tags) & set(active):
                kept.append(c)
        elif all(store.weight(c.id, tag) >= 0 for tag in sorted(active)):
            kept.append(c)
    return kept


def update_association(store: AssociationStore, constraint_id: str, tag: str, delta: int) -> AssociationStore:
    return store.updated(constraint_id, tag, delta)
