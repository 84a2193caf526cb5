"""Kleene three-valued evaluation of condition expressions against a situation.

Truth values are True / False / None (None = unknown). Unknown attribute
references encountered while a result stays undetermined are collected so the
grounder can turn them into measurement proposals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .lang.nodes import And, Arith, AttrRef, Comparison, Literal, Not, Or
from .values import UNKNOWN, arith, compare, is_numeric, normalize


class OverlayView:
    """A situation with projected attribute overrides layered on top.

    Unknown refs stay unknown: a projection may never reveal what the agent
    cannot observe, even if the override dict mentions the ref.
    """

    def __init__(self, base, overrides: Dict, ticks_ahead: int = 1):
        self.base = base
        self.overrides = overrides
        self.unknown = base.unknown
        self.tick = base.tick + ticks_ahead
        self.entity_types = base.entity_types

    def value(self, entity: str, attribute: str):
        ref = (entity, attribute)
        if ref in self.unknown:
            return UNKNOWN
        if ref in self.overrides:
            return self.overrides[ref]
        return self.base.value(entity, attribute)

    def entities_of_type(self, entity_type: str) -> list:
        return self.base.entities_of_type(entity_type)


def eval_term(term, binding: Dict[str, str], view, missing: list):
    if isinstance(term, Literal):
        return term.value
    if isinstance(term, AttrRef):
        entity = binding.get(term.var)
        if entity is None:
            # unbound variable at runtime: treat like an unobservable ref
            missing.append((term.var, term.attr))
            return UNKNOWN
        v = view.value(entity, term.attr)
        if v is UNKNOWN:
            missing.append((entity, term.attr))
        return v
    if isinstance(term, Arith):
        left = eval_term(term.left, binding, view, missing)
        right = eval_term(term.right, binding, view, missing)
        if left is UNKNOWN or right is UNKNOWN:
            return UNKNOWN
        return arith(term.op, left, right)
    raise TypeError(f"not a term: {term!r}")


def eval_expr(expr, binding: Dict[str, str], view, missing: list) -> Optional[bool]:
    if isinstance(expr, Comparison):
        left = eval_term(expr.left, binding, view, missing)
        right = eval_term(expr.right, binding, view, missing)
        if left is UNKNOWN or right is UNKNOWN:
            return None
        return compare(expr.op, left, right)
    if isinstance(expr, And):
        unknown = False
        for item in expr.items:
            v = eval_expr(item, binding, view, missing)
            if v is False:
                return False
            if v is None:
                unknown = True
        return None if unknown else True
    if isinstance(expr, Or):
        unknown = False
        for item in expr.items:
            v = eval_expr(item, binding, view, missing)
            if v is True:
                return True
            if v is None:
                unknown = True
        return None if unknown else False
    if isinstance(expr, Not):
        v = eval_expr(expr.item, binding, view, missing)
        return None if v is None else (not v)
    raise TypeError(f"not an expression: {expr!r}")


@dataclass(frozen=True)
class BindingEval:
    """Result of evaluating one constraint binding: when-clause, holds-clause."""

    applies: Optional[bool]  # when clause (True when absent)
    holds: Optional[bool]
    missing: Tuple  # sorted unknown refs encountered


def evaluate_binding(constraint, binding: Dict[str, str], view) -> BindingEval:
    missing: list = []
    applies = True
    if constraint.when is not None:
        applies = eval_expr(constraint.when, binding, view, missing)
    if applies is False:
        return BindingEval(False, None, ())
    holds = eval_expr(constraint.holds, binding, view, missing)
    return BindingEval(applies, holds, tuple(sorted(set(missing))))


def compliance_expr(constraint):
    """The condition that must hold for the constraint to be satisfied."""
    if constraint.modality == "forbid":
        return Not(constraint.holds)
    return constraint.holds


def violation_measure(expr, binding: Dict[str, str], view):
    """Distance from satisfaction: 0 when satisfied, positive when violated.

    Numeric comparisons use the signed distance from the bound; non-numeric
    atoms are binary (1 violated / 0 satisfied). and() sums, or() takes the
    minimum. Returns None when any needed value is unknown.
    """
    if isinstance(expr, Comparison):
        scratch: list = []
        left = eval_term(expr.left, binding, view, scratch)
        right = eval_term(expr.right, binding, view, scratch)
        if left is UNKNOWN or right is UNKNOWN:
            return None
        if expr.op in ("=", "!="):
            sat = compare(expr.op, left, right)
            if sat:
                return 0
            if expr.op == "=" and is_numeric(left) and is_numeric(right):
                return normalize(abs(left - right))
            return 1
        # ordering operators require numbers; compare() raises on mismatch
        sat = compare(expr.op, left, right)
        if sat:
            return 0
        if expr.op in (">=", ">"):
            return normalize(right - left)
        return normalize(left - right)
    if isinstance(expr, And):
        total = 0
        for item in expr.items:
            m = violation_measure(item, binding, view)
            if m is None:
                return None
            total += m
        return normalize(total)
    if isinstance(expr, Or):
        best = None
        for item in expr.items:
            m = violation_measure(item, binding, view)
            if m is None:
                return None
            best = m if best is None else min(best, m)
        return best
    if isinstance(expr, Not):
        scratch: list = []
        v = eval_expr(expr.item, binding, view, scratch)
        if v is None:
            return None
        return 1 if v else 0
    raise TypeError(f"not an expression: {expr!r}")
