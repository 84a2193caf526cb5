"""Canonical pretty-printer for constraint specs (round-trip safe)."""

from __future__ import annotations

from ..values import format_value
from .nodes import And, Arith, AttrRef, Comparison, ConstraintSpec, Literal, Not, Or

_PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def format_term(term, parent_prec=0) -> str:
    if isinstance(term, AttrRef):
        return f"{term.var}.{term.attr}"
    if isinstance(term, Literal):
        return format_value(term.value)
    if isinstance(term, Arith):
        prec = _PRECEDENCE[term.op]
        left = format_term(term.left, prec)
        # right side binds tighter to preserve left-associative parse shape
        right = format_term(term.right, prec + 1)
        text = f"{left} {term.op} {right}"
        return f"({text})" if prec < parent_prec else text


def format_expr(expr) -> str:
    if isinstance(expr, Comparison):
        return f"{format_term(expr.left)} {expr.op} {format_term(expr.right)}"
    if isinstance(expr, And):
        return "and(" + ", ".join(format_expr(e) for e in expr.items) + ")"
    if isinstance(expr, Or):
        return "or(" + ", ".join(format_expr(e) for e in expr.items) + ")"
    if isinstance(expr, Not):
        return f"not({format_expr(expr.item)})"
    raise TypeError(f"not an expression: {expr!r}")


def format_constraint(spec: ConstraintSpec) -> str:
    lines = [f"constraint {spec.id} {{"]
    lines.append(f"  modality: {spec.modality}")
    if spec.context_tags:
        lines.append("  context: " + ", ".join(spec.context_tags))
    if spec.priority is not None:
        lines.append(f"  priority: {spec.priority}")
    if spec.scope:
        lines.append("  scope: " + ", ".join(f"{v}:{t}" for v, t in spec.scope))
    if spec.when is not None:
        lines.append(f"  when: {format_expr(spec.when)}")
    lines.append(f"  holds: {format_expr(spec.holds)}")
    lines.append("}")
    return "\n".join(lines)


def format_constraint_file(specs) -> str:
    return "\n\n".join(format_constraint(s) for s in specs) + "\n"
