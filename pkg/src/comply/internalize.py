"""Mapping external constraint specs onto the agent's internal ontology.

Every attribute, type, and context name must either already be an internal
name or map to one through the vocabulary. Constraints with unmapped terms
fail with the complete list of offending terms and can be retried after the
instructor teaches the missing mappings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Optional, Tuple, Union

from .lang.nodes import And, Arith, AttrRef, Comparison, ConstraintSpec, Not, Or, TeachAnswer


@dataclass(frozen=True)
class Ontology:
    """The internal names the agent actually possesses."""

    attributes: FrozenSet[str]
    types: FrozenSet[str]
    contexts: FrozenSet[str]

    def has(self, kind: str, name: str) -> bool:
        if kind == "attribute":
            return name in self.attributes
        if kind == "type":
            return name in self.types
        return name in self.contexts


@dataclass(frozen=True)
class VocabularyMap:
    mappings: Tuple = ()  # sorted tuple of (external, (kind, internal))

    @staticmethod
    def from_entries(entries) -> "VocabularyMap":
        table = {}
        for e in entries:
            table[e.external] = (e.kind, e.internal)
        return VocabularyMap(tuple(sorted(table.items())))

    def lookup(self, external: str) -> Optional[Tuple[str, str]]:
        for name, target in self.mappings:
            if name == external:
                return target
        return None

    def merged(self, other: "VocabularyMap") -> "VocabularyMap":
        table = dict(self.mappings)
        table.update(dict(other.mappings))
        return VocabularyMap(tuple(sorted(table.items())))


@dataclass(frozen=True)
class InternalConstraint:
    id: str
    modality: str
    context_tags: tuple
    priority: Optional[int]
    scope: tuple
    when: object
    holds: object

    @property
    def scope_vars(self) -> tuple:
        return tuple(v for v, _ in self.scope)


@dataclass(frozen=True)
class InternalizationError:
    constraint_id: str
    unmapped: Tuple  # sorted tuple of (external name, kind), nonempty
    kind_mismatches: Tuple = ()  # sorted tuple of (name, used_as, mapped_as)


class _Rewriter:
    def __init__(self, vocab: VocabularyMap, ontology: Ontology):
        self.vocab = vocab
        self.ontology = ontology
        self.unmapped: set = set()
        self.mismatches: set = set()

    def resolve(self, name: str, kind: str) -> str:
        """Internal names pass through; external ones go through the vocabulary."""
        if self.ontology.has(kind, name):
            return name
        target = self.vocab.lookup(name)
        if target is None:
            self.unmapped.add((name, kind))
            return name
        mapped_kind, internal = target
        if mapped_kind != kind:
            self.mismatches.add((name, kind, mapped_kind))
            return name
        if not self.ontology.has(kind, internal):
            # a mapping that lands outside the ontology leaves the term unmapped
            self.unmapped.add((name, kind))
            return name
        return internal

    def rewrite_term(self, term):
        if isinstance(term, AttrRef):
            return AttrRef(term.var, self.resolve(term.attr, "attribute"))
        if isinstance(term, Arith):
            return Arith(term.op, self.rewrite_term(term.left), self.rewrite_term(term.right))
        return term

    def rewrite_expr(self, expr):
        if expr is None:
            return None
        if isinstance(expr, Comparison):
            return Comparison(expr.op, self.rewrite_term(expr.left), self.rewrite_term(expr.right))
        if isinstance(expr, And):
            return And(tuple(self.rewrite_expr(e) for e in expr.items))
        if isinstance(expr, Or):
            return Or(tuple(self.rewrite_expr(e) for e in expr.items))
        if isinstance(expr, Not):
            return Not(self.rewrite_expr(expr.item))
        raise TypeError(f"not an expression: {expr!r}")


def internalize(
    spec: ConstraintSpec,
    vocab: VocabularyMap,
    ontology: Ontology,
) -> Union[InternalConstraint, InternalizationError]:
    """Rewrite one constraint into internal vocabulary, or report all failures."""
    rw = _Rewriter(vocab, ontology)
    scope = tuple((var, rw.resolve(typ, "type")) for var, typ in spec.scope)
    tags = tuple(rw.resolve(tag, "context") for tag in spec.context_tags)
    when = rw.rewrite_expr(spec.when)
    holds = rw.rewrite_expr(spec.holds)
    if rw.unmapped or rw.mismatches:
        return InternalizationError(
            constraint_id=spec.id,
            unmapped=tuple(sorted(rw.unmapped)),
            kind_mismatches=tuple(sorted(rw.mismatches)),
        )
    return InternalConstraint(
        id=spec.id,
        modality=spec.modality,
        context_tags=tags,
        priority=spec.priority,
        scope=scope,
        when=when,
        holds=holds,
    )


def resolve_unmapped(error: InternalizationError, script) -> Optional[VocabularyMap]:
    """Consume matching teach answers from the instructor script.

    Returns the vocabulary delta covering at least one of the error's terms,
    or None (unresolved: the constraint stays parked). Answers are matched by
    term, never consumed blindly.
    """
    wanted = {name for name, _ in error.unmapped}
    delta = {}
    for answer in script.pending():
        if isinstance(answer, TeachAnswer) and answer.external in wanted and answer.external not in delta:
            script.consume(answer)
            delta[answer.external] = (answer.kind, answer.internal)
    if not delta:
        return None
    return VocabularyMap(tuple(sorted(delta.items())))


def external_names(constraint: InternalConstraint, ontology: Ontology) -> list:
    """Names in an internalized constraint that are not in the ontology (should be none)."""
    out = []
    for _, typ in constraint.scope:
        if not ontology.has("type", typ):
            out.append(("type", typ))
    for tag in constraint.context_tags:
        if not ontology.has("context", tag):
            out.append(("context", tag))

    def scan_term(t):
        if isinstance(t, AttrRef):
            if not ontology.has("attribute", t.attr):
                out.append(("attribute", t.attr))
        elif isinstance(t, Arith):
            scan_term(t.left)
            scan_term(t.right)

    def scan(e):
        if e is None:
            return
        if isinstance(e, Comparison):
            scan_term(e.left)
            scan_term(e.right)
        elif isinstance(e, (And, Or)):
            for item in e.items:
                scan(item)
        elif isinstance(e, Not):
            scan(e.item)

    scan(constraint.when)
    scan(constraint.holds)
    return sorted(set(out))
