"""Instantiating constraints against the current situation.

Typed binding enumeration, three-valued evaluation, and measurement proposals
for groundings that partial observability leaves undetermined.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .evaluate import evaluate_binding
from .values import EvalTypeError

EVALUABLE = "evaluable"
PARTIAL = "partial"
FILTERED = "filteredOut"

COMPLIANT = "compliant"
VIOLATED = "violated"
UNKNOWN_STATUS = "unknown"


@dataclass(frozen=True, slots=True)
class GroundingRecord:
    constraint_id: str
    vars: tuple
    entities: tuple
    status: str
    missing: tuple  # nonempty iff status == PARTIAL

    @property
    def binding(self) -> Dict[str, str]:
        return dict(zip(self.vars, self.entities))


@dataclass(frozen=True, slots=True)
class ConstraintEvaluation:
    grounding: GroundingRecord
    status: str  # compliant | violated | unknown
    holds: Optional[bool]


@dataclass(frozen=True)
class MeasurementProposal:
    action_name: str
    reveals: tuple  # (entity, attribute)
    enables: tuple  # constraint ids sharing the ref, sorted


@dataclass
class GroundingBatch:
    constraint_id: str
    records: List[GroundingRecord] = field(default_factory=list)
    evaluations: List[ConstraintEvaluation] = field(default_factory=list)
    truncated: bool = False


def _status_for(constraint, ev) -> Tuple[str, Optional[bool]]:
    """Map a BindingEval to (evaluation status, holds) per modality."""
    if ev.applies is False:
        return FILTERED, None
    if ev.applies is None or ev.holds is None:
        return UNKNOWN_STATUS, None
    if constraint.modality == "require":
        return (COMPLIANT if ev.holds else VIOLATED), ev.holds
    if constraint.modality == "forbid":
        return (VIOLATED if ev.holds else COMPLIANT), ev.holds
    # prefer/avoid are never violated; they carry desirability only
    return COMPLIANT, ev.holds


def iter_bindings(constraint, situation):
    """All type-consistent bindings in deterministic order (entities sorted by id)."""
    pools = [situation.entities_of_type(typ) for _, typ in constraint.scope]
    return itertools.product(*pools)


def _ground_one(constraint, situation, limit):
    records: List[GroundingRecord] = []
    evaluations: List[ConstraintEvaluation] = []
    vars_ = constraint.scope_vars
    truncated = False
    for entities in iter_bindings(constraint, situation):
        if len(records) >= limit:
            truncated = True
            break
        ev = evaluate_binding(constraint, dict(zip(vars_, entities)), situation)
        if ev.applies is False:
            records.append(GroundingRecord(constraint.id, vars_, entities, FILTERED, ()))
            continue
        status, holds = _status_for(constraint, ev)
        if status == UNKNOWN_STATUS:
            rec = GroundingRecord(constraint.id, vars_, entities, PARTIAL, ev.missing)
        else:
            rec = GroundingRecord(constraint.id, vars_, entities, EVALUABLE, ())
        records.append(rec)
        evaluations.append(ConstraintEvaluation(rec, status, holds))
    return records, evaluations, truncated


def enumerate_groundings(constraint, situation, limit: int):
    """Ground one constraint; returns (records, truncated flag)."""
    if limit < 1:
        raise ValueError("grounding limit must be >= 1")
    records, _, truncated = _ground_one(constraint, situation, limit)
    return records, truncated


def evaluate(grounding: GroundingRecord, constraint, situation) -> ConstraintEvaluation:
    """Three-valued evaluation of a non-filtered grounding."""
    if grounding.status == FILTERED:
        raise ValueError("filtered groundings are not evaluated")
    ev = evaluate_binding(constraint, grounding.binding, situation)
    status, holds = _status_for(constraint, ev)
    if status == FILTERED:
        status, holds = UNKNOWN_STATUS, None  # binding drifted out of scope between calls
    return ConstraintEvaluation(grounding, status, holds)


def ground_all(constraints, situation, total_limit: int, priority_of=None):
    """Ground every relevant constraint under a shared per-tick budget.

    Higher-priority constraints are enumerated first (absent priority sorts
    last; ties break on id), so truncation starves the least important ones.
    `priority_of` defaults to the constraint's own priority field; the harness
    passes the merged value KB. Type mismatches park the offending constraint
    for the tick.

    Returns (ordered list of GroundingBatch, parked list of (id, reason)).
    """
    if priority_of is None:
        priority_of = lambda cid: None
    effective = {c.id: (priority_of(c.id) if priority_of(c.id) is not None else c.priority) for c in constraints}
    with_priority = sorted(
        (c for c in constraints if effective[c.id] is not None),
        key=lambda c: (-effective[c.id], c.id),
    )
    without = sorted((c for c in constraints if effective[c.id] is None), key=lambda c: c.id)
    order = with_priority + without

    remaining = total_limit
    batches: List[GroundingBatch] = []
    parked: List[Tuple[str, str]] = []
    for constraint in order:
        batch = GroundingBatch(constraint.id)
        if remaining <= 0:
            batch.truncated = True
            batches.append(batch)
            continue
        try:
            records, evaluations, truncated = _ground_one(constraint, situation, remaining)
        except EvalTypeError as exc:
            parked.append((constraint.id, str(exc)))
            continue
        batch.records = records
        batch.evaluations = evaluations
        batch.truncated = truncated
        remaining -= len(records)
        batches.append(batch)
    return batches, parked


def propose_measurements(evaluations, action_catalog) -> List[MeasurementProposal]:
    """One proposal per (catalog action, missing ref) pair the action can reveal."""
    ref_constraints: Dict[tuple, set] = {}
    for ev in evaluations:
        if ev.status != UNKNOWN_STATUS:
            continue
        for ref in ev.grounding.missing:
            ref_constraints.setdefault(ref, set()).add(ev.grounding.constraint_id)
    proposals = []
    for action in sorted(action_catalog, key=lambda a: a.name):
        reveals = getattr(action, "reveals", None)
        if reveals is None or reveals not in ref_constraints:
            continue
        proposals.append(
            MeasurementProposal(
                action_name=action.name,
                reveals=reveals,
                enables=tuple(sorted(ref_constraints[reveals])),
            )
        )
    return proposals
