"""Impasse resolution ladder, knowing-violation bookkeeping, and repair bias.

Strategies are attempted strictly in order: prioritization (needs a value KB
covering every involved constraint), instructor query (installs the answer
persistently, then prioritization), replanning at increased depth (seeking a
candidate whose whole trajectory violates nothing), and finally inattention
(drop the least important involved constraint).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .evaluate import compliance_expr, evaluate_binding, violation_measure
from .grounding import COMPLIANT, VIOLATED
from .planning import PROHIBITED_BY, UNDESIRABLE_FOR, Candidate, Decision, plan_views

CAUSE_ENVIRONMENT = "environment"
CAUSE_MITIGATION = "mitigation"


class ValueKB:
    """Constraint priorities: constraint file fields merged with the scenario
    values block (scenario wins); instructor answers install persistently."""

    def __init__(self, entries: Dict[str, int] | None = None):
        self.priorities: Dict[str, int] = dict(entries or {})

    @staticmethod
    def merged(constraints, scenario_values) -> "ValueKB":
        table: Dict[str, int] = {}
        for c in constraints:
            if c.priority is not None:
                table[c.id] = c.priority
        for cid, p in scenario_values:
            table[cid] = p
        return ValueKB(table)

    def has(self, cid: str) -> bool:
        return cid in self.priorities

    def get(self, cid: str) -> Optional[int]:
        return self.priorities.get(cid)

    def install(self, winner: str, loser: str) -> None:
        loser_p = self.priorities.setdefault(loser, 0)
        if self.priorities.get(winner, loser_p) <= loser_p:
            self.priorities[winner] = loser_p + 1

    def strictly_ordered(self, a: str, b: str) -> bool:
        return a in self.priorities and b in self.priorities and self.priorities[a] != self.priorities[b]


@dataclass
class ViolationRecord:
    constraint_id: str
    opened_tick: int
    cause: str  # environment | mitigation
    closed_tick: Optional[int] = None


class ViolationLog:
    def __init__(self):
        self.records: List[ViolationRecord] = []

    def open_record(self, cid: str) -> Optional[ViolationRecord]:
        for rec in self.records:
            if rec.constraint_id == cid and rec.closed_tick is None:
                return rec
        return None

    def open(self, cid: str, tick: int, cause: str) -> Optional[ViolationRecord]:
        if self.open_record(cid) is not None:
            return None
        rec = ViolationRecord(cid, tick, cause)
        self.records.append(rec)
        return rec

    def close(self, cid: str, tick: int) -> Optional[ViolationRecord]:
        rec = self.open_record(cid)
        if rec is not None:
            rec.closed_tick = tick
        return rec

    def open_ids(self) -> List[str]:
        return sorted({r.constraint_id for r in self.records if r.closed_tick is None})


@dataclass(frozen=True)
class Conflict:
    kind: str  # noAcceptableCandidate | labelConflict | plusMinus
    involved: Tuple  # sorted constraint ids
    candidate: Optional[str] = None  # name of the chosen +/- candidate, if any


@dataclass
class MitigationOutcome:
    strategy: str  # prioritization | instructorQuery | replanning | inattention
    chosen: Optional[Candidate]
    overridden: Tuple = ()  # constraint ids knowingly violated/disregarded
    queries_issued: int = 0
    dropped: Optional[str] = None  # inattention only


def detect_conflicts(decision: Decision) -> List[Conflict]:
    """One descriptor per impasse plus one per chosen +/- flagged candidate."""
    out = []
    if decision.impasse is not None:
        out.append(Conflict(kind=decision.impasse.kind, involved=tuple(decision.impasse.involved)))
    elif decision.chosen is not None and decision.chosen.pm_flagged:
        c = decision.chosen
        involved = sorted(set(c.label_ids("desirableFor")) | set(c.label_ids("undesirableFor")))
        out.append(Conflict(kind="plusMinus", involved=tuple(involved), candidate=c.name))
    return out


@dataclass
class MitigationHooks:
    """Callbacks the harness provides so mitigation stays testable in isolation."""

    reselect: object  # (suppressed: frozenset) -> Decision
    regenerate: object  # () -> list[Candidate], labeled+biased at depth+2
    trajectory_clean: object  # (Candidate) -> bool
    asked_pairs: set = field(default_factory=set)
    emit_query: object = None  # (a, b, winner|None) -> None


def _overridden(chosen: Candidate, dropped_ids) -> Tuple:
    carried = set()
    for cid, label in chosen.labels:
        if cid in dropped_ids and label in (PROHIBITED_BY, UNDESIRABLE_FOR):
            carried.add(cid)
    return tuple(sorted(carried))


def mitigate(conflict: Conflict, candidates, kb: ValueKB, script, hooks: MitigationHooks) -> Optional[MitigationOutcome]:
    """Run the strategy ladder; None means even inattention found nothing
    (the caller emits a fatal-impasse no-op so the environment still advances)."""
    involved = sorted(set(conflict.involved))
    queries = 0

    # (2) instructor query, only where KB knowledge is missing
    if involved and not all(kb.has(c) for c in involved):
        for a, b in itertools.combinations(involved, 2):
            if kb.has(a) and kb.has(b):
                continue
            if (a, b) in hooks.asked_pairs:
                continue
            hooks.asked_pairs.add((a, b))
            winner = script.answer_priority(a, b)
            queries += 1
            if hooks.emit_query is not None:
                hooks.emit_query(a, b, winner)
            if winner is not None:
                loser = b if winner == a else a
                kb.install(winner, loser)

    # (1) prioritization, possibly enabled by the queries above
    if involved and all(kb.has(c) for c in involved):
        top = max(kb.get(c) for c in involved)
        dominated = frozenset(c for c in involved if kb.get(c) < top)
        if dominated:
            decision = hooks.reselect(dominated)
            if decision.chosen is not None:
                return MitigationOutcome(
                    strategy="prioritization",
                    chosen=decision.chosen,
                    overridden=_overridden(decision.chosen, dominated),
                    queries_issued=queries,
                )

    # (3) replanning at increased depth, seeking a violation-free trajectory.
    # First-action labels are ignored here: cleanliness is judged on the whole
    # trajectory (new violations at any step, involved repaired at the end).
    # A +/- conflict cannot be resolved by picking another +/- candidate.
    deeper = hooks.regenerate()
    clean = [c for c in deeper if not c.pm_flagged and hooks.trajectory_clean(c)]
    if clean:
        # shortest resolution first, so the conflict is not procrastinated by
        # plans that defer the decisive action a tick
        best = sorted(clean, key=lambda c: (len(c.plan),) + c.sort_key())[0]
        best.provenance = "mitigation"
        return MitigationOutcome(
            strategy="replanning", chosen=best, overridden=(), queries_issued=queries
        )

    # (4) inattention: drop the least important involved constraint
    if involved:
        dropped = min(
            involved,
            key=lambda c: ((0, kb.get(c)) if kb.has(c) else (-1, 0), c),
        )
        decision = hooks.reselect(frozenset({dropped}))
        if decision.chosen is not None:
            return MitigationOutcome(
                strategy="inattention",
                chosen=decision.chosen,
                overridden=_overridden(decision.chosen, {dropped}),
                queries_issued=queries,
                dropped=dropped,
            )
    return None


# ── repair bias and violation closure ──────────────────────────────


def violated_bindings_by_constraint(evaluations) -> Dict[str, List[dict]]:
    out: Dict[str, List[dict]] = {}
    for ev in evaluations:
        if ev.status == VIOLATED:
            out.setdefault(ev.grounding.constraint_id, []).append(ev.grounding.binding)
    return out


def _total_measure(constraint, bindings, view):
    expr = compliance_expr(constraint)
    total = 0
    for binding in bindings:
        m = violation_measure(expr, binding, view)
        if m is None:
            return None
        total += m
    return total


def repair_bias(open_violation_ids, candidates, evaluations, constraints_by_id, situation):
    """+1 to each non-prohibited candidate whose projection strictly decreases
    an open violation's measure (signed distance from the violated bound)."""
    violated = violated_bindings_by_constraint(evaluations)
    for cid in sorted(open_violation_ids):
        constraint = constraints_by_id.get(cid)
        bindings = violated.get(cid)
        if constraint is None or not bindings:
            continue
        now = _total_measure(constraint, bindings, situation)
        if now is None:
            continue
        for cand in candidates:
            if cand.prohibitions() or cand.proj_view is None:
                continue
            projected = _total_measure(constraint, bindings, cand.proj_view)
            if projected is not None and projected < now:
                cand.repair_bonus[cid] = cand.repair_bonus.get(cid, 0) + 1
                cand.score = cand.effective_score()
    return candidates


def close_repaired(log: ViolationLog, evaluations, tick: int) -> List[ViolationRecord]:
    """Close open records whose constraint now evaluates compliant (at least one
    determined-compliant evaluation, none violated; unknown-only stays open)."""
    by_cid: Dict[str, List] = {}
    for ev in evaluations:
        by_cid.setdefault(ev.grounding.constraint_id, []).append(ev)
    closed = []
    for cid in log.open_ids():
        evs = by_cid.get(cid, [])
        statuses = {e.status for e in evs}
        if VIOLATED in statuses:
            continue
        if COMPLIANT in statuses:
            rec = log.close(cid, tick)
            if rec is not None:
                closed.append(rec)
    return closed


def open_environment_violations(log: ViolationLog, evaluations, tick: int) -> List[ViolationRecord]:
    """Open cause=environment records for violated constraints without one."""
    violated = sorted({e.grounding.constraint_id for e in evaluations if e.status == VIOLATED})
    opened = []
    for cid in violated:
        rec = log.open(cid, tick, CAUSE_ENVIRONMENT)
        if rec is not None:
            opened.append(rec)
    return opened


def _is_violated(constraint, ev) -> Optional[bool]:
    """Determined violation judgement for a BindingEval, None when unknown."""
    if ev.applies is False:
        return False
    if ev.applies is None or ev.holds is None:
        return None
    return (not ev.holds) if constraint.modality == "require" else bool(ev.holds)


def trajectory_clean(candidate, constraints, eval_index, situation, env, involved) -> bool:
    """No currently-satisfied require/forbid becomes violated at any step, and
    every currently-violated involved constraint is compliant at the end."""
    views = plan_views(situation, candidate.plan, env)
    terminal = views[-1]
    for constraint in constraints:
        if constraint.modality not in ("require", "forbid"):
            continue
        pools = [situation.entities_of_type(t) for _, t in constraint.scope]
        for entities in itertools.product(*pools):
            binding = dict(zip(constraint.scope_vars, entities))
            now = eval_index.get((constraint.id, entities))
            now_violated = now is not None and now.status == VIOLATED
            if not now_violated:
                for view in views:
                    if _is_violated(constraint, evaluate_binding(constraint, binding, view)) is True:
                        return False
            elif constraint.id in involved:
                # repair demanded: terminal must be determinately non-violated
                if _is_violated(constraint, evaluate_binding(constraint, binding, terminal)) is not False:
                    return False
    return True
