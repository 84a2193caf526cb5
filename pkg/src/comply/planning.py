"""Constraints as goals, bounded-lookahead candidates, Fig.-1-style labeling,
and deterministic selection.

Labels per candidate (set of (constraintId, label)):
  prohibitedBy     a require/forbid would become violated, or stays violated
                   with no strict progress on the violation measure
  requiredBy       a currently violated require/forbid becomes compliant
  desirableFor     a prefer holds on the projected state (+1)
  undesirableFor   an avoid holds on the projected state (-1)
  enablesGrounding the action reveals a hidden attribute some constraint needs (+1)

Scores count desirability and bonuses only; prohibitions are hard and
priorities never scale scores (importance is mitigation-time knowledge).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .evaluate import (
    OverlayView,
    compliance_expr,
    eval_expr,
    evaluate_binding,
    violation_measure,
)
from .grounding import COMPLIANT, UNKNOWN_STATUS, VIOLATED

PROHIBITED_BY = "prohibitedBy"
REQUIRED_BY = "requiredBy"
DESIRABLE_FOR = "desirableFor"
UNDESIRABLE_FOR = "undesirableFor"
ENABLES_GROUNDING = "enablesGrounding"

LABEL_SCORES = {DESIRABLE_FOR: 1, UNDESIRABLE_FOR: -1, ENABLES_GROUNDING: 1}


@dataclass(frozen=True)
class Goal:
    kind: str  # maintain | restore | task
    name: str  # constraint id or task goal name
    expr: object  # grounded compliance condition
    binding: Dict[str, str]


@dataclass
class Candidate:
    plan: Tuple  # nonempty tuple of Actions
    provenance: str = "planner"  # planner | measurement | mitigation
    labels: set = field(default_factory=set)  # {(constraint_id, label)}
    score: int = 0
    enables: Tuple = ()
    repair_bonus: Dict[str, int] = field(default_factory=dict)
    proj_view: Optional[OverlayView] = None

    @property
    def first_action(self):
        return self.plan[0]

    @property
    def name(self) -> str:
        return "+".join(a.name for a in self.plan)

    def label_ids(self, label: str) -> List[str]:
        return sorted(cid for cid, lab in self.labels if lab == label)

    def prohibitions(self, suppressed: FrozenSet[str] = frozenset()) -> List[str]:
        return [cid for cid in self.label_ids(PROHIBITED_BY) if cid not in suppressed]

    def effective_score(self, suppressed: FrozenSet[str] = frozenset()) -> int:
        total = 0
        for cid, lab in self.labels:
            if cid not in suppressed and lab in LABEL_SCORES:
                total += LABEL_SCORES[lab]
        for cid, bonus in self.repair_bonus.items():
            if cid not in suppressed:
                total += bonus
        return total

    @property
    def pm_flagged(self) -> bool:
        """Labeled both desirable and undesirable (the Fig. 1 +/- case)."""
        return bool(self.label_ids(DESIRABLE_FOR)) and bool(self.label_ids(UNDESIRABLE_FOR))

    def sort_key(self, suppressed: FrozenSet[str] = frozenset()):
        return (
            -self.effective_score(suppressed),
            self.first_action.name,
            len(self.plan),
            tuple(a.name for a in self.plan),
        )


@dataclass(frozen=True)
class Impasse:
    kind: str  # noAcceptableCandidate | labelConflict
    involved: Tuple  # constraint ids, sorted (empty only for an empty catalog)
    candidates: Tuple = ()  # snapshot of (name, score) pairs


@dataclass
class Decision:
    chosen: Optional[Candidate] = None
    runners_up: List[Candidate] = field(default_factory=list)
    impasse: Optional[Impasse] = None


# ── constraints to goals ───────────────────────────────────────────


def satisfaction_expr(constraint):
    """Non-violation condition for one binding: the when-clause failing also
    counts (an escaped constraint is not violated)."""
    base = compliance_expr(constraint)
    if constraint.when is None:
        return base
    from .lang.nodes import Not as _Not, Or as _Or

    return _Or((_Not(constraint.when), base))


def constraints_to_goals(evaluations, constraints_by_id) -> List[Goal]:
    """Compliant require/forbid -> maintain; violated -> restore; unknown and
    soft modalities produce no goals."""
    goals = []
    for ev in evaluations:
        constraint = constraints_by_id[ev.grounding.constraint_id]
        if constraint.modality not in ("require", "forbid"):
            continue
        if ev.status == COMPLIANT:
            kind = "maintain"
        elif ev.status == VIOLATED:
            kind = "restore"
        else:
            continue
        goals.append(
            Goal(
                kind=kind,
                name=constraint.id,
                expr=satisfaction_expr(constraint),
                binding=ev.grounding.binding,
            )
        )
    return goals


# ── candidate generation ───────────────────────────────────────────


def plan_views(situation, plan, env) -> List[OverlayView]:
    """Projected view after each step of the plan (unknowns stay unknown)."""
    views = []
    current = situation
    accumulated: dict = {}
    for steps, action in enumerate(plan, start=1):
        overrides, _ = env.project_action(current, action)
        accumulated = accumulated | overrides
        current = OverlayView(situation, accumulated, ticks_ahead=steps)
        views.append(current)
    return views


def _goal_achieved(goal: Goal, view) -> bool:
    missing: list = []
    return eval_expr(goal.expr, goal.binding, view, missing) is True


def generate_candidates(
    situation,
    goals: List[Goal],
    action_catalog,
    measurement_proposals,
    search_depth: int,
    env,
) -> List[Candidate]:
    """Depth-1 candidate per catalog action, deeper plans that achieve pending
    restore/task goals, and measurement candidates merged from proposals."""
    if search_depth < 1:
        raise ValueError("search depth must be >= 1")
    actions = sorted(action_catalog, key=lambda a: a.name)
    candidates = [Candidate(plan=(a,)) for a in actions]

    by_name = {c.first_action.name: c for c in candidates}
    for proposal in measurement_proposals:
        cand = by_name.get(proposal.action_name)
        if cand is not None:
            cand.provenance = "measurement"
            cand.enables = proposal.enables

    pending = [g for g in goals if g.kind in ("restore", "task") and not _goal_achieved(g, situation)]
    if search_depth >= 2 and pending and actions:
        for plan in _achieving_plans(situation, pending, actions, search_depth, env):
            candidates.append(Candidate(plan=plan))

    candidates.sort(key=lambda c: (c.first_action.name, len(c.plan), tuple(a.name for a in c.plan)))
    return candidates


def _achieving_plans(situation, goals, actions, depth, env):
    """DFS over action sequences (length 2..depth) achieving at least one goal;
    branches stop extending once they achieve. Views accumulate incrementally
    so each node costs one projection."""
    plans = []

    def extend(plan, view, accumulated):
        if any(_goal_achieved(g, view) for g in goals):
            if len(plan) >= 2:
                plans.append(plan)
            return  # prune extensions once achieved
        if len(plan) >= depth:
            return
        for action in actions:
            overrides, _ = env.project_action(view, action)
            merged = accumulated | overrides
            extend(plan + (action,), OverlayView(situation, merged, len(plan) + 1), merged)

    for action in actions:
        overrides, _ = env.project_action(situation, action)
        extend((action,), OverlayView(situation, dict(overrides), 1), dict(overrides))
    return plans


# ── labeling ───────────────────────────────────────────────────────


def bindings_touching(constraint, situation, changed) -> List[tuple]:
    """Type-consistent bindings with at least one bound entity in `changed`."""
    pools = [situation.entities_of_type(typ) for _, typ in constraint.scope]
    if not pools:
        return [()]
    if all(set(pool) <= changed for pool in pools):
        return list(itertools.product(*pools))
    out = []
    seen = set()
    for slot, pool in enumerate(pools):
        hits = [e for e in pool if e in changed]
        if not hits:
            continue
        other_pools = [p if i != slot else None for i, p in enumerate(pools)]
        for hit in hits:
            iters = [([hit] if p is None else p) for p in other_pools]
            for combo in itertools.product(*iters):
                if combo not in seen:
                    seen.add(combo)
                    out.append(combo)
    return sorted(seen) if out else out


def _projected_violation(constraint, ev) -> Optional[bool]:
    """True/False when determined: does this binding violate on projection?"""
    if ev.applies is not True or ev.holds is None:
        return None
    if constraint.modality == "require":
        return not ev.holds
    return bool(ev.holds)


def label_candidate(candidate: Candidate, constraints, eval_index, situation, env) -> Candidate:
    """Project the plan's first action and label against every constraint."""
    overrides, changed = env.project_action(situation, candidate.first_action)
    proj = OverlayView(situation, overrides)
    candidate.proj_view = proj
    labels = candidate.labels

    for constraint in constraints:
        if constraint.modality in ("require", "forbid"):
            for entities in bindings_touching(constraint, situation, changed):
                binding = dict(zip(constraint.scope_vars, entities))
                ev = evaluate_binding(constraint, binding, proj)
                violated = _projected_violation(constraint, ev)
                if violated is None:
                    continue
                now = eval_index.get((constraint.id, entities))
                now_status = now.status if now is not None else None
                if violated:
                    if now_status == VIOLATED and _strict_progress(
                        constraint, binding, situation, proj
                    ):
                        continue  # repair in progress; repair_bias rewards it
                    labels.add((constraint.id, PROHIBITED_BY))
                elif now_status == VIOLATED:
                    labels.add((constraint.id, REQUIRED_BY))
        else:
            for entities in itertools.product(
                *[situation.entities_of_type(t) for _, t in constraint.scope]
            ):
                binding = dict(zip(constraint.scope_vars, entities))
                ev = evaluate_binding(constraint, binding, proj)
                if ev.applies is True and ev.holds is True:
                    label = DESIRABLE_FOR if constraint.modality == "prefer" else UNDESIRABLE_FOR
                    labels.add((constraint.id, label))

    for cid in candidate.enables:
        labels.add((cid, ENABLES_GROUNDING))

    candidate.score = candidate.effective_score()
    return candidate


def _strict_progress(constraint, binding, situation, proj) -> bool:
    expr = compliance_expr(constraint)
    now = violation_measure(expr, binding, situation)
    nxt = violation_measure(expr, binding, proj)
    return now is not None and nxt is not None and nxt < now


# ── selection ──────────────────────────────────────────────────────


def select(candidates: List[Candidate], value_kb, suppressed: FrozenSet[str] = frozenset()) -> Decision:
    """Discard prohibited candidates, pick the max-score survivor, raise an
    impasse on empty survivors or an unordered +/- conflict on the top pick."""
    snapshot = tuple((c.name, c.effective_score(suppressed)) for c in candidates)
    if not candidates:
        return Decision(impasse=Impasse("noAcceptableCandidate", (), snapshot))
    survivors = [c for c in candidates if not c.prohibitions(suppressed)]
    if not survivors:
        involved = sorted({cid for c in candidates for cid in c.prohibitions(suppressed)})
        return Decision(impasse=Impasse("noAcceptableCandidate", tuple(involved), snapshot))
    ranked = sorted(survivors, key=lambda c: c.sort_key(suppressed))
    top = ranked[0]
    desirable = [c for c in top.label_ids(DESIRABLE_FOR) if c not in suppressed]
    undesirable = [c for c in top.label_ids(UNDESIRABLE_FOR) if c not in suppressed]
    unordered = sorted(
        {a for a in desirable for b in undesirable if not value_kb.strictly_ordered(a, b)}
        | {b for a in desirable for b in undesirable if not value_kb.strictly_ordered(a, b)}
    )
    if unordered:
        return Decision(impasse=Impasse("labelConflict", tuple(unordered), snapshot))
    return Decision(chosen=top, runners_up=ranked[1:])
