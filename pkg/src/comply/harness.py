"""Per-tick pipeline driver, trace/metrics emission, and run bookkeeping.

Each tick executes exactly: project -> recognize contexts -> internalize
pending constraints -> filter relevant -> ground/evaluate -> propose
measurements -> goals -> candidates -> label -> repair bias -> select ->
(detect/mitigate on impasse or +/-) -> act -> environment step.

Trace format (normative for golden tests): one line per event,
`tick=<n> stage=<STAGE> k=v ...`, events ordered by (tick, stage order,
emission index). The summary is a pure fold over the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .contexts import AssociationStore, filter_relevant, recognize_contexts, update_association
from .envs.base import Action, EnvEvent, ScenarioSetupError
from .envs.driving import DrivingEnv
from .envs.sudoku import SudokuEnv
from .grounding import (
    EVALUABLE,
    FILTERED,
    PARTIAL,
    VIOLATED,
    ground_all,
    propose_measurements,
)
from .instructor import InstructorScript
from .internalize import InternalizationError, Ontology, VocabularyMap, internalize, resolve_unmapped
from .mitigation import (
    CAUSE_MITIGATION,
    MitigationHooks,
    ValueKB,
    ViolationLog,
    close_repaired,
    detect_conflicts,
    mitigate,
    open_environment_violations,
    repair_bias,
    trajectory_clean,
)
from .planning import Goal, constraints_to_goals, generate_candidates, label_candidate, select
from .values import format_value
from .world import ObservabilityMask, project, reveal

STAGES = (
    "PERCEIVE",
    "CONTEXT",
    "GROUND",
    "GOALS",
    "CANDIDATES",
    "SELECT",
    "CONFLICT",
    "MITIGATE",
    "QUERY",
    "ACT",
    "VIOLATION_OPEN",
    "VIOLATION_CLOSE",
    "ENV_EVENT",
    "PARKED",
)
_STAGE_ORDER = {name: i for i, name in enumerate(STAGES)}


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    stage: str
    payload: Tuple  # ordered (key, value-string) pairs

    def render(self) -> str:
        parts = [f"tick={self.tick}", f"stage={self.stage}"]
        parts.extend(f"{k}={v}" for k, v in self.payload)
        return " ".join(parts)


@dataclass
class RunSummary:
    outcome: str = "timeout"  # success | failure | timeout
    ticks: int = 0
    decisions: int = 0
    conflicts: int = 0
    queries: int = 0
    measurements: int = 0
    violations_opened: int = 0
    violations_closed: int = 0
    violation_ticks: Dict[str, int] = field(default_factory=dict)

    def render(self) -> str:
        lines = [
            f"outcome: {self.outcome}",
            f"ticks: {self.ticks}",
            f"decisions: {self.decisions}",
            f"conflicts: {self.conflicts}",
            f"queries: {self.queries}",
            f"measurements: {self.measurements}",
            f"violations_opened: {self.violations_opened}",
            f"violations_closed: {self.violations_closed}",
            "violation_ticks:",
        ]
        for cid in sorted(self.violation_ticks):
            lines.append(f"  {cid}: {self.violation_ticks[cid]}")
        lines.append("---")
        vt = ";".join(f"{cid}:{self.violation_ticks[cid]}" for cid in sorted(self.violation_ticks))
        lines.append(
            f"outcome={self.outcome} ticks={self.ticks} decisions={self.decisions} "
            f"conflicts={self.conflicts} queries={self.queries} measurements={self.measurements} "
            f"violations_opened={self.violations_opened} violations_closed={self.violations_closed} "
            f"violation_ticks={vt or '-'}"
        )
        return "\n".join(lines) + "\n"


def summarize(events: List[TraceEvent]) -> RunSummary:
    """Pure fold over the trace; must agree with the summary run_scenario emits."""
    summary = RunSummary()
    if not events:
        return summary
    last_tick = max(ev.tick for ev in events)
    summary.ticks = last_tick + 1
    opens: Dict[str, List[int]] = {}
    for ev in events:
        payload = dict(ev.payload)
        if ev.stage == "ACT":
            summary.decisions += 1
            if payload.get("measurement") == "true":
                summary.measurements += 1
        elif ev.stage == "CONFLICT":
            summary.conflicts += 1
        elif ev.stage == "QUERY":
            summary.queries += 1
        elif ev.stage == "VIOLATION_OPEN":
            summary.violations_opened += 1
            opens.setdefault(payload["constraint"], []).append(ev.tick)
        elif ev.stage == "VIOLATION_CLOSE":
            summary.violations_closed += 1
            cid = payload["constraint"]
            opened = opens.get(cid, [])
            if opened:
                start = opened.pop(0)
                summary.violation_ticks[cid] = summary.violation_ticks.get(cid, 0) + (ev.tick - start)
        elif ev.stage == "ENV_EVENT":
            kind = payload.get("kind")
            if kind in EnvEvent.TERMINAL_SUCCESS:
                summary.outcome = "success"
            elif kind in EnvEvent.TERMINAL_FAILURE:
                summary.outcome = "failure"
    for cid, pending in opens.items():
        for start in pending:
            summary.violation_ticks[cid] = summary.violation_ticks.get(cid, 0) + (last_tick - start + 1)
    return summary


@dataclass
class RunResult:
    events: List[TraceEvent]
    summary: RunSummary

    @property
    def trace_text(self) -> str:
        return "\n".join(ev.render() for ev in self.events) + ("\n" if self.events else "")

    @property
    def summary_text(self) -> str:
        return self.summary.render()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(str(x) for x in value)
        return ",".join(items) if items else "-"
    return format_value(value) if not isinstance(value, str) else value


def make_environment(spec):
    if spec.environment == "sudoku":
        return SudokuEnv(spec)
    if spec.environment == "driving":
        return DrivingEnv(spec)
    raise ScenarioSetupError(f"unknown environment '{spec.environment}'")


def build_ontology(spec, env) -> Ontology:
    attributes = set(env.attributes)
    types = set(env.types)
    for decl in spec.facts:
        types.add(decl.entity_type)
        attributes.update(name for name, _ in decl.attrs)
    for ev in spec.events:
        if hasattr(ev, "attr"):
            attributes.add(ev.attr)
        if hasattr(ev, "attrs"):
            attributes.update(name for name, _ in ev.attrs)
            types.add(ev.entity_type)
    contexts = {rule.tag for rule in spec.context_rules}
    return Ontology(
        attributes=frozenset(attributes),
        types=frozenset(types),
        contexts=frozenset(contexts),
    )


@dataclass
class _StackEntry:
    snapshot: object
    actions: List[Action]
    index: int = 0
    tick: int = 0


class Runner:
    """One scenario run: owns the mutable run state and emits the trace."""

    def __init__(self, spec):
        self.spec = spec
        self.env = make_environment(spec)
        self.world = self.env.initial_world()
        self.mask = ObservabilityMask(hidden=frozenset(spec.hidden))
        self.ontology = build_ontology(spec, self.env)
        self.vocab = VocabularyMap.from_entries(spec.vocab)
        self.script = InstructorScript(spec.instructor)
        self.kb = ValueKB.merged(spec.constraints, spec.values)
        self.store = AssociationStore()
        for entry in self.script.take_relevance():
            self.store = update_association(
                self.store, entry.constraint_id, entry.tag, 1 if entry.relevant else -1
            )
        self.pending = list(spec.constraints)  # not yet internalized
        self.active_constraints: list = []
        self.by_id: dict = {}
        self.log = ViolationLog()
        self.asked_pairs: set = set()
        self.events: List[TraceEvent] = []
        self._tick_buffer: List[Tuple[int, int, TraceEvent]] = []
        self._emission = 0
        self.stack: List[_StackEntry] = []
        self.outcome: Optional[str] = None

    # ── trace plumbing ────────────────────────────────────────────

    def emit(self, stage: str, payload_pairs):
        tick = self.world.tick
        pairs = tuple((k, _fmt(v)) for k, v in payload_pairs)
        self._tick_buffer.append((_STAGE_ORDER[stage], self._emission, TraceEvent(tick, stage, pairs)))
        self._emission += 1

    def _flush_tick(self):
        self._tick_buffer.sort(key=lambda item: (item[0], item[1]))
        self.events.extend(ev for _, _, ev in self._tick_buffer)
        self._tick_buffer = []
        self._emission = 0

    # ── run loop ──────────────────────────────────────────────────

    def run(self) -> RunResult:
        max_ticks = self.spec.run.max_ticks
        while self.world.tick < max_ticks and self.outcome is None:
            self._run_tick()
            self._flush_tick()
        summary = summarize(self.events)
        return RunResult(events=self.events, summary=summary)

    def _run_tick(self):
        spec = self.spec
        situation = project(self.world, self.mask)
        self.emit("PERCEIVE", [("observed", len(situation.observed)), ("unknown", len(situation.unknown))])

        active = recognize_contexts(situation, spec.context_rules)
        situation = situation.with_contexts(active)
        self.emit("CONTEXT", [("active", active)])

        self._internalize_pending()

        relevant = filter_relevant(self.active_constraints, active, self.store)

        batches, parked_types = ground_all(
            relevant, situation, spec.run.grounding_limit, priority_of=self.kb.get
        )
        parked_ids = {cid for cid, _ in parked_types}
        for cid, reason in parked_types:
            self.emit("PARKED", [("constraint", cid), ("reason", "type_error"), ("detail", reason)])
        evaluations = []
        eval_index = {}
        for batch in batches:
            evaluations.extend(batch.evaluations)
            counts = {EVALUABLE: 0, PARTIAL: 0, FILTERED: 0}
            for rec in batch.records:
                counts[rec.status] += 1
            violated = sum(1 for ev in batch.evaluations if ev.status == VIOLATED)
            self.emit(
                "GROUND",
                [
                    ("constraint", batch.constraint_id),
                    ("groundings", len(batch.records)),
                    ("filtered", counts[FILTERED]),
                    ("evaluable", counts[EVALUABLE]),
                    ("unknown", counts[PARTIAL]),
                    ("violated", violated),
                    ("truncated", batch.truncated),
                ],
            )
        for ev in evaluations:
            eval_index[(ev.grounding.constraint_id, ev.grounding.entities)] = ev

        tick = self.world.tick
        for rec in close_repaired(self.log, evaluations, tick):
            self.emit("VIOLATION_CLOSE", [("constraint", rec.constraint_id), ("opened", rec.opened_tick)])
        for rec in open_environment_violations(self.log, evaluations, tick):
            self.emit("VIOLATION_OPEN", [("constraint", rec.constraint_id), ("cause", rec.cause)])

        catalog = self.env.available_actions(self.world)
        proposals = propose_measurements(evaluations, catalog)

        goals = constraints_to_goals(evaluations, self.by_id)
        for tg in self.env.task_goals(situation):
            goals.append(Goal(kind="task", name=tg.name, expr=tg.expr, binding=tg.binding))
        counts = {"maintain": 0, "restore": 0, "task": 0}
        for g in goals:
            counts[g.kind] += 1
        self.emit(
            "GOALS",
            [("maintain", counts["maintain"]), ("restore", counts["restore"]), ("task", counts["task"])],
        )

        label_constraints = [c for c in relevant if c.id not in parked_ids]

        def build_candidates(depth):
            cands = generate_candidates(situation, goals, catalog, proposals, depth, self.env)
            for cand in cands:
                label_candidate(cand, label_constraints, eval_index, situation, self.env)
            repair_bias(self.log.open_ids(), cands, evaluations, self.by_id, situation)
            return cands

        candidates = build_candidates(spec.run.search_depth)
        measurements = sum(1 for c in candidates if c.provenance == "measurement")
        self.emit("CANDIDATES", [("count", len(candidates)), ("measurements", measurements)])

        decision = select(candidates, self.kb)
        survivors = [c for c in candidates if not c.prohibitions()]
        if decision.chosen is not None:
            self.emit(
                "SELECT",
                [
                    ("candidates", len(candidates)),
                    ("survivors", len(survivors)),
                    ("chosen", decision.chosen.name),
                    ("score", decision.chosen.effective_score()),
                ],
            )
        else:
            self.emit(
                "SELECT",
                [
                    ("candidates", len(candidates)),
                    ("survivors", len(survivors)),
                    ("impasse", decision.impasse.kind),
                    ("involved", decision.impasse.involved),
                ],
            )

        chosen = decision.chosen
        provenance_override = None

        needs_mitigation = decision.impasse is not None or (chosen is not None and chosen.pm_flagged)
        if needs_mitigation and self.env.reversible and decision.impasse is not None:
            # Reversible worlds backtrack over selection order instead of
            # raising a conflict (dead ends are search failures, not
            # constraint conflicts).
            self._backtrack()
            return

        if needs_mitigation:
            conflict = detect_conflicts(decision)[0]
            self.emit(
                "CONFLICT",
                [("kind", conflict.kind), ("involved", conflict.involved)]
                + ([("candidate", conflict.candidate)] if conflict.candidate else []),
            )
            hooks = MitigationHooks(
                reselect=lambda suppressed: select(candidates, self.kb, suppressed),
                regenerate=lambda: build_candidates(spec.run.search_depth + 2),
                trajectory_clean=lambda cand: trajectory_clean(
                    cand, label_constraints, eval_index, situation, self.env, set(conflict.involved)
                ),
                asked_pairs=self.asked_pairs,
                emit_query=lambda a, b, winner: self.emit(
                    "QUERY",
                    [
                        ("ask", f"priority {a} vs {b}"),
                        ("answered", winner is not None),
                        ("winner", winner or "-"),
                    ],
                ),
            )
            outcome = mitigate(conflict, candidates, self.kb, self.script, hooks)
            if outcome is None:
                self.emit("ENV_EVENT", [("kind", "fatal_impasse")])
                self._act(None, None)
                return
            self.emit(
                "MITIGATE",
                [
                    ("strategy", outcome.strategy),
                    ("chosen", outcome.chosen.name),
                    ("overridden", outcome.overridden),
                    ("queries", outcome.queries_issued),
                ]
                + ([("dropped", outcome.dropped)] if outcome.dropped else []),
            )
            for cid in outcome.overridden:
                constraint = self.by_id.get(cid)
                if constraint is not None and constraint.modality in ("require", "forbid"):
                    rec = self.log.open(cid, tick, CAUSE_MITIGATION)
                    if rec is not None:
                        self.emit("VIOLATION_OPEN", [("constraint", cid), ("cause", rec.cause)])
            chosen = outcome.chosen
            provenance_override = outcome.strategy

        if self.env.reversible and chosen is not None:
            ordered = [chosen.first_action] + [c.first_action for c in decision.runners_up]
            self.stack.append(
                _StackEntry(snapshot=self.env.snapshot(self.world), actions=ordered, tick=tick)
            )

        self._act(chosen, provenance_override)

    # ── internalization ───────────────────────────────────────────

    def _internalize_pending(self):
        still_pending = []
        for spec in self.pending:
            result = internalize(spec, self.vocab, self.ontology)
            if isinstance(result, InternalizationError):
                delta = resolve_unmapped(result, self.script)
                if delta is not None:
                    self.vocab = self.vocab.merged(delta)
                    result = internalize(spec, self.vocab, self.ontology)
            if isinstance(result, InternalizationError):
                terms = [f"{name}:{kind}" for name, kind in result.unmapped]
                terms += [f"{name}:{used}/{mapped}" for name, used, mapped in result.kind_mismatches]
                self.emit(
                    "PARKED",
                    [("constraint", result.constraint_id), ("reason", "unmapped"), ("terms", terms)],
                )
                still_pending.append(spec)
            else:
                self.active_constraints.append(result)
                self.by_id[result.id] = result
        self.pending = still_pending

    # ── acting ────────────────────────────────────────────────────

    def _act(self, candidate, provenance_override):
        if candidate is None:
            noop = getattr(self.env, "noop_action", None)
            self.emit("ACT", [("action", "noop"), ("provenance", "fatal"), ("measurement", False)])
            if noop is not None:
                self._step_env(noop)
            else:
                self.world = self.world.advanced(dict(self.world.facts))
            return
        action = candidate.first_action
        payload = [
            ("action", action.name),
            ("provenance", provenance_override or candidate.provenance),
            ("measurement", action.reveals is not None),
            ("score", candidate.effective_score()),
        ]
        if len(candidate.plan) > 1:
            payload.append(("plan", candidate.name))
        self.emit("ACT", payload)
        if action.reveals is not None:
            self.mask = reveal(
                self.mask,
                action.reveals[0],
                action.reveals[1],
                self.world.tick,
                self.spec.run.staleness,
            )
        self._step_env(action)

    def _step_env(self, action: Action):
        self.world, env_events = self.env.step(self.world, action)
        for ev in env_events:
            self.emit_post_step("ENV_EVENT", (("kind", ev.kind),) + ev.payload)
            if ev.kind in EnvEvent.TERMINAL_SUCCESS:
                self.outcome = "success"
            elif ev.kind in EnvEvent.TERMINAL_FAILURE:
                self.outcome = "failure"

    def emit_post_step(self, stage, pairs):
        # env events belong to the tick that acted (world.tick already advanced)
        tick = self.world.tick - 1
        rendered = tuple((k, _fmt(v)) for k, v in pairs)
        self._tick_buffer.append(
            (_STAGE_ORDER[stage], self._emission, TraceEvent(tick, stage, rendered))
        )
        self._emission += 1

    # ── backtracking (reversible environments) ────────────────────

    def _backtrack(self):
        while self.stack:
            top = self.stack[-1]
            top.index += 1
            if top.index >= len(top.actions):
                self.stack.pop()
                continue
            action = top.actions[top.index]
            self.world = self.env.restore(self.world, top.snapshot, self.world.tick)
            self.emit(
                "ENV_EVENT",
                [("kind", "backtrack"), ("depth", len(self.stack)), ("retry", action.name)],
            )
            self.emit(
                "ACT",
                [("action", action.name), ("provenance", "backtrack"), ("measurement", False)],
            )
            self._step_env(action)
            return
        self.emit("ENV_EVENT", [("kind", "fatal_impasse")])
        self._act(None, None)


def run_scenario(spec) -> RunResult:
    """Execute one validated scenario deterministically."""
    return Runner(spec).run()
