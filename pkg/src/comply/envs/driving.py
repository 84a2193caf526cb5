"""Two-lane driving grid world: dynamic, partially observable, fail-hard.

Kinematics are shared between the step function and the planner's one-step
projection (same rule both ways), so projections match reality on observed
attributes whenever no scripted event fires.

Derived attributes per non-ego car (relative to self):
  dist       car position minus self position
  same_lane  boolean
  lane_delta car lane minus self lane
  rel_speed  car speed minus self speed
  gap_ticks  dist / self speed when self speed > 0, else sentinel 99
Derived on self: eta_deficit (remaining distance minus reachable distance at
current speed by the deadline) when hospital_pos and deadline are set, and
last_action (symbol).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Tuple

from ..lang.nodes import AttrRef, Comparison, SetEvent, SpawnEvent
from ..values import UNKNOWN, normalize
from ..world import WorldState
from .base import Action, EnvEvent, ScenarioSetupError, TaskGoal

ATTRIBUTES = frozenset(
    {
        "pos",
        "lane",
        "speed",
        "speed_limit",
        "cruise_speed",
        "zone",
        "country",
        "hospital_pos",
        "deadline",
        "dist",
        "same_lane",
        "lane_delta",
        "rel_speed",
        "gap_ticks",
        "last_action",
        "eta_deficit",
    }
)
TYPES = frozenset({"ego", "car"})

GAP_SENTINEL = 99
SPEED_MIN, SPEED_MAX = 0, 10
LANE_MIN, LANE_MAX = 0, 1

SPEED_DELTAS = {
    "accelerate": 1,
    "decelerate": -1,
    "hard_brake": -3,
    "maintain": 0,
    "measure_gap": 0,  # speed maintained while measuring
    "change_lane_left": 0,
    "change_lane_right": 0,
}
LANE_DELTAS = {"change_lane_left": 1, "change_lane_right": -1}

BASE_ACTIONS = (
    "accelerate",
    "change_lane_left",
    "change_lane_right",
    "decelerate",
    "hard_brake",
    "maintain",
)


class DrivingEnv:
    kind = "driving"
    reversible = False
    attributes = ATTRIBUTES
    types = TYPES
    # a fatal impasse leaves the world dynamic: coasting equals maintain
    noop_action = Action(name="maintain", base="maintain")

    def __init__(self, scenario):
        self.scenario = scenario
        facts: Dict[Tuple[str, str], object] = {}
        types: Dict[str, str] = {}
        for decl in scenario.facts:
            types[decl.entity] = decl.entity_type
            for name, value in decl.attrs:
                facts[(decl.entity, name)] = value
        egos = sorted(e for e, t in types.items() if t == "ego")
        if egos != ["self"]:
            raise ScenarioSetupError("driving needs exactly one ego entity named 'self'")
        for req in ("pos", "lane", "speed"):
            if ("self", req) not in facts:
                raise ScenarioSetupError(f"self is missing required attribute '{req}'")
        for car in (e for e, t in types.items() if t == "car"):
            for req in ("pos", "lane", "speed"):
                if (car, req) not in facts:
                    raise ScenarioSetupError(f"car '{car}' is missing required attribute '{req}'")
        facts[("self", "last_action")] = "none"
        _recompute_derived(facts, types, tick=0)
        self._initial = WorldState(facts=facts, entity_types=types, tick=0)
        self._events_by_tick: Dict[int, list] = {}
        for ev in scenario.events:
            self._events_by_tick.setdefault(ev.tick, []).append(ev)

    def initial_world(self) -> WorldState:
        return self._initial

    # ── actions ───────────────────────────────────────────────────

    def available_actions(self, world: WorldState) -> List[Action]:
        actions = [Action(name=base, base=base) for base in BASE_ACTIONS]
        for car in sorted(e for e, t in world.entity_types.items() if t == "car"):
            actions.append(
                Action(
                    name=f"measure_gap({car})",
                    base="measure_gap",
                    params=(car,),
                    reveals=(car, "gap_ticks"),
                )
            )
        return sorted(actions, key=lambda a: a.name)

    # ── shared kinematics ─────────────────────────────────────────

    def project_action(self, view, action: Action):
        """One-step projection over observed attributes; unknowns stay unknown."""
        lookup = view.value
        overrides, _ = _apply_kinematics(lookup, view.entity_types, action, view.tick)
        changed = set(view.entity_types)
        return overrides, changed

    def step(self, world: WorldState, action: Action):
        facts = dict(world.facts)
        types = dict(world.entity_types)

        def lookup(entity, attr):
            return facts.get((entity, attr), UNKNOWN)

        overrides, warnings = _apply_kinematics(lookup, types, action, world.tick)
        facts.update(overrides)
        events = [EnvEvent("warning", (("reason", w),)) for w in warnings]

        new_tick = world.tick + 1
        for ev in self._events_by_tick.get(new_tick, []):
            if isinstance(ev, SetEvent):
                facts[(ev.entity, ev.attr)] = ev.value
                events.append(
                    EnvEvent("set", (("entity", ev.entity), ("attr", ev.attr)))
                )
            elif isinstance(ev, SpawnEvent):
                types[ev.entity] = ev.entity_type
                for name, value in ev.attrs:
                    facts[(ev.entity, name)] = value
                events.append(
                    EnvEvent("spawn", (("entity", ev.entity), ("type", ev.entity_type)))
                )
        _recompute_derived(facts, types, tick=new_tick)
        new_world = WorldState(facts=facts, entity_types=types, tick=new_tick)

        cars = sorted(e for e in types)
        for i, a in enumerate(cars):
            for b in cars[i + 1 :]:
                if (
                    facts.get((a, "pos")) is not None
                    and facts.get((a, "pos")) == facts.get((b, "pos"))
                    and facts.get((a, "lane")) == facts.get((b, "lane"))
                ):
                    events.append(EnvEvent("collision", (("first", a), ("second", b))))
                    return new_world, events

        hospital = facts.get(("self", "hospital_pos"))
        if hospital is not None and facts[("self", "pos")] >= hospital:
            events.append(EnvEvent("arrival", (("pos", str(facts[("self", "pos")])),)))
        return new_world, events

    # ── goals ─────────────────────────────────────────────────────

    def task_goals(self, view) -> List[TaskGoal]:
        hospital = view.value("self", "hospital_pos")
        if hospital is UNKNOWN:
            return []
        expr = Comparison(">=", AttrRef("self", "pos"), AttrRef("self", "hospital_pos"))
        return [TaskGoal("reach_hospital", expr, {"self": "self"})]

    def snapshot(self, world: WorldState):
        raise NotImplementedError("driving is irreversible")


def _apply_kinematics(lookup, types, action: Action, tick: int):
    """Action delta + movement + derived recompute, over whatever is observable.

    Returns (overrides ref->value, warnings). Values whose inputs are unknown
    are simply not written.
    """
    overrides: Dict[Tuple[str, str], object] = {}
    warnings: List[str] = []

    speed = lookup("self", "speed")
    lane = lookup("self", "lane")
    if speed is not UNKNOWN:
        delta = SPEED_DELTAS.get(action.base, 0)
        speed = max(SPEED_MIN, min(SPEED_MAX, speed + delta))
        overrides[("self", "speed")] = speed
    if action.base in LANE_DELTAS and lane is not UNKNOWN:
        target = lane + LANE_DELTAS[action.base]
        if target < LANE_MIN or target > LANE_MAX:
            warnings.append(f"illegal lane change ignored at lane {lane}")
        else:
            lane = target
            overrides[("self", "lane")] = lane
    overrides[("self", "last_action")] = action.base

    for entity in sorted(types):
        pos = lookup(entity, "pos")
        if pos is UNKNOWN:
            continue
        v = speed if entity == "self" else lookup(entity, "speed")
        if v is UNKNOWN:
            continue
        overrides[(entity, "pos")] = pos + v

    def resolved(entity, attr):
        ref = (entity, attr)
        return overrides[ref] if ref in overrides else lookup(entity, attr)

    _derived_into(overrides, resolved, types, tick + 1)
    return overrides, warnings


def _recompute_derived(facts: Dict, types: Dict, tick: int) -> None:
    def resolved(entity, attr):
        return facts.get((entity, attr), UNKNOWN)

    overrides: Dict[Tuple[str, str], object] = {}
    _derived_into(overrides, resolved, types, tick)
    facts.update(overrides)


def _derived_into(overrides: Dict, resolved, types: Dict, tick: int) -> None:
    self_pos = resolved("self", "pos")
    self_lane = resolved("self", "lane")
    self_speed = resolved("self", "speed")
    for entity in sorted(e for e, t in types.items() if t == "car"):
        pos = resolved(entity, "pos")
        lane = resolved(entity, "lane")
        speed = resolved(entity, "speed")
        if pos is not UNKNOWN and self_pos is not UNKNOWN:
            dist = pos - self_pos
            overrides[(entity, "dist")] = dist
            if self_speed is not UNKNOWN:
                gap = (
                    normalize(Fraction(dist, self_speed))
                    if self_speed > 0
                    else GAP_SENTINEL
                )
                overrides[(entity, "gap_ticks")] = gap
        if lane is not UNKNOWN and self_lane is not UNKNOWN:
            overrides[(entity, "same_lane")] = lane == self_lane
            overrides[(entity, "lane_delta")] = lane - self_lane
        if speed is not UNKNOWN and self_speed is not UNKNOWN:
            overrides[(entity, "rel_speed")] = speed - self_speed
    hospital = resolved("self", "hospital_pos")
    deadline = resolved("self", "deadline")
    if (
        hospital is not UNKNOWN
        and deadline is not UNKNOWN
        and self_pos is not UNKNOWN
        and self_speed is not UNKNOWN
    ):
        remaining_ticks = max(0, deadline - tick)
        overrides[("self", "eta_deficit")] = (hospital - self_pos) - self_speed * remaining_ticks
