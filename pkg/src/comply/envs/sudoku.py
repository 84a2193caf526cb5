"""Sudoku: static, fully observable, collectively coherent constraints.

Cells are entities of type `cell` with row/col/box/value attributes
(value 0 = observed-empty). The catalog offers every digit for the most
constrained empty cell; digit legality is the engine's job (prohibited
candidates get pruned), the cell choice uses the game rules the environment
already owns through its oracle.
"""

from __future__ import annotations

from typing import Dict, List, Set, Tuple

from ..lang.nodes import And, AttrRef, Comparison, Literal, Not
from ..world import WorldState
from .base import Action, EnvEvent, ScenarioSetupError, TaskGoal

ATTRIBUTES = frozenset({"id", "row", "col", "box", "value"})
TYPES = frozenset({"cell"})


class SudokuEnv:
    kind = "sudoku"
    reversible = True
    attributes = ATTRIBUTES
    types = TYPES

    def __init__(self, scenario):
        self.scenario = scenario
        world = _world_from_facts(scenario)
        cells = sorted(e for e, t in world.entity_types.items() if t == "cell")
        if len(cells) == 16:
            self.n = 4
        elif len(cells) == 81:
            self.n = 9
        else:
            raise ScenarioSetupError(
                f"sudoku needs 16 or 81 cell entities, found {len(cells)}"
            )
        self.cells = cells
        self.given = frozenset(c for c in cells if world.facts[(c, "value")] != 0)
        for c in cells:
            for attr in ("id", "row", "col", "box", "value"):
                if (c, attr) not in world.facts:
                    raise ScenarioSetupError(f"cell '{c}' is missing attribute '{attr}'")
        self._initial = world

    def initial_world(self) -> WorldState:
        return self._initial

    # ── actions ───────────────────────────────────────────────────

    def available_actions(self, world: WorldState) -> List[Action]:
        target = self._most_constrained_empty(world)
        if target is None:
            return []
        r = world.facts[(target, "row")]
        c = world.facts[(target, "col")]
        return [
            Action(name=f"place({r},{c},{d})", base="place", params=(r, c, d))
            for d in range(1, self.n + 1)
        ]

    def _most_constrained_empty(self, world):
        """Empty cell with the fewest rule-legal digits; ties by (row, col)."""
        best = None
        for cell in self.cells:
            if world.facts[(cell, "value")] != 0:
                continue
            legal = len(self._legal_digits(world, cell))
            key = (legal, world.facts[(cell, "row")], world.facts[(cell, "col")])
            if best is None or key < best[0]:
                best = (key, cell)
        return best[1] if best else None

    def _legal_digits(self, world, cell) -> Set[int]:
        row = world.facts[(cell, "row")]
        col = world.facts[(cell, "col")]
        box = world.facts[(cell, "box")]
        used = set()
        for other in self.cells:
            if other == cell:
                continue
            if (
                world.facts[(other, "row")] == row
                or world.facts[(other, "col")] == col
                or world.facts[(other, "box")] == box
            ):
                used.add(world.facts[(other, "value")])
        return set(range(1, self.n + 1)) - used

    def _cell_at(self, world, r, c):
        for cell in self.cells:
            if world.facts[(cell, "row")] == r and world.facts[(cell, "col")] == c:
                return cell
        return None

    # ── projection and stepping ───────────────────────────────────

    def project_action(self, view, action: Action):
        r, c, d = action.params
        cell = self._cell_at_view(view, r, c)
        if cell is None:
            return {}, set()
        return {(cell, "value"): d}, {cell}

    def _cell_at_view(self, view, r, c):
        for cell in self.cells:
            if view.value(cell, "row") == r and view.value(cell, "col") == c:
                return cell
        return None

    def step(self, world: WorldState, action: Action):
        if action.base != "place":
            return world.advanced(dict(world.facts)), [
                EnvEvent("rejected", (("reason", f"unknown action {action.name}"),))
            ]
        r, c, d = action.params
        cell = self._cell_at(world, r, c)
        events: List[EnvEvent] = []
        facts = dict(world.facts)
        if cell is None or not (1 <= d <= self.n):
            events.append(EnvEvent("rejected", (("action", action.name), ("reason", "out of range"))))
        elif facts[(cell, "value")] != 0:
            events.append(EnvEvent("rejected", (("action", action.name), ("reason", "cell not empty"))))
        else:
            facts[(cell, "value")] = d
        new_world = world.advanced(facts)
        if all(facts[(c_, "value")] != 0 for c_ in self.cells):
            if not sudoku_oracle(new_world):
                events.append(EnvEvent("solved", ()))
            else:
                events.append(EnvEvent("complete_invalid", ()))
        return new_world, events

    # ── goals and snapshots ───────────────────────────────────────

    def task_goals(self, view) -> List[TaskGoal]:
        expr = And(
            tuple(
                Not(Comparison("=", AttrRef(cell, "value"), Literal(0)))
                for cell in self.cells
            )
        )
        return [TaskGoal("board_complete", expr, {cell: cell for cell in self.cells})]

    def snapshot(self, world: WorldState):
        return dict(world.facts)

    def restore(self, world: WorldState, snap, tick: int) -> WorldState:
        return WorldState(facts=dict(snap), entity_types=dict(world.entity_types), tick=tick)


def sudoku_oracle(world: WorldState) -> Set[Tuple[str, str]]:
    """Brute-force pairwise scan: same row/col/box with equal nonzero values.

    Pairs are unordered (each conflict reported once).
    """
    cells = sorted(e for e, t in world.entity_types.items() if t == "cell")
    violated = set()
    for i, a in enumerate(cells):
        va = world.facts[(a, "value")]
        if va == 0:
            continue
        for b in cells[i + 1 :]:
            if world.facts[(b, "value")] != va:
                continue
            if (
                world.facts[(a, "row")] == world.facts[(b, "row")]
                or world.facts[(a, "col")] == world.facts[(b, "col")]
                or world.facts[(a, "box")] == world.facts[(b, "box")]
            ):
                violated.add((a, b))
    return violated


def _world_from_facts(scenario) -> WorldState:
    facts: Dict[Tuple[str, str], object] = {}
    types: Dict[str, str] = {}
    for decl in scenario.facts:
        types[decl.entity] = decl.entity_type
        for name, value in decl.attrs:
            facts[(decl.entity, name)] = value
    return WorldState(facts=facts, entity_types=types, tick=0)
