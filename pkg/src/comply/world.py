"""Ground-truth world state, observability masks, and the agent-visible Situation.

Operations return new values; nothing here mutates shared state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Optional, Tuple

from .values import UNKNOWN, Value

logger = logging.getLogger(__name__)

Ref = Tuple[str, str]  # (entity id, attribute)


@dataclass(frozen=True)
class Fact:
    entity: str
    attribute: str
    value: Value


@dataclass(frozen=True)
class WorldState:
    facts: Dict[Ref, Value]
    entity_types: Dict[str, str]
    tick: int = 0

    def with_fact(self, entity: str, attribute: str, value: Value) -> "WorldState":
        facts = dict(self.facts)
        facts[(entity, attribute)] = value
        return replace(self, facts=facts)

    def with_entity(self, entity: str, entity_type: str, attrs) -> "WorldState":
        facts = dict(self.facts)
        types = dict(self.entity_types)
        types[entity] = entity_type
        for name, value in attrs:
            facts[(entity, name)] = value
        return replace(self, facts=facts, entity_types=types)

    def advanced(self, facts: Dict[Ref, Value]) -> "WorldState":
        return WorldState(facts=facts, entity_types=dict(self.entity_types), tick=self.tick + 1)


@dataclass(frozen=True)
class ObservabilityMask:
    hidden: FrozenSet[Ref] = frozenset()
    revealed_until: Tuple = ()  # sorted tuple of (ref, expiry tick)

    def expiry(self, ref: Ref) -> Optional[int]:
        for r, tick in self.revealed_until:
            if r == ref:
                return tick
        return None

    def is_visible(self, ref: Ref, tick: int) -> bool:
        if ref not in self.hidden:
            return True
        exp = self.expiry(ref)
        return exp is not None and tick < exp


@dataclass(frozen=True)
class Situation:
    """Agent-visible projection of the world: observed facts plus unknown markers."""

    observed: Dict[Ref, Value]
    unknown: FrozenSet[Ref]
    entity_types: Dict[str, str]
    tick: int
    active_contexts: FrozenSet[str] = frozenset()

    def value(self, entity: str, attribute: str):
        ref = (entity, attribute)
        if ref in self.unknown:
            return UNKNOWN
        return self.observed.get(ref, UNKNOWN)

    def entities_of_type(self, entity_type: str) -> list:
        return sorted(e for e, t in self.entity_types.items() if t == entity_type)

    def with_contexts(self, tags) -> "Situation":
        return replace(self, active_contexts=frozenset(tags))


_warned_dangling: set = set()


def project(world: WorldState, mask: ObservabilityMask) -> Situation:
    """Apply the observability mask: hidden, unrevealed attributes become unknown.

    Mask entries for entities that do not exist are ignored (warned once per
    run; entities may come into existence later via spawn events).
    """
    observed = {}
    unknown = set()
    hidden_now = set()
    for ref in mask.hidden:
        if ref[0] not in world.entity_types:
            if ref not in _warned_dangling:
                logger.warning("mask entry %s.%s refers to an unknown entity", ref[0], ref[1])
                _warned_dangling.add(ref)
            continue
        if not mask.is_visible(ref, world.tick):
            hidden_now.add(ref)
            unknown.add(ref)
    for ref, value in world.facts.items():
        if ref not in hidden_now:
            observed[ref] = value
    return Situation(
        observed=observed,
        unknown=frozenset(unknown),
        entity_types=dict(world.entity_types),
        tick=world.tick,
    )


def reveal(
    mask: ObservabilityMask,
    entity: str,
    attribute: str,
    current_tick: int,
    staleness_ticks: int,
) -> ObservabilityMask:
    """Record a measurement: the attribute is visible for `staleness_ticks` ticks."""
    ref = (entity, attribute)
    if ref not in mask.hidden:
        logger.warning("reveal of %s.%s ignored: attribute is not hidden", entity, attribute)
        return mask
    entries = dict(mask.revealed_until)
    entries[ref] = current_tick + staleness_ticks
    return ObservabilityMask(
        hidden=mask.hidden,
        revealed_until=tuple(sorted(entries.items())),
    )
