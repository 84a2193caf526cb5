"""Binding enumeration, evaluation statuses, budgets, measurement proposals."""

import itertools

from comply.envs.base import Action
from comply.grounding import (
    COMPLIANT,
    EVALUABLE,
    FILTERED,
    PARTIAL,
    UNKNOWN_STATUS,
    VIOLATED,
    enumerate_groundings,
    evaluate,
    ground_all,
    propose_measurements,
)
from comply.internalize import Ontology, VocabularyMap, internalize
from comply.lang import parse_constraint_file
from comply.world import ObservabilityMask, WorldState, project

ONTOLOGY = Ontology(
    attributes=frozenset({"id", "row", "col", "box", "value", "speed", "speed_limit", "gap_ticks", "zone"}),
    types=frozenset({"cell", "car"}),
    contexts=frozenset(),
)


def internal_of(src):
    spec = parse_constraint_file(src).specs[0]
    out = internalize(spec, VocabularyMap(), ONTOLOGY)
    assert not hasattr(out, "unmapped"), out
    return out


def situation_from(facts, types, hidden=frozenset()):
    world = WorldState(facts=dict(facts), entity_types=dict(types), tick=0)
    return project(world, ObservabilityMask(hidden=frozenset(hidden)))


def board_4x4(values=None):
    """A 4x4 grid of cell entities; values indexed by (row, col), default 0."""
    facts, types = {}, {}
    values = values or {}
    for r in range(1, 5):
        for c in range(1, 5):
            ent = f"cell_{r}_{c}"
            types[ent] = "cell"
            facts[(ent, "id")] = (r - 1) * 4 + c
            facts[(ent, "row")] = r
            facts[(ent, "col")] = c
            facts[(ent, "box")] = ((r - 1) // 2) * 2 + (c - 1) // 2 + 1
            facts[(ent, "value")] = values.get((r, c), 0)
    return facts, types


PAIRWISE = """constraint distinct { modality: forbid scope: a:cell, b:cell
  when: not(a.id = b.id)
  holds: and(a.value = b.value, not(a.value = 0)) }"""


def test_one_grounding_per_entity():
    c = internal_of("constraint s { modality: require scope: a:car holds: a.speed <= 5 }")
    sit = situation_from({("x", "speed"): 1, ("y", "speed"): 2}, {"x": "car", "y": "car"})
    records, truncated = enumerate_groundings(c, sit, limit=100)
    assert not truncated
    assert [r.entities for r in records] == [("x",), ("y",)]


def test_pairwise_4x4_count_matches_exhaustive_oracle():
    """[DERIVED] oracle: exhaustive enumeration over 16 cells gives 16*15=240
    bindings that survive the when-clause."""
    facts, types = board_4x4()
    cells = sorted(types)
    expected_non_filtered = sum(
        1 for a, b in itertools.product(cells, repeat=2) if a != b
    )
    assert expected_non_filtered == 240

    c = internal_of(PAIRWISE)
    sit = situation_from(facts, types)
    records, truncated = enumerate_groundings(c, sit, limit=1000)
    assert not truncated
    assert len(records) == 256
    non_filtered = [r for r in records if r.status != FILTERED]
    assert len(non_filtered) == 240


def test_when_referencing_hidden_attr_gives_partial():
    c = internal_of(
        """constraint g { modality: require scope: a:car
           when: a.zone = urban holds: a.speed <= 5 }"""
    )
    sit = situation_from(
        {("x", "zone"): "urban", ("x", "speed"): 3},
        {"x": "car"},
        hidden={("x", "zone")},
    )
    records, _ = enumerate_groundings(c, sit, limit=10)
    assert records[0].status == PARTIAL
    assert ("x", "zone") in records[0].missing


def test_evaluate_statuses():
    c = internal_of("constraint s { modality: require scope: a:car holds: a.speed <= a.speed_limit }")
    sit = situation_from({("x", "speed"): 30, ("x", "speed_limit"): 25}, {"x": "car"})
    records, _ = enumerate_groundings(c, sit, limit=10)
    ev = evaluate(records[0], c, sit)
    assert ev.status == VIOLATED

    hidden_sit = situation_from(
        {("x", "gap_ticks"): 4}, {"x": "car"}, hidden={("x", "gap_ticks")}
    )
    g = internal_of("constraint g { modality: require scope: a:car holds: a.gap_ticks >= 3 }")
    records, _ = enumerate_groundings(g, hidden_sit, limit=10)
    assert records[0].status == PARTIAL
    assert evaluate(records[0], g, hidden_sit).status == UNKNOWN_STATUS


def test_prefer_avoid_never_violated():
    p = internal_of("constraint p { modality: prefer scope: a:car holds: a.speed >= 99 }")
    sit = situation_from({("x", "speed"): 1}, {"x": "car"})
    records, _ = enumerate_groundings(p, sit, limit=10)
    ev = evaluate(records[0], p, sit)
    assert ev.status == COMPLIANT
    assert ev.holds is False


def test_enumeration_complete_below_limit():
    c = internal_of(PAIRWISE)
    facts, types = board_4x4()
    sit = situation_from(facts, types)
    records, truncated = enumerate_groundings(c, sit, limit=256)
    assert not truncated
    assert len({(r.entities) for r in records}) == 256


def test_truncation_flag_and_priority_order():
    facts, types = board_4x4()
    sit = situation_from(facts, types)
    high = internal_of(
        """constraint high { modality: forbid priority: 5 scope: a:cell, b:cell
           when: not(a.id = b.id) holds: and(a.value = b.value, not(a.value = 0)) }"""
    )
    low = internal_of(
        """constraint low { modality: forbid scope: a:cell, b:cell
           when: not(a.id = b.id) holds: and(a.value = b.value, not(a.value = 0)) }"""
    )
    batches, parked = ground_all([low, high], sit, total_limit=300)
    assert parked == []
    assert [b.constraint_id for b in batches] == ["high", "low"]
    assert len(batches[0].records) == 256
    assert not batches[0].truncated
    assert len(batches[1].records) == 44  # starved by the budget
    assert batches[1].truncated


def test_type_error_parks_constraint():
    c = internal_of("constraint t { modality: require scope: a:car holds: a.zone <= 5 }")
    sit = situation_from({("x", "zone"): "urban"}, {"x": "car"})
    batches, parked = ground_all([c], sit, total_limit=100)
    assert batches == []
    assert parked[0][0] == "t"


# ── measurement proposals ──────────────────────────────────────────


def gap_constraint(cid="follow_gap"):
    return internal_of(
        f"constraint {cid} {{ modality: require scope: a:car holds: a.gap_ticks >= 3 }}"
    )


def measure_action(entity="lead"):
    return Action(
        name=f"measure_gap({entity})",
        base="measure_gap",
        params=(entity,),
        reveals=(entity, "gap_ticks"),
    )


def test_proposal_for_missing_ref():
    c = gap_constraint()
    sit = situation_from(
        {("lead", "gap_ticks"): 5}, {"lead": "car"}, hidden={("lead", "gap_ticks")}
    )
    records, _ = enumerate_groundings(c, sit, limit=10)
    evals = [evaluate(records[0], c, sit)]
    proposals = propose_measurements(evals, [measure_action()])
    assert len(proposals) == 1
    assert proposals[0].reveals == ("lead", "gap_ticks")
    assert proposals[0].enables == ("follow_gap",)


def test_no_catalog_action_no_proposal():
    c = gap_constraint()
    sit = situation_from(
        {("lead", "gap_ticks"): 5}, {"lead": "car"}, hidden={("lead", "gap_ticks")}
    )
    records, _ = enumerate_groundings(c, sit, limit=10)
    evals = [evaluate(records[0], c, sit)]
    assert propose_measurements(evals, [Action("maintain", "maintain")]) == []


def test_shared_ref_aggregates_constraints():
    c1, c2 = gap_constraint("one"), gap_constraint("two")
    sit = situation_from(
        {("lead", "gap_ticks"): 5}, {"lead": "car"}, hidden={("lead", "gap_ticks")}
    )
    evals = []
    for c in (c1, c2):
        records, _ = enumerate_groundings(c, sit, limit=10)
        evals.append(evaluate(records[0], c, sit))
    proposals = propose_measurements(evals, [measure_action()])
    assert len(proposals) == 1
    assert proposals[0].enables == ("one", "two")
