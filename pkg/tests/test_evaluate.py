"""Three-valued evaluation: Kleene tables, missing-ref collection, measures,
and equivalence with an independent brute-force truth-table evaluator."""

import itertools
from fractions import Fraction

import pytest

from comply.evaluate import (
    OverlayView,
    eval_expr,
    evaluate_binding,
    violation_measure,
)
from comply.lang import parse_constraint_file
from comply.lang.nodes import And, Arith, AttrRef, Comparison, Literal, Not, Or
from comply.values import EvalTypeError, UNKNOWN
from comply.world import ObservabilityMask, WorldState, project


def constraint(src):
    result = parse_constraint_file(src)
    assert result.ok, [d.message for d in result.diagnostics]
    return result.specs[0]


def situation_from(facts, types, hidden=frozenset(), tick=0):
    world = WorldState(facts=dict(facts), entity_types=dict(types), tick=tick)
    return project(world, ObservabilityMask(hidden=frozenset(hidden)))


def test_simple_violation():
    c = constraint("constraint s { modality: require scope: v:car holds: v.speed <= v.speed_limit }")
    sit = situation_from({("a", "speed"): 30, ("a", "speed_limit"): 25}, {"a": "car"})
    ev = evaluate_binding(c, {"v": "a"}, sit)
    assert ev.applies is True and ev.holds is False


def test_unknown_gap_is_unknown():
    c = constraint("constraint g { modality: require scope: v:car holds: v.gap_ticks >= 3 }")
    sit = situation_from(
        {("a", "gap_ticks"): 4}, {"a": "car"}, hidden={("a", "gap_ticks")}
    )
    ev = evaluate_binding(c, {"v": "a"}, sit)
    assert ev.holds is None
    assert ev.missing == (("a", "gap_ticks"),)


def test_kleene_and_with_unknown():
    sit = situation_from({("a", "x"): 1}, {"a": "car"}, hidden=set())
    expr = And((Comparison("=", Literal(1), Literal(1)), Comparison("=", AttrRef("v", "nope"), Literal(1))))
    missing = []
    assert eval_expr(expr, {"v": "a"}, sit, missing) is None
    assert ("a", "nope") in missing


def test_kleene_false_dominates():
    sit = situation_from({}, {"a": "car"})
    expr = And((Comparison("=", Literal(1), Literal(2)), Comparison("=", AttrRef("v", "nope"), Literal(1))))
    assert eval_expr(expr, {"v": "a"}, sit, []) is False
    expr_or = Or((Comparison("=", Literal(1), Literal(1)), Comparison("=", AttrRef("v", "nope"), Literal(1))))
    assert eval_expr(expr_or, {"v": "a"}, sit, []) is True


def test_not_unknown_is_unknown():
    sit = situation_from({}, {"a": "car"})
    expr = Not(Comparison("=", AttrRef("v", "nope"), Literal(1)))
    assert eval_expr(expr, {"v": "a"}, sit, []) is None


def test_arithmetic_and_fractions():
    sit = situation_from({("a", "x"): Fraction(5, 2)}, {"a": "car"})
    expr = Comparison(">=", Arith("*", AttrRef("v", "x"), Literal(2)), Literal(5))
    assert eval_expr(expr, {"v": "a"}, sit, []) is True


def test_type_mismatch_raises():
    sit = situation_from({("a", "zone"): "urban"}, {"a": "car"})
    expr = Comparison("<", AttrRef("v", "zone"), Literal(3))
    with pytest.raises(EvalTypeError):
        eval_expr(expr, {"v": "a"}, sit, [])
    eq = Comparison("=", AttrRef("v", "zone"), Literal(3))
    with pytest.raises(EvalTypeError):
        eval_expr(eq, {"v": "a"}, sit, [])


def test_overlay_view_keeps_unknowns_unknown():
    sit = situation_from({("a", "gap_ticks"): 4}, {"a": "car"}, hidden={("a", "gap_ticks")})
    proj = OverlayView(sit, {("a", "gap_ticks"): 7})
    assert proj.value("a", "gap_ticks") is UNKNOWN


# ── violation measures ─────────────────────────────────────────────


def test_measure_signed_distance():
    c = constraint("constraint g { modality: require scope: v:car holds: v.gap_ticks >= 3 }")
    sit = situation_from({("a", "gap_ticks"): 2}, {"a": "car"})
    m = violation_measure(c.holds, {"v": "a"}, sit)
    assert m == 1
    sit2 = situation_from({("a", "gap_ticks"): Fraction(5, 2)}, {"a": "car"})
    assert violation_measure(c.holds, {"v": "a"}, sit2) == Fraction(1, 2)
    sit3 = situation_from({("a", "gap_ticks"): 4}, {"a": "car"})
    assert violation_measure(c.holds, {"v": "a"}, sit3) == 0


def test_measure_binary_for_symbols():
    expr = Comparison("=", AttrRef("v", "zone"), Literal("urban"))
    sit = situation_from({("a", "zone"): "rural"}, {"a": "car"})
    assert violation_measure(expr, {"v": "a"}, sit) == 1


def test_measure_and_sums_or_mins():
    sit = situation_from({("a", "x"): 0, ("a", "y"): 5}, {"a": "car"})
    ge = lambda attr, bound: Comparison(">=", AttrRef("v", attr), Literal(bound))
    assert violation_measure(And((ge("x", 2), ge("y", 9))), {"v": "a"}, sit) == 6
    assert violation_measure(Or((ge("x", 2), ge("y", 9))), {"v": "a"}, sit) == 2


def test_measure_unknown_is_none():
    sit = situation_from({}, {"a": "car"})
    expr = Comparison(">=", AttrRef("v", "nope"), Literal(3))
    assert violation_measure(expr, {"v": "a"}, sit) is None


# ── oracle: brute-force truth-table evaluator ──────────────────────
#
# An independent recursive evaluator over explicitly enumerated value tables,
# used to cross-check the engine's evaluator on fully observable situations.


def oracle_eval(expr, lookup):
    """Reference evaluator: no unknowns, no sharing with the engine path."""
    if isinstance(expr, Comparison):
        l, r = oracle_term(expr.left, lookup), oracle_term(expr.right, lookup)
        return {
            "<": l < r,
            "<=": l <= r,
            "=": l == r,
            "!=": l != r,
            ">=": l >= r,
            ">": l > r,
        }[expr.op]
    if isinstance(expr, And):
        return all(oracle_eval(e, lookup) for e in expr.items)
    if isinstance(expr, Or):
        return any(oracle_eval(e, lookup) for e in expr.items)
    if isinstance(expr, Not):
        return not oracle_eval(expr.item, lookup)
    raise AssertionError


def oracle_term(term, lookup):
    if isinstance(term, Literal):
        return term.value
    if isinstance(term, AttrRef):
        return lookup[(term.var, term.attr)]
    if isinstance(term, Arith):
        l, r = oracle_term(term.left, lookup), oracle_term(term.right, lookup)
        return {"+": l + r, "-": l - r, "*": l * r}[term.op]
    raise AssertionError


FIXTURE_CONSTRAINTS = [
    "constraint c1 { modality: require scope: v:car holds: v.speed <= v.speed_limit }",
    "constraint c2 { modality: forbid scope: a:car, b:car when: not(a.id = b.id) holds: a.pos = b.pos }",
    """constraint c3 { modality: require scope: a:car, b:car
       when: and(not(a.id = b.id), a.lane = b.lane)
       holds: or(a.pos - b.pos >= 2, b.pos - a.pos >= 2) }""",
    "constraint c4 { modality: prefer scope: v:car holds: and(v.speed >= 1, not(v.speed > 3)) }",
]


def test_oracle_equivalence_small_situations():
    """Engine evaluation equals the truth-table oracle on all fully observable
    situations with up to 4 entities drawn from small attribute domains."""
    checked = 0
    for src in FIXTURE_CONSTRAINTS:
        c = constraint(src)
        for n_entities in (1, 2, 3, 4):
            entities = [f"e{i}" for i in range(n_entities)]
            for combo in itertools.product(range(3), repeat=n_entities):
                facts = {}
                for ent, base in zip(entities, combo):
                    facts[(ent, "id")] = entities.index(ent)
                    facts[(ent, "pos")] = base * 2
                    facts[(ent, "lane")] = base % 2
                    facts[(ent, "speed")] = base
                    facts[(ent, "speed_limit")] = 2
                sit = situation_from(facts, {e: "car" for e in entities})
                vars_ = [v for v, _ in c.scope]
                for binding_entities in itertools.product(entities, repeat=len(vars_)):
                    binding = dict(zip(vars_, binding_entities))
                    ev = evaluate_binding(c, binding, sit)
                    lookup = {
                        (var, attr): facts[(ent, attr)]
                        for var, ent in binding.items()
                        for attr in ("id", "pos", "lane", "speed", "speed_limit")
                    }
                    expected_applies = True if c.when is None else oracle_eval(c.when, lookup)
                    assert ev.applies is expected_applies
                    if expected_applies:
                        assert ev.holds is oracle_eval(c.holds, lookup)
                    checked += 1
    assert checked > 1000
