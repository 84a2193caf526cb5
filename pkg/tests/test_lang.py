"""Constraint/scenario parsing, diagnostics, and round-trip printing."""

from fractions import Fraction

import pytest

from comply.lang import (
    And,
    AttrRef,
    Comparison,
    Literal,
    Not,
    parse_constraint_file,
    parse_scenario_file,
)
from comply.lang.printer import format_constraint, format_constraint_file

SPEED_CAP = "constraint speed_cap { modality: require scope: v:car holds: v.speed <= v.speed_limit }"


def test_parse_single_constraint():
    result = parse_constraint_file(SPEED_CAP)
    assert result.ok
    assert len(result.specs) == 1
    spec = result.specs[0]
    assert spec.id == "speed_cap"
    assert spec.modality == "require"
    assert spec.scope == (("v", "car"),)
    assert spec.when is None
    assert spec.holds == Comparison("<=", AttrRef("v", "speed"), AttrRef("v", "speed_limit"))


def test_empty_text_is_empty_list():
    result = parse_constraint_file("")
    assert result.ok
    assert result.specs == []
    assert result.diagnostics == []


def test_unbound_variable_diagnostic():
    result = parse_constraint_file("constraint x { modality: require holds: w.speed <= 5 }")
    assert not result.ok
    assert result.specs == []  # no partial results mixed with errors
    assert any("unbound variable w" in d.message for d in result.diagnostics)


def test_duplicate_id_diagnostic():
    src = SPEED_CAP + "\n" + SPEED_CAP
    result = parse_constraint_file(src)
    assert not result.ok
    assert any("duplicate constraint id" in d.message for d in result.diagnostics)


def test_unknown_keyword_diagnostic():
    result = parse_constraint_file("constrnt x {}")
    assert not result.ok
    d = result.diagnostics[0]
    assert "unknown keyword" in d.message
    assert d.line == 1 and d.column == 1


def test_bad_modality():
    result = parse_constraint_file("constraint x { modality: must scope: v:car holds: v.a = 1 }")
    assert not result.ok
    assert any("modality" in d.message for d in result.diagnostics)


def test_expression_forms():
    src = """
    constraint c {
      modality: forbid
      context: urban, school_zone
      priority: 3
      scope: a:car, b:car
      when: and(not(a.id = b.id), or(a.lane = 0, a.lane = 1))
      holds: a.pos + 2 * b.speed - 1 >= (b.pos - 3) * 2
    }
    """
    result = parse_constraint_file(src)
    assert result.ok, [d.message for d in result.diagnostics]
    spec = result.specs[0]
    assert spec.context_tags == ("urban", "school_zone")
    assert spec.priority == 3
    assert isinstance(spec.when, And)
    assert isinstance(spec.when.items[0], Not)


def test_decimal_and_negative_literals():
    src = "constraint c { modality: prefer scope: v:car holds: and(v.gap >= 2.5, v.dist >= -2) }"
    result = parse_constraint_file(src)
    assert result.ok
    holds = result.specs[0].holds
    assert holds.items[0].right == Literal(Fraction(5, 2))
    assert holds.items[1].right == Literal(-2)


def test_boolean_and_symbol_literals():
    src = "constraint c { modality: require scope: v:car holds: and(v.ok = true, v.zone = urban) }"
    result = parse_constraint_file(src)
    assert result.ok
    holds = result.specs[0].holds
    assert holds.items[0].right == Literal(True)
    assert holds.items[1].right == Literal("urban")


@pytest.mark.parametrize(
    "src",
    [
        SPEED_CAP,
        "constraint c { modality: avoid scope: s:ego holds: s.last_action = hard_brake }",
        """constraint gap { modality: require priority: 2 scope: v:car
           when: and(v.same_lane = true, v.dist > 0) holds: v.gap_ticks >= 3 }""",
        """constraint rp { modality: forbid scope: a:cell, b:cell
           when: and(not(a.id = b.id), a.row = b.row)
           holds: and(a.value = b.value, not(a.value = 0)) }""",
        "constraint m { modality: prefer scope: s:ego holds: s.pos + 1 * 2 - 3 >= (s.speed - 1) * 4 }",
        "constraint d { modality: prefer scope: s:ego holds: s.gap >= 2.5 }",
    ],
)
def test_roundtrip(src):
    first = parse_constraint_file(src)
    assert first.ok
    printed = format_constraint_file(first.specs)
    second = parse_constraint_file(printed)
    assert second.ok
    assert second.specs == first.specs
    # printing is a fixpoint
    assert format_constraint_file(second.specs) == printed


def test_determinism():
    src = SPEED_CAP + "\nconstraint oops { modality: require holds: q.x = 1 }"
    a = parse_constraint_file(src)
    b = parse_constraint_file(src)
    assert a.specs == b.specs
    assert [d.message for d in a.diagnostics] == [d.message for d in b.diagnostics]


# ── scenario parsing ───────────────────────────────────────────────

MINIMAL_SUDOKU = """
environment sudoku
constraints file "rules.con"
facts {
  cell_1_1:cell { id=1, row=1, col=1, box=1, value=0 }
}
run { maxTicks=5 seed=1 }
"""


def loader_with(files):
    return lambda path: files.get(path)


def test_minimal_scenario():
    result = parse_scenario_file(MINIMAL_SUDOKU, loader=loader_with({"rules.con": SPEED_CAP}))
    assert result.ok, [d.message for d in result.diagnostics]
    spec = result.spec
    assert spec.environment == "sudoku"
    assert spec.run.max_ticks == 5
    assert spec.run.seed == 1
    assert spec.run.staleness == 5  # defaults
    assert spec.run.search_depth == 3
    assert spec.run.grounding_limit == 500
    assert len(spec.constraints) == 1


def test_missing_constraint_file_names_path():
    result = parse_scenario_file(MINIMAL_SUDOKU, loader=loader_with({}))
    assert not result.ok
    assert any("rules.con" in d.message for d in result.diagnostics)


def test_max_ticks_zero():
    src = MINIMAL_SUDOKU.replace("maxTicks=5", "maxTicks=0")
    result = parse_scenario_file(src, loader=loader_with({"rules.con": SPEED_CAP}))
    assert not result.ok
    assert any("maxTicks must be ≥ 1" in d.message for d in result.diagnostics)


def test_missing_seed():
    src = MINIMAL_SUDOKU.replace(" seed=1", "")
    result = parse_scenario_file(src, loader=loader_with({"rules.con": SPEED_CAP}))
    assert not result.ok
    assert any("seed is required" in d.message for d in result.diagnostics)


def test_duplicate_event_same_target():
    src = """
    environment driving
    facts { self:ego { pos=0, lane=0, speed=2 } }
    events {
      at 3: set self.zone = urban
      at 3: set self.zone = rural
    }
    run { maxTicks=5 seed=1 }
    """
    result = parse_scenario_file(src, loader=loader_with({}))
    assert not result.ok
    assert any("duplicate event at tick 3" in d.message for d in result.diagnostics)


def test_full_scenario_blocks():
    src = """
    environment driving
    constraints file "a.con"
    facts {
      self:ego { pos=0, lane=0, speed=2, country=rightDriving }
      lead:car { pos=10, lane=0, speed=2 }
    }
    hidden { lead.gap_ticks }
    events {
      at 7: spawn cutin:car { pos=16, lane=0, speed=3 }
      at 3: set self.zone = urban
    }
    contexts {
      rule rightDriving when self.country = rightDriving
    }
    vocab { term following_gap -> attribute gap_ticks }
    values { speed_cap: 1 preserve_life: 10 }
    instructor {
      teach term caution_level -> attribute hazard_score
      priority preserve_life vs speed_cap = preserve_life
      relevance speed_cap in sudoku = no
    }
    run { maxTicks=40 seed=2 staleness=5 searchDepth=3 groundingLimit=600 }
    """
    result = parse_scenario_file(src, loader=loader_with({"a.con": SPEED_CAP}))
    assert result.ok, [d.message for d in result.diagnostics]
    spec = result.spec
    assert spec.hidden == (("lead", "gap_ticks"),)
    assert len(spec.events) == 2
    assert len(spec.context_rules) == 1
    assert spec.vocab[0].internal == "gap_ticks"
    assert dict(spec.values) == {"speed_cap": 1, "preserve_life": 10}
    assert len(spec.instructor) == 3
    assert spec.run.grounding_limit == 600


def test_context_rule_must_use_self():
    src = """
    environment driving
    facts { self:ego { pos=0, lane=0, speed=2 } }
    contexts { rule urban when other.zone = urban }
    run { maxTicks=5 seed=1 }
    """
    result = parse_scenario_file(src, loader=loader_with({}))
    assert not result.ok
    assert any("only 'self'" in d.message for d in result.diagnostics)


def test_parser_never_crashes_on_garbage():
    for src in ["{{{{", "constraint", "facts } {", "}}}", "run { maxTicks= }", '"unclosed']:
        parse_constraint_file(src)
        parse_scenario_file(src, loader=loader_with({}))
