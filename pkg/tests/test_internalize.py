"""Vocabulary rewriting, unmapped-term errors, and instructor teaching."""

from comply.instructor import InstructorScript
from comply.internalize import (
    InternalConstraint,
    InternalizationError,
    Ontology,
    VocabularyMap,
    external_names,
    internalize,
    resolve_unmapped,
)
from comply.lang import parse_constraint_file
from comply.lang.nodes import TeachAnswer, VocabEntry

ONTOLOGY = Ontology(
    attributes=frozenset({"speed", "speed_limit", "gap_ticks", "hazard_score"}),
    types=frozenset({"car", "ego"}),
    contexts=frozenset({"urban"}),
)


def spec_of(src):
    result = parse_constraint_file(src)
    assert result.ok
    return result.specs[0]


def test_identity_mapping():
    spec = spec_of("constraint s { modality: require scope: v:car holds: v.speed <= v.speed_limit }")
    out = internalize(spec, VocabularyMap(), ONTOLOGY)
    assert isinstance(out, InternalConstraint)
    assert out.holds == spec.holds
    assert external_names(out, ONTOLOGY) == []


def test_vocab_substitution():
    spec = spec_of("constraint g { modality: require scope: v:car holds: v.following_gap >= 3 }")
    vocab = VocabularyMap.from_entries([VocabEntry("following_gap", "attribute", "gap_ticks")])
    out = internalize(spec, vocab, ONTOLOGY)
    assert isinstance(out, InternalConstraint)
    assert out.holds.left.attr == "gap_ticks"
    assert external_names(out, ONTOLOGY) == []


def test_unmapped_term_error():
    spec = spec_of("constraint c { modality: require scope: v:car holds: v.caution_level <= 5 }")
    out = internalize(spec, VocabularyMap(), ONTOLOGY)
    assert isinstance(out, InternalizationError)
    assert out.unmapped == (("caution_level", "attribute"),)


def test_error_lists_all_unmapped_terms():
    spec = spec_of(
        """constraint c { modality: require context: foggy scope: v:hovercraft
           holds: and(v.caution_level <= 5, v.blur >= 1) }"""
    )
    out = internalize(spec, VocabularyMap(), ONTOLOGY)
    assert isinstance(out, InternalizationError)
    assert set(out.unmapped) == {
        ("caution_level", "attribute"),
        ("blur", "attribute"),
        ("hovercraft", "type"),
        ("foggy", "context"),
    }


def test_kind_mismatch_is_error():
    spec = spec_of("constraint c { modality: require scope: v:car holds: v.rover <= 5 }")
    vocab = VocabularyMap.from_entries([VocabEntry("rover", "type", "car")])
    out = internalize(spec, vocab, ONTOLOGY)
    assert isinstance(out, InternalizationError)
    assert out.kind_mismatches == (("rover", "attribute", "type"),)


def test_mapping_outside_ontology_stays_unmapped():
    spec = spec_of("constraint c { modality: require scope: v:car holds: v.vibe <= 5 }")
    vocab = VocabularyMap.from_entries([VocabEntry("vibe", "attribute", "aura")])
    out = internalize(spec, vocab, ONTOLOGY)
    assert isinstance(out, InternalizationError)
    assert out.unmapped == (("vibe", "attribute"),)


def test_resolve_via_teach_answer():
    spec = spec_of("constraint c { modality: require scope: v:ego holds: v.caution_level <= 5 }")
    error = internalize(spec, VocabularyMap(), ONTOLOGY)
    script = InstructorScript([TeachAnswer("caution_level", "attribute", "hazard_score")])
    delta = resolve_unmapped(error, script)
    assert delta is not None
    out = internalize(spec, VocabularyMap().merged(delta), ONTOLOGY)
    assert isinstance(out, InternalConstraint)
    assert script.pending() == []  # answer consumed


def test_empty_script_unresolved():
    spec = spec_of("constraint c { modality: require scope: v:ego holds: v.caution_level <= 5 }")
    error = internalize(spec, VocabularyMap(), ONTOLOGY)
    assert resolve_unmapped(error, InstructorScript([])) is None


def test_wrong_term_not_consumed():
    spec = spec_of("constraint c { modality: require scope: v:ego holds: v.caution_level <= 5 }")
    error = internalize(spec, VocabularyMap(), ONTOLOGY)
    script = InstructorScript([TeachAnswer("something_else", "attribute", "hazard_score")])
    assert resolve_unmapped(error, script) is None
    assert len(script.pending()) == 1


def test_vocab_monotonicity():
    """Adding vocabulary never breaks a previously successful internalization."""
    spec = spec_of("constraint g { modality: require scope: v:car holds: v.following_gap >= 3 }")
    vocab = VocabularyMap.from_entries([VocabEntry("following_gap", "attribute", "gap_ticks")])
    assert isinstance(internalize(spec, vocab, ONTOLOGY), InternalConstraint)
    bigger = vocab.merged(
        VocabularyMap.from_entries(
            [VocabEntry("zoom", "attribute", "speed"), VocabEntry("lane_kind", "context", "urban")]
        )
    )
    assert isinstance(internalize(spec, bigger, ONTOLOGY), InternalConstraint)
