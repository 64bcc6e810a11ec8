import json

import pytest

from symbolizer.errors import ContradictionError, DuplicateNameError, TypedError, VocabularyError
from symbolizer.vocabulary import (
    Goal,
    GroundAtom,
    LiftedVocabulary,
    Literal,
    ObjectSet,
    Observation,
    PredicateSignature,
    SymbolicState,
    check_atom,
    goal_satisfied,
    ground_atom_universe,
    normalize,
)


def test_normalize():
    assert normalize("  On-Table ") == "on-table"
    with pytest.raises(VocabularyError):
        normalize("2cool")
    with pytest.raises(VocabularyError):
        normalize("has space")


def test_vocabulary_rejects_bad_declarations():
    with pytest.raises(VocabularyError):
        LiftedVocabulary((), (PredicateSignature("p"),))
    with pytest.raises(VocabularyError):
        LiftedVocabulary(("block",), (PredicateSignature("on", ("peg",)),))
    with pytest.raises(VocabularyError):
        LiftedVocabulary(("block",), (PredicateSignature("p"), PredicateSignature("P")))
    with pytest.raises(VocabularyError):
        LiftedVocabulary(("a", "b"), (PredicateSignature("p"),), (("a", "b"), ("b", "a")))


def test_vocabulary_roundtrip(tmp_path, bw):
    path = tmp_path / "v.json"
    path.write_text(json.dumps(bw.to_dict()))
    again = LiftedVocabulary.load(path)
    assert again == bw
    assert again.content_hash() == bw.content_hash()


def test_check_atom(on_vocab, ab):
    check_atom(on_vocab, ab, GroundAtom.of("on", "a", "b"))
    with pytest.raises(TypedError) as e:
        check_atom(on_vocab, ab, GroundAtom.of("on", "a", "b", "c"))
    assert e.value.kind == "arity-mismatch"
    with pytest.raises(TypedError) as e:
        check_atom(on_vocab, ab, GroundAtom.of("under", "a", "b"))
    assert e.value.kind == "unknown-predicate"
    with pytest.raises(TypedError) as e:
        check_atom(on_vocab, ab, GroundAtom.of("on", "a", "z"))
    assert e.value.kind == "unknown-object"


def test_type_mismatch_position():
    vocab = LiftedVocabulary(("block", "peg"), (PredicateSignature("on", ("block", "block")),))
    objs = ObjectSet.from_pairs({"a": "block", "p1": "peg"}, vocab)
    with pytest.raises(TypedError) as e:
        check_atom(vocab, objs, GroundAtom.of("on", "a", "p1"))
    assert e.value.kind == "type-mismatch"
    assert e.value.position == 1


def test_subtypes_accept_children():
    vocab = LiftedVocabulary(
        ("disk", "peg", "support"),
        (PredicateSignature("on", ("disk", "support")),),
        (("disk", "support"), ("peg", "support")),
    )
    objs = ObjectSet.from_pairs({"d1": "disk", "d2": "disk", "p": "peg"}, vocab)
    check_atom(vocab, objs, GroundAtom.of("on", "d1", "p"))
    check_atom(vocab, objs, GroundAtom.of("on", "d1", "d2"))
    with pytest.raises(TypedError):
        check_atom(vocab, objs, GroundAtom.of("on", "p", "d1"))


def test_universe_counts(on_vocab, ab):
    on = [a for a in ground_atom_universe(on_vocab, ab) if a.predicate == "on"]
    assert [str(a) for a in on] == ["on(a,a)", "on(a,b)", "on(b,a)", "on(b,b)"]
    abc = ObjectSet.from_pairs({"a": "block", "b": "block", "c": "block"}, on_vocab)
    assert sum(a.predicate == "clear" for a in ground_atom_universe(on_vocab, abc)) == 3
    vocab = LiftedVocabulary(("disk", "peg"), (PredicateSignature("on", ("disk", "peg")),))
    objs = ObjectSet.from_pairs({"d1": "disk", "d2": "disk", "d3": "disk", "p1": "peg", "p2": "peg", "p3": "peg"}, vocab)
    assert len(ground_atom_universe(vocab, objs)) == 9


def test_duplicate_object_names(on_vocab):
    with pytest.raises(DuplicateNameError):
        ObjectSet.from_pairs([("a", "block"), ("a", "block")], on_vocab)


def test_state_canonical_key_is_order_free(on_vocab, ab):
    s1 = SymbolicState(frozenset({GroundAtom.of("on", "a", "b"), GroundAtom.of("clear", "a")}), ab)
    s2 = SymbolicState(frozenset([GroundAtom.parse("clear(a)"), GroundAtom.parse("on(a, b)")]), ab)
    assert s1 == s2
    assert s1.canonical_key == s2.canonical_key == "clear(a)\non(a,b)"


def test_zero_arity_atom_renders_with_parens(bw):
    assert str(GroundAtom.parse("hand-empty")) == "hand-empty()"
    assert GroundAtom.parse("hand-empty()") == GroundAtom.of("hand-empty")


def test_goal_satisfied(on_vocab, ab):
    on_ab = GroundAtom.of("on", "a", "b")
    clear_a = GroundAtom.of("clear", "a")
    s = SymbolicState(frozenset({on_ab}), ab)
    assert goal_satisfied(s, Goal(frozenset({Literal(on_ab)}), ab))
    assert goal_satisfied(s, Goal(frozenset({Literal(on_ab), Literal(clear_a, False)}), ab))
    s2 = SymbolicState(frozenset({on_ab, clear_a}), ab)
    assert not goal_satisfied(s2, Goal(frozenset({Literal(clear_a, False)}), ab))


def test_goal_contradiction(ab):
    with pytest.raises(ContradictionError):
        Goal(frozenset({"on(a,b)", "not on(a,b)"}), ab)


def test_literal_parse():
    assert Literal.parse("not clear(a)") == Literal(GroundAtom.of("clear", "a"), False)
    assert Literal.parse("!clear(a)").positive is False
    assert str(Literal.parse("-clear(a)")) == "not clear(a)"


def test_observation(tmp_path):
    img = tmp_path / "x.png"
    img.write_bytes(b"\x89PNG fake")
    obs = Observation.from_image(img)
    assert obs.kind == "image" and obs.media_type == "image/png"
    assert Observation.from_text("hi").digest() != obs.digest()
