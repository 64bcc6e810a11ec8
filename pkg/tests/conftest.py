import pytest

from symbolizer.simulator import load_vocabulary, make_instance
from symbolizer.vocabulary import LiftedVocabulary, ObjectSet, PredicateSignature


@pytest.fixture
def on_vocab():
    return LiftedVocabulary(("block",), (PredicateSignature("on", ("block", "block")), PredicateSignature("clear", ("block",))))


@pytest.fixture
def ab(on_vocab):
    return ObjectSet.from_pairs({"a": "block", "b": "block"}, on_vocab)


@pytest.fixture
def bw():
    return load_vocabulary("blocksworld")


@pytest.fixture
def hanoi3():
    return make_instance("hanoi", 3)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
