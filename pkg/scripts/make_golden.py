"""Regenerate the byte-stability fixtures under tests/golden. Review the diff before committing."""

from pathlib import Path

from symbolizer.pddl import emit_problem
from symbolizer.schema import compile_predicate_schema
from symbolizer.simulator import Blocksworld, load_vocabulary
from symbolizer.vocabulary import Goal, ObjectSet

OUT = Path(__file__).resolve().parents[1] / "tests" / "golden"


def main():
    OUT.mkdir(exist_ok=True)
    vocab = load_vocabulary("blocksworld")
    objs = ObjectSet.from_pairs({"a": "block", "b": "block"}, vocab)
    (OUT / "blocksworld-2.predicates.schema.json").write_text(compile_predicate_schema(vocab, objs).render())
    init = Blocksworld().state_from_towers(objs, [["a"], ["b"]])
    goal = Goal(frozenset({"on(a,b)"}), objs)
    (OUT / "blocksworld-2.pddl").write_text(emit_problem("bw-2", vocab, objs, init, goal, "blocksworld"))


if __name__ == "__main__":
    main()
