import pytest

from symbolizer.errors import InapplicableAction, InconsistentState, UnsupportedSize
from symbolizer.simulator import (
    ActionLabel,
    Blocksworld,
    Hanoi,
    Instance,
    bundled_suite,
    load_dataset,
    make_instance,
    replay,
    write_dataset,
)
from symbolizer.vocabulary import GroundAtom, ObjectSet, goal_satisfied

HANOI3_SOLUTION = [
    "move(d1,d2,peg3)",
    "move(d2,d3,peg2)",
    "move(d1,peg3,d2)",
    "move(d3,peg1,peg3)",
    "move(d1,d2,peg1)",
    "move(d2,peg2,d3)",
    "move(d1,peg1,d2)",
]


def reachable(sim, state):
    seen = {state.atoms}
    todo = [state]
    while todo:
        for _, nxt in sim.successors(todo.pop()):
            if nxt.atoms not in seen:
                seen.add(nxt.atoms)
                todo.append(nxt)
    return seen


def test_blocksworld_all_on_table(bw):
    sim = Blocksworld()
    objs = ObjectSet.from_pairs({"a": "block", "b": "block", "c": "block"}, bw)
    state = sim.state_from_towers(objs, [["a"], ["b"], ["c"]])
    succ = sim.successors(state)
    assert [str(l) for l, _ in succ] == ["pick-up(a)", "pick-up(b)", "pick-up(c)"]
    assert GroundAtom.of("holding", "a") in succ[0][1]


def test_blocksworld_state_count(bw):
    # 3 blocks: 13 hand-empty arrangements plus 3 x 3 while holding one block
    objs = ObjectSet.from_pairs({"a": "block", "b": "block", "c": "block"}, bw)
    assert len(reachable(Blocksworld(), Blocksworld().state_from_towers(objs, [["a"], ["b"], ["c"]]))) == 22


def test_hanoi_canonical(hanoi3):
    assert len(Hanoi().successors(hanoi3.init)) == 2
    assert {str(l) for l, _ in Hanoi().successors(hanoi3.init)} == {"move(d1,d2,peg2)", "move(d1,d2,peg3)"}
    assert {a for a in hanoi3.init.atoms if a.predicate == "on"} == {
        GroundAtom.of("on", "d3", "peg1"),
        GroundAtom.of("on", "d2", "d3"),
        GroundAtom.of("on", "d1", "d2"),
    }
    assert {l.atom.args[1] for l in hanoi3.goal.literals if l.atom.args[0] == "d3"} == {"peg3"}


def test_hanoi_reachable_states(hanoi3):
    assert len(reachable(Hanoi(), hanoi3.init)) == 27


def test_hanoi_inconsistent_state(hanoi3):
    sim = Hanoi()
    bad = sim.state_from_pegs(hanoi3.objects, ["d1", "d2", "d3"], {"peg1": ["d1", "d3"], "peg2": ["d2"]})
    with pytest.raises(InconsistentState):
        sim.successors(bad)


def test_replay(hanoi3):
    sim = Hanoi()
    assert replay(hanoi3.init, [], sim.successors) == hanoi3.init
    assert goal_satisfied(replay(hanoi3.init, HANOI3_SOLUTION, sim.successors), hanoi3.goal)
    bad = [HANOI3_SOLUTION[0], "move(d1,peg3,peg1)", *HANOI3_SOLUTION[2:]]
    bad[1] = "move(d3,peg1,peg2)"
    with pytest.raises(InapplicableAction) as e:
        replay(hanoi3.init, bad, sim.successors)
    assert e.value.step == 1


def test_action_label_parse():
    assert ActionLabel.parse(" move(d1, d2 ,peg3) ") == ActionLabel("move", ("d1", "d2", "peg3"))
    assert str(ActionLabel.parse("put-down(a)")) == "put-down(a)"


def test_make_instance_deterministic():
    assert make_instance("blocksworld", 4, seed=7).to_json() == make_instance("blocksworld", 4, seed=7).to_json()
    assert make_instance("blocksworld", 4, seed=7).to_json() != make_instance("blocksworld", 4, seed=8).to_json()


def test_scramble_zero_is_goal():
    for domain in ("blocksworld", "hanoi"):
        inst = make_instance(domain, 3, seed=1, scramble=0)
        assert goal_satisfied(inst.init, inst.goal)


def test_unsupported_size():
    with pytest.raises(UnsupportedSize):
        make_instance("hanoi", 12)


def test_instance_json_roundtrip(tmp_path):
    suite = bundled_suite(3)
    path = tmp_path / "d.jsonl"
    write_dataset(suite, path)
    again = load_dataset(path)
    assert [i.to_json() for i in again] == [i.to_json() for i in suite]
    assert isinstance(again[0], Instance) and again[0].init == suite[0].init


def test_hanoi_color_sizes_are_seeded():
    a = make_instance("hanoi-color", 3, seed=1)
    assert a.to_json() == make_instance("hanoi-color", 3, seed=1).to_json()
    assert all(o.name in Hanoi.COLORS for o in a.objects.objects if o.type == "disk")
