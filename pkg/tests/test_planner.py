import json

import pytest

from symbolizer.planner import (
    BUDGET,
    EXHAUSTED,
    INVALID,
    SOLVED,
    NoveltyTable,
    OracleDistanceHeuristic,
    SearchBudget,
    VLMHeuristic,
    astar,
    bfs_oracle,
    direct_vlm_plan,
    goal_count,
    novelty_rank,
    plan,
    read_plan,
)
from symbolizer.simulator import Blocksworld, Hanoi, make_instance, replay
from symbolizer.vocabulary import Goal, GroundAtom, ObjectSet, Observation, SymbolicState, goal_satisfied

from .test_simulator import HANOI3_SOLUTION


class Scripted:
    """Chat client stand-in that returns canned replies in order."""

    def __init__(self, *replies):
        self.replies = list(replies)
        self.messages = []

    def complete(self, messages, response_format=None, cache_key=None):
        self.messages.append(messages)
        return self.replies.pop(0) if len(self.replies) > 1 else self.replies[0]


@pytest.fixture
def abc(bw):
    return ObjectSet.from_pairs({"a": "block", "b": "block", "c": "block"}, bw)


def test_goal_count(abc):
    table = Blocksworld().state_from_towers(abc, [["a"], ["b"], ["c"]])
    assert goal_count(table, Goal(frozenset({"on(a,b)", "on(b,c)"}), abc)) == 2
    assert goal_count(table, Goal(frozenset({"on-table(a)"}), abc)) == 0
    assert goal_count(table, Goal(frozenset({"not clear(a)"}), abc)) == 1


def test_novelty_ranks():
    p, q, r = (GroundAtom.of(x) for x in "pqr")
    t = NoveltyTable(pairs=True)
    assert [t.rank({p, q}), t.rank({p, r}), t.rank({q, r})] == [0, 0, 1]
    assert t.rank({q, r}) == 2
    t = NoveltyTable()
    assert [t.rank({p, q}), t.rank({p, q})] == [0, 2]


def test_novelty_rank_on_state(hanoi3):
    t = NoveltyTable()
    assert novelty_rank(hanoi3.init, t) == 0
    assert novelty_rank(hanoi3.init, t) == 2


@pytest.mark.parametrize("tiebreak,pairs", [("novelty", False), ("novelty", True), ("fifo", False)])
def test_hanoi3_plan_length(hanoi3, tiebreak, pairs):
    res = plan(hanoi3.init, hanoi3.goal, Hanoi().successors, tiebreak=tiebreak, pairs=pairs)
    assert res.outcome == SOLVED
    assert len(res.plan) == 7
    assert goal_satisfied(replay(hanoi3.init, res.plan, Hanoi().successors), hanoi3.goal)


def test_bfs_oracle_matches_known_solution(hanoi3):
    res = bfs_oracle(hanoi3.init, hanoi3.goal, Hanoi().successors)
    assert len(res.plan) == 7
    assert len(HANOI3_SOLUTION) == 7


def test_satisfied_goal_needs_no_search():
    inst = make_instance("blocksworld", 3, seed=0, scramble=0)
    for search in (plan, bfs_oracle, astar):
        res = search(inst.init, inst.goal, Blocksworld().successors)
        assert res.outcome == SOLVED and res.plan == [] and res.stats.expansions == 0


def test_unreachable_goal_exhausts(abc):
    init = Blocksworld().state_from_towers(abc, [["a"], ["b"], ["c"]])
    goal = Goal(frozenset({"on(a,a)"}), abc)
    assert bfs_oracle(init, goal, Blocksworld().successors).outcome == EXHAUSTED
    assert plan(init, goal, Blocksworld().successors).outcome == EXHAUSTED


def test_budget(hanoi3):
    res = plan(hanoi3.init, hanoi3.goal, Hanoi().successors, SearchBudget(max_expansions=1))
    assert res.outcome == BUDGET
    assert res.stats.expansions == 1


def test_blocksworld_8_tower():
    inst = make_instance("blocksworld", 8, seed=1, tower=True)
    assert not goal_satisfied(inst.init, inst.goal)
    res = plan(inst.init, inst.goal, Blocksworld().successors, SearchBudget(max_expansions=100_000))
    assert res.outcome == SOLVED
    assert goal_satisfied(replay(inst.init, res.plan, Blocksworld().successors), inst.goal)


def test_astar_optimal_on_hanoi():
    inst = make_instance("hanoi", 4)
    assert len(astar(inst.init, inst.goal, Hanoi().successors).plan) == 15


def test_plan_file_is_deterministic(tmp_path, hanoi3):
    a = plan(hanoi3.init, hanoi3.goal, Hanoi().successors)
    b = plan(hanoi3.init, hanoi3.goal, Hanoi().successors)
    pa, sa = a.write(tmp_path / "a.plan")
    pb, _ = b.write(tmp_path / "b.plan")
    assert pa.read_bytes() == pb.read_bytes()
    assert [str(x) for x in read_plan(pa)] == [str(x) for x in a.plan]
    assert json.loads(sa.read_text())["plan_length"] == 7


def test_oracle_heuristic(hanoi3):
    h = OracleDistanceHeuristic(Hanoi().successors)
    assert h(hanoi3.init, hanoi3.goal) == 7
    goal_state = replay(hanoi3.init, HANOI3_SOLUTION, Hanoi().successors)
    assert h(goal_state, hanoi3.goal) == 0
    res = plan(hanoi3.init, hanoi3.goal, Hanoi().successors, heuristic=h)
    assert len(res.plan) == 7


def test_noisy_heuristic_terminates():
    inst = make_instance("hanoi", 4)
    h = OracleDistanceHeuristic(Hanoi().successors, noise=3.0, seed=2)
    res = plan(inst.init, inst.goal, Hanoi().successors, heuristic=h)
    assert res.outcome == SOLVED
    assert goal_satisfied(replay(inst.init, res.plan, Hanoi().successors), inst.goal)


def test_vlm_heuristic_parses_distance(hanoi3):
    h = VLMHeuristic(Scripted('{"distance": 4}'))
    assert h(hanoi3.init, hanoi3.goal) == 4.0
    assert VLMHeuristic(Scripted("not json"))(hanoi3.init, hanoi3.goal) == float("inf")
    goal_state = replay(hanoi3.init, HANOI3_SOLUTION, Hanoi().successors)
    client = Scripted('{"distance": 9}')
    assert VLMHeuristic(client)(goal_state, hanoi3.goal) == 0.0
    assert client.messages == []


def test_direct_plan(hanoi3):
    obs = Observation.from_text("three disks on peg1")
    ok = direct_vlm_plan(obs, "all on peg3", "hanoi", Scripted(json.dumps({"plan": HANOI3_SOLUTION})), hanoi3.init, hanoi3.goal, Hanoi().successors)
    assert ok.outcome == SOLVED
    wrong = HANOI3_SOLUTION[:]
    wrong[2] = "move(d3,peg1,peg2)"
    bad = direct_vlm_plan(obs, "all on peg3", "hanoi", Scripted(json.dumps({"plan": wrong})), hanoi3.init, hanoi3.goal, Hanoi().successors)
    assert bad.outcome == INVALID and bad.failure_step == 2
    junk = direct_vlm_plan(obs, "", "", Scripted("{}"), hanoi3.init, hanoi3.goal, Hanoi().successors)
    assert junk.outcome == INVALID and junk.failure_step == 0


def test_budget_validation():
    with pytest.raises(ValueError):
        SearchBudget(max_expansions=0)
    with pytest.raises(ValueError):
        plan(None, None, None, tiebreak="lifo")
