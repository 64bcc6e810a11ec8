"""Forward search over black-box successor functions.

The main entry point is :func:`plan`, a greedy best-first search ordered by
``(goal_count, novelty_rank, insertion_seq)``. :func:`bfs_oracle` gives
shortest plans for cross-checking, :func:`astar` serves the plan-with-model
protocol, and the two VLM baselines (model-scored heuristic, single-shot plan)
reuse the same machinery.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import random
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import InapplicableAction, InconsistentState, ParseError, SymbolizerError, VocabularyError
from .schema import encode_goal, encode_state, parse_raw
from .simulator import ActionLabel, Successors, replay
from .vocabulary import GroundAtom, Goal, Observation, SymbolicState, goal_satisfied

Heuristic = Callable[[SymbolicState, Goal], float]

SOLVED = "solved"
EXHAUSTED = "exhausted"
BUDGET = "budget-exceeded"
INVALID = "invalid-plan"


@dataclass(frozen=True)
class SearchBudget:
    max_expansions: int = 100_000
    max_seconds: float = 60.0
    max_plan_length: int = 10_000

    def __post_init__(self):
        if self.max_expansions <= 0 or self.max_seconds <= 0 or self.max_plan_length <= 0:
            raise ValueError("search budget limits must be positive")


@dataclass
class SearchStats:
    expansions: int = 0
    generated: int = 0
    duplicates: int = 0
    peak_frontier: int = 0
    elapsed: float = 0.0


@dataclass
class PlanResult:
    outcome: str
    plan: list[ActionLabel] = field(default_factory=list)
    stats: SearchStats = field(default_factory=SearchStats)
    failure_step: int | None = None
    message: str = ""

    @property
    def solved(self) -> bool:
        return self.outcome == SOLVED

    def header(self) -> list[str]:
        """Deterministic comment header (wall time is left to the JSON sidecar)."""
        s = self.stats
        lines = [
            f"; outcome: {self.outcome}",
            f"; plan-length: {len(self.plan)}",
            f"; expansions: {s.expansions}",
            f"; generated: {s.generated}",
            f"; duplicates: {s.duplicates}",
            f"; peak-frontier: {s.peak_frontier}",
        ]
        if self.failure_step is not None:
            lines.append(f"; failure-step: {self.failure_step}")
        return lines

    def render(self) -> str:
        return "\n".join(self.header() + [str(a) for a in self.plan]) + "\n"

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "plan": [str(a) for a in self.plan],
            "plan_length": len(self.plan),
            "stats": asdict(self.stats),
            "failure_step": self.failure_step,
            "message": self.message,
        }

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write the plan file and its ``.json`` stats sidecar."""
        path = Path(path)
        path.write_text(self.render(), encoding="utf-8")
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path, side


def read_plan(path: str | Path) -> list[ActionLabel]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith(";"):
            out.append(ActionLabel.parse(line))
    return out


def goal_count(state: SymbolicState, goal: Goal) -> int:
    """Number of goal literals not satisfied in ``state``."""
    atoms = state.atoms
    return len(goal.positive - atoms) + len(goal.negative & atoms)


class NoveltyTable:
    """Atoms (and optionally unordered atom pairs) seen so far in one search."""

    def __init__(self, pairs: bool = False):
        self.pairs = pairs
        self.seen_atoms: set[GroundAtom] = set()
        self.seen_pairs: set[tuple[GroundAtom, GroundAtom]] = set()

    def rank(self, atoms: Iterable[GroundAtom]) -> int:
        atoms = sorted(atoms)
        new_atom = any(a not in self.seen_atoms for a in atoms)
        rank = 0 if new_atom else 2
        if self.pairs:
            pairs = list(itertools.combinations(atoms, 2))
            if not new_atom and any(p not in self.seen_pairs for p in pairs):
                rank = 1
            self.seen_pairs.update(pairs)
        self.seen_atoms.update(atoms)
        return rank


def novelty_rank(state: SymbolicState, table: NoveltyTable) -> int:
    """0 if the state has an unseen atom, 1 if only an unseen pair, else 2; updates ``table``."""
    return table.rank(state.atoms)


@dataclass
class SearchNode:
    state: SymbolicState
    parent: "SearchNode | None" = None
    action: ActionLabel | None = None
    g: int = 0
    h: float = 0
    novelty_rank: int = 0
    insertion_seq: int = 0

    def path(self) -> list[ActionLabel]:
        out = []
        node: SearchNode | None = self
        while node is not None and node.action is not None:
            out.append(node.action)
            node = node.parent
        return out[::-1]


def _search(
    initial: SymbolicState,
    goal: Goal,
    successors: Successors,
    budget: SearchBudget | None,
    priority: Callable[[SearchNode], tuple],
    heuristic: Heuristic,
    novelty: NoveltyTable | None,
    reopen: bool,
) -> PlanResult:
    budget = budget or SearchBudget()
    stats = SearchStats()
    start = time.perf_counter()
    seq = itertools.count()

    def make(state, parent, action, g):
        node = SearchNode(state, parent, action, g, heuristic(state, goal), 0, next(seq))
        if novelty is not None:
            node.novelty_rank = novelty.rank(state.atoms)
        return node

    root = make(initial, None, None, 0)
    frontier = [(priority(root), root.insertion_seq, root)]
    best_g = {initial.atoms: 0}
    closed: set = set()
    depth_pruned = False
    stats.peak_frontier = 1

    def done(outcome, node=None, msg=""):
        stats.elapsed = time.perf_counter() - start
        return PlanResult(outcome, node.path() if node else [], stats, message=msg)

    while frontier:
        _, _, node = heapq.heappop(frontier)
        key = node.state.atoms
        if key in closed:
            continue
        if reopen and node.g > best_g.get(key, math.inf):
            continue
        if goal_satisfied(node.state, goal):
            return done(SOLVED, node)
        if stats.expansions >= budget.max_expansions:
            return done(BUDGET, msg=f"expansion limit {budget.max_expansions} reached")
        if time.perf_counter() - start > budget.max_seconds:
            return done(BUDGET, msg=f"time limit {budget.max_seconds}s reached")
        closed.add(key)
        stats.expansions += 1
        if node.g >= budget.max_plan_length:
            depth_pruned = True
            continue
        for action, nxt in successors(node.state):
            stats.generated += 1
            nkey = nxt.atoms
            g = node.g + 1
            if nkey in closed or (nkey in best_g and (not reopen or best_g[nkey] <= g)):
                stats.duplicates += 1
                continue
            best_g[nkey] = g
            child = make(nxt, node, action, g)
            heapq.heappush(frontier, (priority(child), child.insertion_seq, child))
        stats.peak_frontier = max(stats.peak_frontier, len(frontier))
    if depth_pruned:
        return done(BUDGET, msg=f"plan length limit {budget.max_plan_length} reached")
    return done(EXHAUSTED, msg="search space exhausted")


def plan(
    initial: SymbolicState,
    goal: Goal,
    successors: Successors,
    budget: SearchBudget | None = None,
    tiebreak: str = "novelty",
    pairs: bool = False,
    heuristic: Heuristic | None = None,
) -> PlanResult:
    """Greedy best-first search; ties on the heuristic break by novelty, then FIFO.

    ``heuristic`` defaults to :func:`goal_count`. With ``tiebreak="fifo"``
    the novelty rank is not computed and insertion order decides.
    """
    if tiebreak not in ("novelty", "fifo"):
        raise ValueError(f"unknown tiebreak {tiebreak!r}")
    table = NoveltyTable(pairs) if tiebreak == "novelty" else None
    return _search(
        initial,
        goal,
        successors,
        budget,
        lambda n: (n.h, n.novelty_rank),
        heuristic or goal_count,
        table,
        reopen=False,
    )


def astar(
    initial: SymbolicState,
    goal: Goal,
    successors: Successors,
    budget: SearchBudget | None = None,
    heuristic: Heuristic | None = None,
) -> PlanResult:
    """A* with ``f = g + h`` (goal count by default), ties broken on ``h`` then FIFO."""
    return _search(
        initial,
        goal,
        successors,
        budget,
        lambda n: (n.g + n.h, n.h),
        heuristic or goal_count,
        None,
        reopen=True,
    )


def bfs_oracle(
    initial: SymbolicState, goal: Goal, successors: Successors, budget: SearchBudget | None = None
) -> PlanResult:
    """Breadth-first search with duplicate detection; solved plans are shortest."""
    budget = budget or SearchBudget()
    stats = SearchStats()
    start = time.perf_counter()
    root = SearchNode(initial)
    if goal_satisfied(initial, goal):
        return PlanResult(SOLVED, [], stats)
    seen = {initial.atoms}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if stats.expansions >= budget.max_expansions or time.perf_counter() - start > budget.max_seconds:
            stats.elapsed = time.perf_counter() - start
            return PlanResult(BUDGET, [], stats, message="budget exhausted")
        stats.expansions += 1
        if node.g >= budget.max_plan_length:
            continue
        for action, nxt in successors(node.state):
            stats.generated += 1
            if nxt.atoms in seen:
                stats.duplicates += 1
                continue
            seen.add(nxt.atoms)
            child = SearchNode(nxt, node, action, node.g + 1)
            if goal_satisfied(nxt, goal):
                stats.elapsed = time.perf_counter() - start
                return PlanResult(SOLVED, child.path(), stats)
            queue.append(child)
        stats.peak_frontier = max(stats.peak_frontier, len(queue))
    stats.elapsed = time.perf_counter() - start
    return PlanResult(EXHAUSTED, [], stats, message="search space exhausted")


# -- VLM baselines --------------------------------------------------------------

DISTANCE_SCHEMA = {
    "type": "object",
    "properties": {"distance": {"type": "integer", "minimum": 0}},
    "required": ["distance"],
    "additionalProperties": False,
}

PLAN_SCHEMA = {
    "type": "object",
    "properties": {"plan": {"type": "array", "items": {"type": "string"}, "maxItems": 256}},
    "required": ["plan"],
    "additionalProperties": False,
}

HEURISTIC_PROMPT = (
    "Estimate how many actions are needed to reach the goal from the given state. "
    "Answer with the number only, following the schema."
)
DIRECT_PLAN_PROMPT = (
    "You are given a domain description, an initial state and a goal. "
    "Return the full sequence of actions, one label per entry, formatted like name(arg1,arg2)."
)


def _response_format(name: str, schema: dict) -> dict:
    return {"type": "json_schema", "json_schema": {"name": name, "strict": True, "schema": schema}}


class OracleDistanceHeuristic:
    """Mock of a model-scored heuristic: exact remaining distance, plus optional Gaussian noise.

    Noise is a pure function of ``(seed, state)`` so repeated searches are deterministic.
    """

    def __init__(self, successors: Successors, noise: float = 0.0, seed: int = 0, budget: SearchBudget | None = None):
        self.successors = successors
        self.noise = noise
        self.seed = seed
        self.budget = budget or SearchBudget(max_expansions=200_000)
        self._memo: dict = {}

    def distance(self, state: SymbolicState, goal: Goal) -> float:
        key = (state.atoms, goal.literals)
        if key not in self._memo:
            res = bfs_oracle(state, goal, self.successors, self.budget)
            self._memo[key] = float(len(res.plan)) if res.solved else math.inf
        return self._memo[key]

    def __call__(self, state: SymbolicState, goal: Goal) -> float:
        d = self.distance(state, goal)
        if self.noise and math.isfinite(d) and d > 0:
            rng = random.Random(f"{self.seed}:{state.canonical_key}")
            d = max(0.0, d + rng.gauss(0.0, self.noise))
        return d


class VLMHeuristic:
    """Asks a chat endpoint for the remaining distance; goal states short-circuit to 0."""

    def __init__(self, client, system_text: str = HEURISTIC_PROMPT):
        self.client = client
        self.system_text = system_text
        self.calls = 0

    def __call__(self, state: SymbolicState, goal: Goal) -> float:
        if goal_satisfied(state, goal):
            return 0.0
        user = json.dumps({"state": encode_state(state), "goal": encode_goal(goal)})
        messages = [{"role": "system", "content": self.system_text}, {"role": "user", "content": user}]
        self.calls += 1
        raw = self.client.complete(messages, _response_format("distance", DISTANCE_SCHEMA))
        try:
            value = parse_raw(raw)["distance"]
        except (KeyError, TypeError, ParseError):
            return math.inf
        return float(value) if isinstance(value, (int, float)) and value >= 0 else math.inf


def vlm_heuristic(state: SymbolicState, goal: Goal, client) -> float:
    return VLMHeuristic(client)(state, goal)


def validate_plan(initial: SymbolicState, goal: Goal, labels: Sequence[str | ActionLabel], successors: Successors) -> PlanResult:
    """Replay a label sequence; solved iff it is applicable and ends in a goal state."""
    try:
        plan_labels = [l if isinstance(l, ActionLabel) else ActionLabel.parse(l) for l in labels]
    except VocabularyError as exc:
        return PlanResult(INVALID, [], failure_step=0, message=str(exc))
    try:
        final = replay(initial, plan_labels, successors)
    except InapplicableAction as exc:
        return PlanResult(INVALID, plan_labels, failure_step=exc.step, message=str(exc))
    if not goal_satisfied(final, goal):
        return PlanResult(INVALID, plan_labels, failure_step=len(plan_labels), message="plan does not reach the goal")
    return PlanResult(SOLVED, plan_labels)


def direct_vlm_plan(
    obs: Observation,
    goal_text: str,
    domain_description: str,
    client,
    initial: SymbolicState,
    goal: Goal,
    successors: Successors,
) -> PlanResult:
    """Single-shot plan from the model, validated by replay against the simulator."""
    content: list[dict] = [{"type": "text", "text": f"Domain:\n{domain_description}\n\nGoal: {goal_text}"}]
    if obs.kind == "text":
        content.append({"type": "text", "text": f"Initial state: {obs.text}"})
    else:
        import base64

        url = f"data:{obs.media_type};base64,{base64.b64encode(obs.image).decode()}"  # type: ignore[arg-type]
        content.append({"type": "image_url", "image_url": {"url": url}})
    messages = [{"role": "system", "content": DIRECT_PLAN_PROMPT}, {"role": "user", "content": content}]
    raw = client.complete(messages, _response_format("plan", PLAN_SCHEMA))
    try:
        labels = parse_raw(raw)["plan"]
        if not isinstance(labels, list):
            raise TypeError("plan is not a list")
    except (SymbolizerError, KeyError, TypeError) as exc:
        return PlanResult(INVALID, [], failure_step=0, message=f"unparseable plan: {exc}")
    try:
        return validate_plan(initial, goal, labels, successors)
    except InconsistentState as exc:
        return PlanResult(INVALID, [], failure_step=0, message=str(exc))
