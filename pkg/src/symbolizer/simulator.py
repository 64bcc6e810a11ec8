"""Symbolic simulators used as black-box successor generators.

A simulator decodes a symbolic state into its own structural representation
(who rests on what), enumerates legal moves on that structure, and renders the
resulting configurations back to atoms. It never exposes preconditions or
effects; the planner only sees ``(label, next_state)`` pairs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

from .errors import InapplicableAction, InconsistentState, UnsupportedSize, VocabularyError
from .vocabulary import (
    GroundAtom,
    Goal,
    LiftedVocabulary,
    Literal,
    ObjectSet,
    Observation,
    SymbolicState,
    normalize,
)


class ActionLabel(NamedTuple):
    name: str
    args: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.name}({','.join(self.args)})"

    @classmethod
    def parse(cls, text: str) -> "ActionLabel":
        atom = GroundAtom.parse(text)
        return cls(atom.predicate, atom.args)


Successors = Callable[[SymbolicState], "list[tuple[ActionLabel, SymbolicState]]"]


@lru_cache(maxsize=None)
def load_vocabulary(name: str) -> LiftedVocabulary:
    """Load a bundled vocabulary by domain name (``blocksworld``, ``hanoi``)."""
    ref = resources.files("symbolizer.data").joinpath(f"{name}.json")
    if not ref.is_file():
        raise VocabularyError(f"no bundled vocabulary named {name!r}")
    return LiftedVocabulary.from_dict(json.loads(ref.read_text()))


def bundled_text(name: str) -> str:
    return resources.files("symbolizer.data").joinpath(name).read_text()


def _atom(pred: str, *args: str) -> GroundAtom:
    return GroundAtom(pred, args)


class Simulator:
    """Base for symbolic domains; subclasses implement ``successors``."""

    name: str
    vocab_name: str

    @property
    def vocab(self) -> LiftedVocabulary:
        return load_vocabulary(self.vocab_name)

    def successors(self, state: SymbolicState) -> list[tuple[ActionLabel, SymbolicState]]:
        raise NotImplementedError

    def check(self, state: SymbolicState) -> None:
        raise NotImplementedError

    def describe(self, state: SymbolicState) -> str:
        raise NotImplementedError

    def describe_goal(self, goal: Goal) -> str:
        parts = []
        for lit in goal:
            a = lit.atom
            if a.predicate == "on":
                text = f"{a.args[0]} on {a.args[1]}"
            elif a.predicate == "on-table":
                text = f"{a.args[0]} on table"
            else:
                text = str(a)
            parts.append(text if lit.positive else f"not {text}")
        return ", ".join(parts) + "."

    def _finish(self, state: SymbolicState, moves) -> list[tuple[ActionLabel, SymbolicState]]:
        out = [(label, SymbolicState.trusted(frozenset(atoms), state.objects)) for label, atoms in moves]
        out.sort(key=lambda p: str(p[0]))
        return out


# -- Blocksworld --------------------------------------------------------------


class Blocksworld(Simulator):
    """Single-arm Blocksworld with an unbounded table."""

    name = "blocksworld"
    vocab_name = "blocksworld"
    HAND = "<hand>"
    TABLE = "<table>"

    def _decode(self, state: SymbolicState) -> dict[str, str]:
        blocks = state.objects.candidates("block")
        below: dict[str, str] = {}

        def put(x, where):
            if x in below:
                raise InconsistentState(f"block {x} has more than one position")
            below[x] = where

        holding = [a.args[0] for a in state.atoms if a.predicate == "holding"]
        for a in state.atoms:
            if a.predicate == "on":
                if a.args[0] == a.args[1]:
                    raise InconsistentState(f"{a}: block on itself")
                put(a.args[0], a.args[1])
            elif a.predicate == "on-table":
                put(a.args[0], self.TABLE)
            elif a.predicate == "holding":
                put(a.args[0], self.HAND)
        if len(holding) > 1:
            raise InconsistentState("holding more than one block")
        missing = [b for b in blocks if b not in below]
        if missing:
            raise InconsistentState(f"block {missing[0]} has no position")
        tops = [x for x in below.values() if x not in (self.TABLE, self.HAND)]
        if len(tops) != len(set(tops)):
            raise InconsistentState("two blocks rest directly on the same block")
        if any(below.get(y) == self.HAND for y in tops):
            raise InconsistentState("a block rests on the held block")
        for b in blocks:  # every chain must reach the table or the hand
            seen, cur = set(), b
            while cur in below:
                if cur in seen:
                    raise InconsistentState(f"cycle in stack through {b}")
                seen.add(cur)
                cur = below[cur]
        expected = frozenset(self._render(below))
        if expected != state.atoms:
            diff = sorted(expected ^ state.atoms)
            raise InconsistentState(f"clear/hand atoms disagree with configuration at {diff[0]}")
        return below

    def _render(self, below: dict[str, str]) -> list[GroundAtom]:
        covered = set(below.values())
        atoms = []
        held = False
        for x, y in below.items():
            if y == self.TABLE:
                atoms.append(_atom("on-table", x))
            elif y == self.HAND:
                atoms.append(_atom("holding", x))
                held = True
            else:
                atoms.append(_atom("on", x, y))
            if y != self.HAND and x not in covered:
                atoms.append(_atom("clear", x))
        if not held:
            atoms.append(_atom("hand-empty"))
        return atoms

    def check(self, state: SymbolicState) -> None:
        self._decode(state)

    def successors(self, state: SymbolicState) -> list[tuple[ActionLabel, SymbolicState]]:
        below = self._decode(state)
        covered = set(below.values())
        clear = sorted(x for x in below if x not in covered and below[x] != self.HAND)
        held = [x for x, y in below.items() if y == self.HAND]
        moves = []
        if not held:
            for x in clear:
                nxt = dict(below)
                nxt[x] = self.HAND
                if below[x] == self.TABLE:
                    moves.append((ActionLabel("pick-up", (x,)), self._render(nxt)))
                else:
                    moves.append((ActionLabel("unstack", (x, below[x])), self._render(nxt)))
        else:
            x = held[0]
            nxt = dict(below)
            nxt[x] = self.TABLE
            moves.append((ActionLabel("put-down", (x,)), self._render(nxt)))
            for y in clear:
                nxt = dict(below)
                nxt[x] = y
                moves.append((ActionLabel("stack", (x, y)), self._render(nxt)))
        return self._finish(state, moves)

    def describe(self, state: SymbolicState) -> str:
        below = self._decode(state)
        lines = []
        for x in sorted(below):
            y = below[x]
            if y == self.TABLE:
                lines.append(f"{x} is on the table.")
            elif y == self.HAND:
                lines.append(f"The robot is holding {x}.")
            else:
                lines.append(f"{x} is on {y}.")
        if self.HAND not in below.values():
            lines.append("The robot's hand is empty.")
        return " ".join(lines)

    def state_from_towers(self, objs: ObjectSet, towers: Sequence[Sequence[str]], held: str | None = None) -> SymbolicState:
        """Build a state from bottom-to-top towers."""
        below = {}
        for tower in towers:
            for i, b in enumerate(tower):
                below[b] = self.TABLE if i == 0 else tower[i - 1]
        if held is not None:
            below[held] = self.HAND
        return SymbolicState(frozenset(self._render(below)), objs)


# -- Hanoi --------------------------------------------------------------------


class Hanoi(Simulator):
    """Towers of Hanoi with three pegs; disk sizes come from static ``smaller`` atoms."""

    vocab_name = "hanoi"
    PEGS = ("peg1", "peg2", "peg3")
    COLORS = ("red", "green", "blue", "yellow", "purple", "orange", "pink", "grey")

    def __init__(self, color: bool = False):
        self.color = color
        self.name = "hanoi-color" if color else "hanoi"

    def _decode(self, state: SymbolicState):
        disks = state.objects.candidates("disk")
        supports = state.objects.candidates("support")
        smaller = {a.args for a in state.atoms if a.predicate == "smaller"}
        below: dict[str, str] = {}
        for a in state.atoms:
            if a.predicate == "on":
                d, s = a.args
                if d in below:
                    raise InconsistentState(f"disk {d} rests on two supports")
                if d == s:
                    raise InconsistentState(f"{a}: disk on itself")
                below[d] = s
        for d in disks:
            if d not in below:
                raise InconsistentState(f"disk {d} has no support")
        tops = list(below.values())
        if len(tops) != len(set(tops)):
            raise InconsistentState("two disks rest directly on the same support")
        for d, s in below.items():
            if (d, s) not in smaller:
                raise InconsistentState(f"disk {d} rests on {s}, which is not larger")
        for d in disks:
            seen, cur = set(), d
            while cur in below:
                if cur in seen:
                    raise InconsistentState(f"cycle through {d}")
                seen.add(cur)
                cur = below[cur]
        covered = set(tops)
        clear = {a.args[0] for a in state.atoms if a.predicate == "clear"}
        want = {s for s in supports if s not in covered}
        if clear != want:
            bad = sorted(clear ^ want)[0]
            raise InconsistentState(f"clear({bad}) disagrees with configuration")
        return below, smaller, frozenset(a for a in state.atoms if a.predicate == "smaller")

    def check(self, state: SymbolicState) -> None:
        self._decode(state)

    @staticmethod
    def _render(below: dict[str, str], supports: Iterable[str], static: frozenset[GroundAtom]) -> set[GroundAtom]:
        covered = set(below.values())
        atoms = set(static)
        atoms.update(_atom("on", d, s) for d, s in below.items())
        atoms.update(_atom("clear", s) for s in supports if s not in covered)
        return atoms

    def successors(self, state: SymbolicState) -> list[tuple[ActionLabel, SymbolicState]]:
        below, smaller, static = self._decode(state)
        supports = state.objects.candidates("support")
        covered = set(below.values())
        moves = []
        for d in sorted(below):
            if d in covered:
                continue
            for t in supports:
                if t == d or t == below[d] or t in covered or (d, t) not in smaller:
                    continue
                nxt = dict(below)
                nxt[d] = t
                moves.append((ActionLabel("move", (d, below[d], t)), self._render(nxt, supports, static)))
        return self._finish(state, moves)

    def describe(self, state: SymbolicState) -> str:
        below, _, static = self._decode(state)
        disks = self.disks_by_size(state.objects, static)
        lines = [f"Disks from smallest to largest: {', '.join(disks)}."]
        lines += [f"{d} is on {below[d]}." for d in sorted(below)]
        covered = set(below.values())
        lines += [f"{p} is empty." for p in state.objects.candidates("peg") if p not in covered]
        return " ".join(lines)

    @staticmethod
    def disks_by_size(objs: ObjectSet, static: Iterable[GroundAtom]) -> list[str]:
        disks = objs.candidates("disk")
        larger_than = {d: 0 for d in disks}
        for a in static:
            if a.predicate == "smaller" and a.args[1] in larger_than:
                larger_than[a.args[1]] += 1
        return sorted(disks, key=lambda d: (larger_than[d], d))

    def objects(self, n: int, rng: random.Random | None = None) -> tuple[ObjectSet, list[str]]:
        """Object set plus disks ordered smallest first."""
        if self.color:
            names = list(self.COLORS[:n])
            if rng is not None:
                rng.shuffle(names)
        else:
            names = [f"d{i}" for i in range(1, n + 1)]
        pairs = [(d, "disk") for d in names] + [(p, "peg") for p in self.PEGS]
        return ObjectSet.from_pairs(pairs, self.vocab), names

    def state_from_pegs(self, objs: ObjectSet, sizes: Sequence[str], pegs: dict[str, Sequence[str]]) -> SymbolicState:
        """Build a state from bottom-to-top stacks per peg; ``sizes`` lists disks smallest first."""
        static = set()
        for i, d in enumerate(sizes):
            static.update(_atom("smaller", d, p) for p in self.PEGS)
            static.update(_atom("smaller", d, e) for e in sizes[i + 1:])
        below = {}
        for peg, stack in pegs.items():
            for i, d in enumerate(stack):
                below[d] = peg if i == 0 else stack[i - 1]
        return SymbolicState(frozenset(self._render(below, objs.candidates("support"), frozenset(static))), objs)


DOMAINS: dict[str, Simulator] = {
    "blocksworld": Blocksworld(),
    "hanoi": Hanoi(),
    "hanoi-color": Hanoi(color=True),
}


def get_simulator(domain: str) -> Simulator:
    try:
        return DOMAINS[domain]
    except KeyError:
        raise VocabularyError(f"unknown domain {domain!r}; expected one of {sorted(DOMAINS)}") from None


# -- instances ----------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """One planning problem with ground truth; doubles as an eval dataset row."""

    id: str
    domain: str
    objects: ObjectSet
    init: SymbolicState
    goal: Goal
    observation: Observation | None = field(default=None, repr=False)
    goal_text: str = ""
    gt_plan_length: int | None = None
    vocab_ref: str | dict | None = field(default=None, repr=False)
    image_path: str | None = field(default=None, repr=False)

    @property
    def vocab(self) -> LiftedVocabulary:
        return self.objects.vocab

    def to_dict(self) -> dict:
        doc: dict = {
            "id": self.id,
            "domain": self.domain,
            "vocabulary": self.vocab_ref if self.vocab_ref is not None else self.vocab.to_dict(),
            "objects": self.objects.to_list(),
            "init": [str(a) for a in sorted(self.init.atoms)],
            "goal": [str(l) for l in self.goal.sorted_literals()],
            "goal_text": self.goal_text,
        }
        if self.observation is not None:
            if self.observation.kind == "text":
                doc["observation"] = {"text": self.observation.text}
            else:
                doc["observation"] = {"image": self.image_path, "media_type": self.observation.media_type}
        if self.gt_plan_length is not None:
            doc["gt_plan_length"] = self.gt_plan_length
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path | None = None) -> "Instance":
        ref = doc.get("vocabulary", doc.get("domain"))
        if isinstance(ref, dict):
            vocab = LiftedVocabulary.from_dict(ref)
        elif isinstance(ref, str) and ref.endswith(".json"):
            path = Path(ref) if base_dir is None else Path(base_dir) / ref
            vocab = LiftedVocabulary.load(path)
        else:
            vocab = load_vocabulary(get_simulator(ref).vocab_name if ref in DOMAINS else ref)
        objs = ObjectSet.from_pairs([(o["name"], o["type"]) for o in doc["objects"]], vocab)
        init = SymbolicState(frozenset(GroundAtom.parse(a) for a in doc.get("init", [])), objs)
        goal = Goal(frozenset(Literal.parse(l) for l in doc.get("goal", [])), objs)
        obs = None
        raw = doc.get("observation")
        if isinstance(raw, dict) and raw.get("text") is not None:
            obs = Observation.from_text(raw["text"])
        elif isinstance(raw, dict) and raw.get("image"):
            path = Path(raw["image"]) if base_dir is None else Path(base_dir) / raw["image"]
            obs = Observation.from_image(path)
        elif isinstance(raw, str):
            obs = Observation.from_text(raw)
        return cls(
            id=str(doc["id"]),
            domain=normalize(doc["domain"]),
            objects=objs,
            init=init,
            goal=goal,
            observation=obs,
            goal_text=doc.get("goal_text", ""),
            gt_plan_length=doc.get("gt_plan_length"),
            vocab_ref=ref,
            image_path=raw.get("image") if isinstance(raw, dict) else None,
        )

    @classmethod
    def load(cls, path: str | Path) -> "Instance":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


def load_dataset(path: str | Path) -> list[Instance]:
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(Instance.from_dict(json.loads(line), path.parent))
    return rows


def write_dataset(instances: Iterable[Instance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(inst.to_json() + "\n")


SIZE_RANGE = {"blocksworld": (2, 10), "hanoi": (2, 8), "hanoi-color": (2, 8)}
BLOCK_NAMES = ("red", "green", "blue", "yellow", "purple", "orange", "pink", "grey", "white", "black")


def _scramble(sim: Simulator, state: SymbolicState, depth: int, rng: random.Random) -> SymbolicState:
    for _ in range(depth):
        succ = sim.successors(state)
        state = rng.choice(succ)[1]
    if isinstance(sim, Blocksworld) and any(a.predicate == "holding" for a in state.atoms):
        state = rng.choice(sim.successors(state))[1]
    return state


def make_instance(domain: str, n: int, seed: int = 0, scramble: int | None = None, tower: bool = False) -> Instance:
    """Generate a reproducible instance whose goal is satisfiable by construction.

    The goal configuration is built first and the initial state is reached
    from it by ``scramble`` random legal moves. For Hanoi, ``scramble=None``
    yields the canonical problem (all disks on peg1, goal on peg3); for
    Blocksworld it defaults to ``4 * n`` moves.
    """
    sim = get_simulator(domain)
    lo, hi = SIZE_RANGE[domain]
    if not lo <= n <= hi:
        raise UnsupportedSize(f"{domain} supports sizes {lo}..{hi}, got {n}")
    rng = random.Random(f"{domain}:{n}:{seed}")
    if isinstance(sim, Blocksworld):
        names = list(BLOCK_NAMES[:n])
        objs = ObjectSet.from_pairs([(b, "block") for b in names], sim.vocab)
        order = names[:]
        rng.shuffle(order)
        towers: list[list[str]] = []
        for b in order:
            if tower or (towers and rng.random() < 0.6):
                if towers:
                    towers[-1].append(b)
                    continue
            towers.append([b])
        goal_state = sim.state_from_towers(objs, towers)
        lits = [Literal(a) for a in goal_state.atoms if a.predicate in ("on", "on-table")]
        depth = 4 * n if scramble is None else scramble
        init = _scramble(sim, goal_state, depth, rng)
    else:
        assert isinstance(sim, Hanoi)
        objs, sizes = sim.objects(n, rng)
        stack = list(reversed(sizes))
        goal_state = sim.state_from_pegs(objs, sizes, {"peg3": stack})
        lits = [Literal(a) for a in goal_state.atoms if a.predicate == "on"]
        if scramble is None:
            init = sim.state_from_pegs(objs, sizes, {"peg1": stack})
        else:
            init = _scramble(sim, goal_state, scramble, rng)
    goal = Goal(frozenset(lits), objs)
    suffix = "canonical" if scramble is None and not isinstance(sim, Blocksworld) else f"s{seed}"
    return Instance(
        id=f"{domain}-{n}-{suffix}" + (f"-d{scramble}" if scramble is not None else ""),
        domain=domain,
        objects=objs,
        init=init,
        goal=goal,
        observation=Observation.from_text(sim.describe(init)),
        goal_text=sim.describe_goal(goal),
        vocab_ref=sim.vocab_name,
    )


def bundled_suite(seed: int = 0) -> list[Instance]:
    """Blocksworld 2-6 blocks, Hanoi 2-5 disks, Hanoi-Color 3 disks."""
    out = [make_instance("blocksworld", n, seed) for n in range(2, 7)]
    out += [make_instance("hanoi", n) for n in range(2, 6)]
    out.append(make_instance("hanoi-color", 3, seed))
    return out


def replay(initial: SymbolicState, plan: Sequence[ActionLabel | str], successors: Successors) -> SymbolicState:
    """Apply each label by matching it against ``successors`` output.

    Raises :class:`InapplicableAction` carrying the index of the first label
    with no matching successor.
    """
    state = initial
    for step, label in enumerate(plan):
        want = str(label) if isinstance(label, ActionLabel) else str(ActionLabel.parse(label))
        try:
            options = successors(state)
        except InconsistentState as exc:
            raise InapplicableAction(f"step {step}: {exc}", step) from exc
        for lab, nxt in options:
            if str(lab) == want:
                state = nxt
                break
        else:
            raise InapplicableAction(f"step {step}: {want} is not applicable", step)
    return state
