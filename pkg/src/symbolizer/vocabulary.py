"""Lifted vocabularies, object sets, ground atoms, states and goals.

Every public constructor validates typing, so a state or goal that exists is
well-typed against its object set (and, through it, its vocabulary).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple

from .errors import ContradictionError, DuplicateNameError, TypedError, VocabularyError

IDENTIFIER = re.compile(r"[a-z][a-z0-9_-]*\Z")


def normalize(name: str) -> str:
    """Trim and lowercase an identifier, rejecting anything outside ``[a-z][a-z0-9_-]*``."""
    if not isinstance(name, str):
        raise VocabularyError(f"identifier must be a string, got {name!r}")
    norm = name.strip().lower()
    if not IDENTIFIER.match(norm):
        raise VocabularyError(f"invalid identifier {name!r}")
    return norm


@dataclass(frozen=True)
class PredicateSignature:
    name: str
    arg_types: tuple[str, ...] = ()
    static: bool = False

    def __post_init__(self):
        object.__setattr__(self, "name", normalize(self.name))
        object.__setattr__(self, "arg_types", tuple(normalize(t) for t in self.arg_types))

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    def __str__(self):
        return f"{self.name}({','.join(self.arg_types)})"


@dataclass(frozen=True)
class LiftedVocabulary:
    """Object types plus typed predicate signatures.

    ``supertypes`` optionally maps a type to its parent so that an argument
    slot typed ``support`` accepts objects of type ``disk`` or ``peg``.
    """

    types: tuple[str, ...]
    predicates: tuple[PredicateSignature, ...]
    supertypes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        types = [normalize(t) for t in self.types]
        if not types:
            raise VocabularyError("vocabulary declares no types")
        if len(set(types)) != len(types):
            raise VocabularyError("duplicate type names")
        preds = [p if isinstance(p, PredicateSignature) else PredicateSignature(*p) for p in self.predicates]
        if not preds:
            raise VocabularyError("vocabulary declares no predicates")
        names = [p.name for p in preds]
        if len(set(names)) != len(names):
            raise VocabularyError("duplicate predicate names")
        declared = set(types)
        for p in preds:
            for t in p.arg_types:
                if t not in declared:
                    raise VocabularyError(f"predicate {p.name} uses undeclared type {t!r}")
        sup = dict(self.supertypes) if not isinstance(self.supertypes, Mapping) else self.supertypes
        parents = {}
        for child, parent in sup.items():
            child, parent = normalize(child), normalize(parent)
            if child not in declared or parent not in declared:
                raise VocabularyError(f"supertype entry {child} - {parent} references undeclared type")
            parents[child] = parent
        for t in parents:  # reject cycles
            seen, cur = {t}, parents.get(t)
            while cur is not None:
                if cur in seen:
                    raise VocabularyError(f"type hierarchy cycle through {t!r}")
                seen.add(cur)
                cur = parents.get(cur)
        object.__setattr__(self, "types", tuple(sorted(types)))
        object.__setattr__(self, "predicates", tuple(sorted(preds, key=lambda p: p.name)))
        object.__setattr__(self, "supertypes", tuple(sorted(parents.items())))

    @cached_property
    def _by_name(self) -> dict[str, PredicateSignature]:
        return {p.name: p for p in self.predicates}

    @cached_property
    def _parents(self) -> dict[str, str]:
        return dict(self.supertypes)

    def predicate(self, name: str) -> PredicateSignature | None:
        return self._by_name.get(name)

    def is_subtype(self, child: str, ancestor: str) -> bool:
        cur: str | None = child
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self._parents.get(cur)
        return False

    def to_dict(self) -> dict:
        doc = {
            "types": list(self.types),
            "predicates": [
                {"name": p.name, "args": list(p.arg_types), "static": p.static} for p in self.predicates
            ],
        }
        if self.supertypes:
            doc["supertypes"] = dict(self.supertypes)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "LiftedVocabulary":
        try:
            preds = [
                PredicateSignature(p["name"], tuple(p.get("args", ())), bool(p.get("static", False)))
                for p in doc["predicates"]
            ]
            return cls(tuple(doc["types"]), tuple(preds), tuple(dict(doc.get("supertypes", {})).items()))
        except (KeyError, TypeError) as exc:
            raise VocabularyError(f"malformed vocabulary document: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "LiftedVocabulary":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise VocabularyError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True, order=True)
class ObjectInstance:
    name: str
    type: str

    def __post_init__(self):
        object.__setattr__(self, "name", normalize(self.name))
        object.__setattr__(self, "type", normalize(self.type))


@dataclass(frozen=True)
class ObjectSet:
    """Named, typed objects of one scene, ordered by name."""

    objects: tuple[ObjectInstance, ...]
    vocab: LiftedVocabulary = field(repr=False, compare=False)

    def __post_init__(self):
        objs = [o if isinstance(o, ObjectInstance) else ObjectInstance(*o) for o in self.objects]
        seen: set[str] = set()
        for o in objs:
            if o.name in seen:
                raise DuplicateNameError(f"duplicate object name {o.name!r}")
            if o.type not in self.vocab.types:
                raise TypedError("unknown-type", o.type, f"object {o.name} has undeclared type {o.type!r}")
            seen.add(o.name)
        object.__setattr__(self, "objects", tuple(sorted(objs)))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]] | Mapping[str, str], vocab: LiftedVocabulary) -> "ObjectSet":
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        return cls(tuple(ObjectInstance(n, t) for n, t in items), vocab)

    @cached_property
    def _types(self) -> dict[str, str]:
        return {o.name: o.type for o in self.objects}

    @cached_property
    def by_type(self) -> dict[str, tuple[str, ...]]:
        """Exact partition of object names by declared type."""
        out: dict[str, list[str]] = {}
        for o in self.objects:
            out.setdefault(o.type, []).append(o.name)
        return {t: tuple(names) for t, names in sorted(out.items())}

    def type_of(self, name: str) -> str | None:
        return self._types.get(name)

    def names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.objects)

    @cached_property
    def _candidates(self) -> dict[str, tuple[str, ...]]:
        return {
            t: tuple(o.name for o in self.objects if self.vocab.is_subtype(o.type, t)) for t in self.vocab.types
        }

    def candidates(self, type_name: str) -> tuple[str, ...]:
        """Object names admissible in a slot of ``type_name`` (subtypes included)."""
        return self._candidates.get(type_name, ())

    def restrict(self, names: Iterable[str]) -> "ObjectSet":
        keep = set(names)
        return ObjectSet(tuple(o for o in self.objects if o.name in keep), self.vocab)

    def __len__(self):
        return len(self.objects)

    def __iter__(self) -> Iterator[ObjectInstance]:
        return iter(self.objects)

    def __contains__(self, name) -> bool:
        return name in self._types

    def to_list(self) -> list[dict]:
        return [{"name": o.name, "type": o.type} for o in self.objects]

    def content_hash(self) -> str:
        blob = json.dumps(self.to_list(), separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_ATOM_RE = re.compile(r"^\s*([^\s(),]+)\s*(?:\((.*)\))?\s*$")


class GroundAtom(NamedTuple):
    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.predicate}({','.join(self.args)})"

    @classmethod
    def of(cls, predicate: str, *args: str) -> "GroundAtom":
        return cls(normalize(predicate), tuple(normalize(a) for a in args))

    @classmethod
    def parse(cls, text: str) -> "GroundAtom":
        """Parse ``on(a,b)``; zero-arity atoms may omit the parentheses."""
        m = _ATOM_RE.match(text)
        if not m:
            raise VocabularyError(f"cannot parse atom {text!r}")
        pred, inner = m.groups()
        args = [a for a in (inner or "").split(",")]
        if inner is None or not inner.strip():
            args = []
        return cls.of(pred, *args)


def _as_atom(a) -> GroundAtom:
    if isinstance(a, GroundAtom):
        return a
    if isinstance(a, str):
        return GroundAtom.parse(a)
    pred, args = a
    return GroundAtom.of(pred, *args)


def check_atom(vocab: LiftedVocabulary, objs: ObjectSet, atom: GroundAtom) -> None:
    """Raise :class:`TypedError` unless ``atom`` is well-typed."""
    sig = vocab.predicate(atom.predicate)
    if sig is None:
        raise TypedError("unknown-predicate", atom.predicate, f"unknown predicate {atom.predicate!r}")
    if len(atom.args) != sig.arity:
        raise TypedError(
            "arity-mismatch", atom.predicate, f"{atom}: {atom.predicate} takes {sig.arity} args, got {len(atom.args)}"
        )
    for i, (arg, want) in enumerate(zip(atom.args, sig.arg_types)):
        have = objs.type_of(arg)
        if have is None:
            raise TypedError("unknown-object", arg, f"{atom}: unknown object {arg!r}", i)
        if not vocab.is_subtype(have, want):
            raise TypedError("type-mismatch", arg, f"{atom}: arg {i} {arg!r} is {have}, expected {want}", i)


def is_well_typed(vocab: LiftedVocabulary, objs: ObjectSet, atom: GroundAtom) -> bool:
    try:
        check_atom(vocab, objs, atom)
    except TypedError:
        return False
    return True


def ground_atom_universe(vocab: LiftedVocabulary, objs: ObjectSet) -> list[GroundAtom]:
    out = []
    for sig in vocab.predicates:
        slots = [objs.candidates(t) for t in sig.arg_types]
        out.extend(GroundAtom(sig.name, args) for args in itertools.product(*slots))
    return sorted(out)


def render_atoms(atoms: Iterable[GroundAtom]) -> str:
    return "\n".join(str(a) for a in sorted(atoms))


@dataclass(frozen=True)
class SymbolicState:
    """Set of ground atoms true in one world configuration."""

    atoms: frozenset[GroundAtom]
    objects: ObjectSet = field(repr=False, compare=False)

    def __post_init__(self):
        atoms = frozenset(_as_atom(a) for a in self.atoms)
        for a in atoms:
            check_atom(self.objects.vocab, self.objects, a)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def trusted(cls, atoms: frozenset[GroundAtom], objects: ObjectSet) -> "SymbolicState":
        """Build without re-checking; for producers that emit well-typed atoms by construction."""
        state = object.__new__(cls)
        object.__setattr__(state, "atoms", atoms)
        object.__setattr__(state, "objects", objects)
        return state

    @property
    def vocab(self) -> LiftedVocabulary:
        return self.objects.vocab

    @cached_property
    def canonical_key(self) -> str:
        return render_atoms(self.atoms)

    def __contains__(self, atom) -> bool:
        return atom in self.atoms

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(sorted(self.atoms))


class Literal(NamedTuple):
    atom: GroundAtom
    positive: bool = True

    def __str__(self):
        return str(self.atom) if self.positive else f"not {self.atom}"

    @classmethod
    def parse(cls, text: str) -> "Literal":
        t = text.strip()
        for prefix in ("not ", "!", "-"):
            if t.lower().startswith(prefix):
                return cls(GroundAtom.parse(t[len(prefix):]), False)
        return cls(GroundAtom.parse(t), True)


@dataclass(frozen=True)
class Goal:
    """Conjunction of ground literals."""

    literals: frozenset[Literal]
    objects: ObjectSet = field(repr=False, compare=False)

    def __post_init__(self):
        lits = set()
        for lit in self.literals:
            if isinstance(lit, str):
                lit = Literal.parse(lit)
            elif isinstance(lit, GroundAtom):
                lit = Literal(lit, True)
            else:
                lit = Literal(_as_atom(lit[0]), bool(lit[1]))
            check_atom(self.objects.vocab, self.objects, lit.atom)
            lits.add(lit)
        pos = {l.atom for l in lits if l.positive}
        clash = sorted(pos & {l.atom for l in lits if not l.positive})
        if clash:
            raise ContradictionError(f"goal requires both {clash[0]} and its negation")
        object.__setattr__(self, "literals", frozenset(lits))

    @cached_property
    def positive(self) -> frozenset[GroundAtom]:
        return frozenset(l.atom for l in self.literals if l.positive)

    @cached_property
    def negative(self) -> frozenset[GroundAtom]:
        return frozenset(l.atom for l in self.literals if not l.positive)

    def sorted_literals(self) -> list[Literal]:
        return sorted(self.literals, key=lambda l: (l.atom, not l.positive))

    def __len__(self):
        return len(self.literals)

    def __iter__(self):
        return iter(self.sorted_literals())


def goal_satisfied(state: SymbolicState, goal: Goal) -> bool:
    atoms = state.atoms
    return goal.positive <= atoms and not (goal.negative & atoms)


@dataclass(frozen=True)
class Observation:
    """An image (raw bytes plus media type) or a text description; never both."""

    kind: str
    text: str | None = None
    image: bytes | None = field(default=None, repr=False)
    media_type: str | None = None

    def __post_init__(self):
        if self.kind == "text":
            if self.text is None or self.image is not None:
                raise VocabularyError("text observation needs text and no image payload")
        elif self.kind == "image":
            if self.image is None or self.text is not None or not self.media_type:
                raise VocabularyError("image observation needs bytes, a media type, and no text")
        else:
            raise VocabularyError(f"unknown observation kind {self.kind!r}")

    @classmethod
    def from_text(cls, text: str) -> "Observation":
        return cls("text", text=text)

    @classmethod
    def from_image(cls, path: str | Path) -> "Observation":
        path = Path(path)
        media = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg", ".webp": "image/webp"}
        return cls("image", image=path.read_bytes(), media_type=media.get(path.suffix.lower(), "application/octet-stream"))

    def digest(self) -> str:
        h = hashlib.sha256(self.kind.encode())
        h.update(self.text.encode() if self.text is not None else self.image)  # type: ignore[arg-type]
        return h.hexdigest()
