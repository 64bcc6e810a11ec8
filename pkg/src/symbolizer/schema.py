"""Structured-output schemas compiled from a vocabulary, and their decoders.

The bodies are JSON Schema (draft 2020-12) documents. Every enumeration is
derived from the vocabulary's type names or the object set's names, so a
conforming document can only mention declared types, predicates and objects.
Atom records share one shape, ``{"predicate": ..., "args": [...]}``, and the
per-predicate argument slots are expressed as a discriminated union.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import jsonschema

from .errors import EmptyResult, ParseError, SchemaViolation, SymbolizerError
from .vocabulary import (
    GroundAtom,
    Goal,
    LiftedVocabulary,
    Literal,
    ObjectInstance,
    ObjectSet,
    SymbolicState,
)

STAGES = ("objects", "predicates", "goal", "successor")
DRAFT = "https://json-schema.org/draft/2020-12/schema"
NAME_PATTERN = r"^\s*[A-Za-z][A-Za-z0-9_-]*\s*$"
MAX_OBJECTS = 64
MAX_ATOMS = 512

_LIST_KEY = {"objects": "objects", "predicates": "atoms", "successor": "atoms", "goal": "literals"}


@dataclass(frozen=True)
class SchemaDoc:
    stage: str
    body: dict = field(compare=False)
    vocab_hash: str
    vocab: LiftedVocabulary = field(repr=False, compare=False)
    objects: ObjectSet | None = field(default=None, repr=False, compare=False)

    def render(self) -> str:
        """Byte-stable JSON rendering; this is what goes on the wire."""
        return json.dumps(self.body, indent=2, ensure_ascii=False) + "\n"

    @property
    def list_key(self) -> str:
        return _LIST_KEY[self.stage]

    def response_format(self) -> dict:
        return {"type": "json_schema", "json_schema": {"name": self.stage, "strict": True, "schema": self.body}}


def _wrap(title: str, key: str, items: dict, cap: int) -> dict:
    return {
        "$schema": DRAFT,
        "title": title,
        "type": "object",
        "properties": {key: {"type": "array", "maxItems": cap, "items": items}},
        "required": [key],
        "additionalProperties": False,
    }


def _hash(vocab: LiftedVocabulary, objs: ObjectSet | None = None) -> str:
    h = hashlib.sha256(vocab.content_hash().encode())
    if objs is not None:
        h.update(objs.content_hash().encode())
    return h.hexdigest()


def compile_object_schema(vocab: LiftedVocabulary, max_objects: int = MAX_OBJECTS) -> SchemaDoc:
    item = {
        "type": "object",
        "properties": {
            "name": {"type": "string", "pattern": NAME_PATTERN},
            "type": {"type": "string", "enum": list(vocab.types)},
        },
        "required": ["name", "type"],
        "additionalProperties": False,
    }
    return SchemaDoc("objects", _wrap("objects", "objects", item, max_objects), _hash(vocab), vocab)


def _atom_branches(vocab: LiftedVocabulary, objs: ObjectSet | None, polarity: bool) -> list[dict]:
    # objs=None gives the lifted form: arity is fixed but any well-formed name is accepted
    branches = []
    for sig in vocab.predicates:
        if objs is None:
            slots = [{"type": "string", "pattern": NAME_PATTERN} for _ in sig.arg_types]
        else:
            names = [list(objs.candidates(t)) for t in sig.arg_types]
            if any(not s for s in names):
                continue
            slots = [{"type": "string", "enum": s} for s in names]
        args: dict[str, Any] = {"type": "array", "minItems": sig.arity, "maxItems": sig.arity}
        if slots:
            args["prefixItems"] = slots
            args["items"] = False
        props: dict[str, Any] = {"predicate": {"type": "string", "enum": [sig.name]}, "args": args}
        if polarity:
            props["negated"] = {"type": "boolean", "default": False}
        branches.append(
            {
                "type": "object",
                "properties": props,
                "required": ["predicate", "args"],
                "additionalProperties": False,
            }
        )
    return branches


def _atom_schema(stage: str, vocab: LiftedVocabulary, objs: ObjectSet, max_atoms: int) -> SchemaDoc:
    if len(objs) == 0:
        raise EmptyResult(f"cannot compile a {stage} schema over an empty object set")
    branches = _atom_branches(vocab, objs, polarity=stage == "goal")
    key = _LIST_KEY[stage]
    if branches:
        body = _wrap(stage, key, {"anyOf": branches}, max_atoms)
    else:
        body = _wrap(stage, key, {}, 0)
    return SchemaDoc(stage, body, _hash(vocab, objs), vocab, objs)


def compile_predicate_schema(vocab: LiftedVocabulary, objs: ObjectSet, max_atoms: int = MAX_ATOMS) -> SchemaDoc:
    return _atom_schema("predicates", vocab, objs, max_atoms)


def compile_goal_schema(vocab: LiftedVocabulary, objs: ObjectSet, max_atoms: int = MAX_ATOMS) -> SchemaDoc:
    return _atom_schema("goal", vocab, objs, max_atoms)


def compile_successor_schema(vocab: LiftedVocabulary, objs: ObjectSet, max_atoms: int = MAX_ATOMS) -> SchemaDoc:
    return _atom_schema("successor", vocab, objs, max_atoms)


def compile_lifted_schema(stage: str, vocab: LiftedVocabulary, max_atoms: int = MAX_ATOMS) -> SchemaDoc:
    """Atom-stage schema before objects are known; argument names are checked only for shape."""
    if stage == "objects":
        return compile_object_schema(vocab)
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    body = _wrap(stage, _LIST_KEY[stage], {"anyOf": _atom_branches(vocab, None, stage == "goal")}, max_atoms)
    return SchemaDoc(stage, body, _hash(vocab), vocab)


def compile_schema(stage: str, vocab: LiftedVocabulary, objs: ObjectSet | None = None) -> SchemaDoc:
    if stage == "objects":
        return compile_object_schema(vocab)
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    if objs is None:
        raise ValueError(f"stage {stage!r} needs an object set")
    return _atom_schema(stage, vocab, objs, MAX_ATOMS)


# -- encoding -----------------------------------------------------------------


def encode_objects(objs: ObjectSet) -> dict:
    return {"objects": objs.to_list()}


def encode_atom(atom: GroundAtom) -> dict:
    return {"predicate": atom.predicate, "args": list(atom.args)}


def encode_state(state: SymbolicState | frozenset[GroundAtom]) -> dict:
    atoms = state.atoms if isinstance(state, SymbolicState) else state
    return {"atoms": [encode_atom(a) for a in sorted(atoms)]}


def encode_goal(goal: Goal) -> dict:
    out = []
    for lit in goal.sorted_literals():
        rec = encode_atom(lit.atom)
        rec["negated"] = not lit.positive
        out.append(rec)
    return {"literals": out}


def encode(value: ObjectSet | SymbolicState | Goal) -> dict:
    if isinstance(value, ObjectSet):
        return encode_objects(value)
    if isinstance(value, Goal):
        return encode_goal(value)
    return encode_state(value)


# -- validation and decoding --------------------------------------------------


def _path(parts) -> str:
    return "/" + "/".join(str(p) for p in parts) if parts else "/"


def _first_violation(schema: dict, instance: Any, prefix: tuple = ()) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: (len(e.absolute_path), [str(p) for p in e.absolute_path]))
    if errors:
        err = errors[0]
        raise SchemaViolation(_path(prefix + tuple(err.absolute_path)), err.message)


def _shell(body: dict) -> dict:
    """The document schema with its item schema relaxed, for a structural first pass."""
    shell = json.loads(json.dumps(body))
    for prop in shell["properties"].values():
        if prop.get("items") not in (None, {}):
            prop["items"] = {"type": "object"}
    return shell


def _branches(doc: SchemaDoc) -> dict[str, dict]:
    items = doc.body["properties"][doc.list_key]["items"]
    return {b["properties"]["predicate"]["enum"][0]: b for b in items.get("anyOf", [])}


def validate(doc: SchemaDoc, data: Any) -> None:
    """Raise :class:`SchemaViolation` at the first non-conforming location of ``data``."""
    key = doc.list_key
    _first_violation(_shell(doc.body), data)
    if doc.stage == "objects":
        _first_violation(doc.body, data)
        return
    branches = _branches(doc)
    for i, rec in enumerate(data[key]):
        pred = rec.get("predicate")
        if not isinstance(pred, str) or pred not in branches:
            if "predicate" not in rec:
                raise SchemaViolation(_path((key, i)), "'predicate' is a required property")
            raise SchemaViolation(_path((key, i, "predicate")), f"{pred!r} is not one of {sorted(branches)}")
        _first_violation(branches[pred], rec, (key, i))


def parse_raw(raw: str | bytes | dict) -> Any:
    if isinstance(raw, dict):
        return raw
    try:
        return json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError, TypeError) as exc:
        raise ParseError(f"response is not valid JSON: {exc}") from exc


def validate_and_decode(doc: SchemaDoc, raw: str | bytes | dict) -> ObjectSet | SymbolicState | Goal:
    """Decode model output into a domain value or raise the first violation found.

    Raises :class:`ParseError`, :class:`SchemaViolation`, or the typing errors
    of the vocabulary module (``TypedError``, ``DuplicateNameError``,
    ``ContradictionError``).
    """
    data = parse_raw(raw)
    validate(doc, data)
    records = data[doc.list_key]
    if doc.stage == "objects":
        objs = tuple(ObjectInstance(r["name"], r["type"]) for r in records)
        return ObjectSet(objs, doc.vocab)
    if doc.objects is None:
        raise ValueError(f"the lifted {doc.stage} schema has no object set to decode against")
    atoms = [GroundAtom(r["predicate"], tuple(r["args"])) for r in records]
    if doc.stage == "goal":
        lits = frozenset(Literal(a, not r.get("negated", False)) for a, r in zip(atoms, records))
        return Goal(lits, doc.objects)
    return SymbolicState(frozenset(atoms), doc.objects)


def is_expressible(doc: SchemaDoc, value: ObjectSet | SymbolicState | Goal) -> bool:
    try:
        validate(doc, encode(value))
    except SymbolizerError:
        return False
    return True
