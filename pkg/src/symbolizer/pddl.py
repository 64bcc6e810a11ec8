"""PDDL (STRIPS + typing + negative preconditions): parsing, grounding, emission.

Used for the plan-with-model protocol, where grounded initial states and goals
are written out as problem files and solved against a ground-truth domain.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .errors import InapplicableAction, ParseError, TypedError, UnsupportedRequirement
from .planner import PlanResult, SearchBudget, astar
from .simulator import ActionLabel
from .vocabulary import (
    GroundAtom,
    Goal,
    LiftedVocabulary,
    Literal,
    ObjectSet,
    PredicateSignature,
    SymbolicState,
    check_atom,
)

SUPPORTED_REQUIREMENTS = {":strips", ":typing", ":negative-preconditions"}

# -- s-expressions ----------------------------------------------------------------


class Token(str):
    line: int
    column: int

    def __new__(cls, text: str, line: int, column: int):
        tok = super().__new__(cls, text)
        tok.line, tok.column = line, column
        return tok


_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def _tokenize(text: str) -> list[Token]:
    tokens = []
    line, col_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        s = m.group()
        if s[0].isspace() or s[0] == ";":
            nl = s.count("\n")
            if nl:
                line += nl
                col_start = m.start() + s.rfind("\n") + 1
            continue
        tokens.append(Token(s.lower(), line, m.start() - col_start + 1))
    return tokens


class SExpr(list):
    line: int = 1
    column: int = 1


def _parse_sexpr(text: str) -> SExpr:
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input", 1, 1)
    stack: list[SExpr] = []
    root = None
    for tok in tokens:
        if tok == "(":
            node = SExpr()
            node.line, node.column = tok.line, tok.column
            if stack:
                stack[-1].append(node)
            elif root is not None:
                raise ParseError("trailing content after top-level expression", tok.line, tok.column)
            else:
                root = node
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", tok.line, tok.column)
            stack.pop()
        else:
            if not stack:
                raise ParseError(f"unexpected token {tok!r} outside expression", tok.line, tok.column)
            stack[-1].append(tok)
    if stack:
        raise ParseError("unexpected end of input: unclosed '('", stack[-1].line, stack[-1].column)
    assert root is not None
    return root


def _loc(x) -> tuple[int | None, int | None]:
    return getattr(x, "line", None), getattr(x, "column", None)


def _expect_list(x, what: str) -> SExpr:
    if not isinstance(x, list):
        raise ParseError(f"expected {what}, got {x!r}", *_loc(x))
    return x


def _typed_list(items: Sequence, default: str = "object") -> list[tuple[str, str]]:
    """Parse ``a b - t c - u d`` into ``[(a, t), (b, t), (c, u), (d, object)]``."""
    out: list[tuple[str, str]] = []
    pending: list = []
    it = iter(items)
    for tok in it:
        if isinstance(tok, list):
            raise ParseError("unexpected list in typed list", *_loc(tok))
        if tok == "-":
            typ = next(it, None)
            if typ is None or isinstance(typ, list):
                raise ParseError("expected type name after '-'", *_loc(tok))
            if typ == "either":
                raise ParseError("'either' types are not supported", *_loc(typ))
            out.extend((p, str(typ)) for p in pending)
            pending = []
        else:
            pending.append(str(tok))
    out.extend((p, default) for p in pending)
    return out


# -- domain ---------------------------------------------------------------------


class LiftedAtom(tuple):
    """``(predicate, (term, ...))`` where terms are ``?vars`` or constants."""

    def __new__(cls, predicate: str, terms: Sequence[str]):
        return super().__new__(cls, (predicate, tuple(terms)))

    @property
    def predicate(self) -> str:
        return self[0]

    @property
    def terms(self) -> tuple[str, ...]:
        return self[1]

    def __str__(self):
        return f"({' '.join((self.predicate,) + self.terms)})"


@dataclass(frozen=True)
class Action:
    name: str
    parameters: tuple[tuple[str, str], ...]
    precondition: tuple[tuple[LiftedAtom, bool], ...]
    add: tuple[LiftedAtom, ...]
    delete: tuple[LiftedAtom, ...]


@dataclass(frozen=True)
class PddlDomain:
    name: str
    requirements: tuple[str, ...]
    types: tuple[str, ...]
    supertypes: tuple[tuple[str, str], ...]
    constants: tuple[tuple[str, str], ...]
    predicates: tuple[PredicateSignature, ...]
    actions: tuple[Action, ...]

    @cached_property
    def vocabulary(self) -> LiftedVocabulary:
        return LiftedVocabulary(self.types, self.predicates, self.supertypes)

    def action(self, name: str) -> Action:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    @cached_property
    def static_predicates(self) -> frozenset[str]:
        touched = {a.predicate for act in self.actions for a in act.add + act.delete}
        return frozenset(p.name for p in self.predicates if p.name not in touched)


def _literal(x, ctx: str) -> tuple[LiftedAtom, bool]:
    x = _expect_list(x, f"literal in {ctx}")
    if not x:
        raise ParseError(f"empty literal in {ctx}", *_loc(x))
    if x[0] == "not":
        if len(x) != 2:
            raise ParseError("'not' takes exactly one argument", *_loc(x))
        atom, pos = _literal(x[1], ctx)
        if not pos:
            raise ParseError("double negation is not supported", *_loc(x))
        return atom, False
    head = x[0]
    if isinstance(head, list) or head in ("and", "or", "imply", "forall", "exists", "when", "="):
        raise ParseError(f"unsupported construct {head!r} in {ctx}", *_loc(x))
    if any(isinstance(t, list) for t in x[1:]):
        raise ParseError(f"nested term in {ctx}", *_loc(x))
    return LiftedAtom(str(head), [str(t) for t in x[1:]]), True


def _conjunction(x, ctx: str) -> list[tuple[LiftedAtom, bool]]:
    x = _expect_list(x, ctx)
    if not x:
        return []
    if x[0] == "and":
        return [lit for item in x[1:] for lit in _conjunction(item, ctx)]
    return [_literal(x, ctx)]


def _parse_action(expr: SExpr, vocab_types: set[str]) -> Action:
    if len(expr) < 2 or isinstance(expr[1], list):
        raise ParseError("action needs a name", *_loc(expr))
    name = str(expr[1])
    fields: dict[str, object] = {}
    rest = expr[2:]
    for key, val in zip(rest[::2], rest[1::2]):
        if key not in (":parameters", ":precondition", ":effect"):
            raise ParseError(f"unsupported action field {key!r}", *_loc(key))
        fields[str(key)] = val
    if len(rest) % 2:
        raise ParseError(f"dangling field in action {name}", *_loc(rest[-1]))
    params = _typed_list(_expect_list(fields.get(":parameters", SExpr()), "parameter list"))
    for var, typ in params:
        if not var.startswith("?"):
            raise ParseError(f"parameter {var!r} of {name} must start with '?'", *_loc(var))
        if typ not in vocab_types:
            raise ParseError(f"parameter {var} of {name} has undeclared type {typ!r}", *_loc(var))
    pre = _conjunction(fields.get(":precondition", SExpr()), f"precondition of {name}")
    eff = _conjunction(fields.get(":effect", SExpr()), f"effect of {name}")
    return Action(
        name,
        tuple(params),
        tuple(pre),
        tuple(a for a, pos in eff if pos),
        tuple(a for a, pos in eff if not pos),
    )


def parse_domain(text: str) -> PddlDomain:
    """Parse a domain; raises :class:`ParseError` or :class:`UnsupportedRequirement`."""
    root = _parse_sexpr(text)
    if len(root) < 2 or root[0] != "define" or not isinstance(root[1], list) or root[1][:1] != ["domain"]:
        raise ParseError("expected (define (domain NAME) ...)", *_loc(root))
    name = str(root[1][1]) if len(root[1]) > 1 else ""
    requirements: list[str] = []
    types: list[tuple[str, str]] = []
    constants: list[tuple[str, str]] = []
    pred_exprs: list = []
    action_exprs: list = []
    for section in root[2:]:
        section = _expect_list(section, "domain section")
        head = section[0] if section else None
        if head == ":requirements":
            for r in section[1:]:
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedRequirement(str(r), *_loc(r))
                requirements.append(str(r))
        elif head == ":types":
            types.extend(_typed_list(section[1:]))
        elif head == ":constants":
            constants.extend(_typed_list(section[1:]))
        elif head == ":predicates":
            pred_exprs.extend(section[1:])
        elif head == ":action":
            action_exprs.append(section)
        else:
            raise ParseError(f"unsupported domain section {head!r}", *_loc(section))

    declared = {t for t, _ in types} | {p for _, p in types if p != "object"}
    parent_of = {t: p for t, p in types if p != "object"}
    preds = []
    for p in pred_exprs:
        p = _expect_list(p, "predicate declaration")
        if not p or isinstance(p[0], list):
            raise ParseError("malformed predicate declaration", *_loc(p))
        preds.append(PredicateSignature(str(p[0]), tuple(t for _, t in _typed_list(p[1:]))))
    by_name = {p.name: p for p in preds}
    actions = [_parse_action(a, declared | {"object"}) for a in action_exprs]

    used = {t for p in preds for t in p.arg_types} | {t for a in actions for _, t in a.parameters}
    used |= {t for _, t in constants}
    declared |= used
    if "object" in declared or not declared:
        declared.add("object")
        for t in declared - {"object"}:
            parent_of.setdefault(t, "object")
    parents = tuple(sorted(parent_of.items()))

    static_names = set(by_name)
    for act in actions:
        static_names -= {a.predicate for a in act.add + act.delete}
    preds = [PredicateSignature(p.name, p.arg_types, p.name in static_names) for p in preds]
    domain = PddlDomain(
        name,
        tuple(requirements),
        tuple(sorted(declared)),
        parents,
        tuple(constants),
        tuple(sorted(preds, key=lambda p: p.name)),
        tuple(actions),
    )
    _check_domain(domain)
    return domain


def _check_domain(domain: PddlDomain) -> None:
    vocab = domain.vocabulary
    consts = dict(domain.constants)
    for act in domain.actions:
        params = dict(act.parameters)
        atoms = [a for a, _ in act.precondition] + list(act.add) + list(act.delete)
        if any(not pos for _, pos in act.precondition) and ":negative-preconditions" not in domain.requirements:
            raise ParseError(f"action {act.name} uses negative preconditions without declaring them")
        for atom in atoms:
            sig = vocab.predicate(atom.predicate)
            if sig is None:
                raise TypedError("unknown-predicate", atom.predicate, f"{act.name}: unknown predicate {atom.predicate!r}")
            if len(atom.terms) != sig.arity:
                raise TypedError("arity-mismatch", atom.predicate, f"{act.name}: {atom} has wrong arity")
            for i, (term, want) in enumerate(zip(atom.terms, sig.arg_types)):
                have = params.get(term) if term.startswith("?") else consts.get(term)
                if have is None:
                    raise TypedError("unknown-object", term, f"{act.name}: undeclared term {term!r} in {atom}", i)
                if not vocab.is_subtype(have, want):
                    raise TypedError("type-mismatch", term, f"{act.name}: {term} is {have}, {atom.predicate} expects {want}", i)


# -- problems -----------------------------------------------------------------------


@dataclass(frozen=True)
class PddlProblem:
    name: str
    domain_name: str
    objects: ObjectSet
    init: SymbolicState
    goal: Goal


def parse_problem(text: str, vocab: LiftedVocabulary | PddlDomain) -> PddlProblem:
    """Parse a problem; objects, init and goal are type-checked against ``vocab``."""
    if isinstance(vocab, PddlDomain):
        consts = vocab.constants
        vocab = vocab.vocabulary
    else:
        consts = ()
    root = _parse_sexpr(text)
    if len(root) < 2 or root[0] != "define" or not isinstance(root[1], list) or root[1][:1] != ["problem"]:
        raise ParseError("expected (define (problem NAME) ...)", *_loc(root))
    name = str(root[1][1]) if len(root[1]) > 1 else ""
    domain_name = ""
    objects: list[tuple[str, str]] = list(consts)
    init: list[GroundAtom] = []
    goal: list[tuple[LiftedAtom, bool]] = []
    for section in root[2:]:
        section = _expect_list(section, "problem section")
        head = section[0] if section else None
        if head == ":domain":
            domain_name = str(section[1])
        elif head == ":objects":
            objects.extend(_typed_list(section[1:]))
        elif head == ":init":
            for lit in section[1:]:
                atom, pos = _literal(lit, ":init")
                if not pos:
                    raise ParseError("negative literal in :init", *_loc(lit))
                init.append(GroundAtom(atom.predicate, atom.terms))
        elif head == ":goal":
            if len(section) != 2:
                raise ParseError(":goal takes one formula", *_loc(section))
            goal = _conjunction(section[1], ":goal")
        elif head == ":requirements":
            for r in section[1:]:
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedRequirement(str(r), *_loc(r))
        else:
            raise ParseError(f"unsupported problem section {head!r}", *_loc(section))
    objs = ObjectSet.from_pairs(objects, vocab)
    return PddlProblem(
        name,
        domain_name,
        objs,
        SymbolicState(frozenset(init), objs),
        Goal(frozenset(Literal(GroundAtom(a.predicate, a.terms), pos) for a, pos in goal), objs),
    )


def _sexpr_atom(atom: GroundAtom) -> str:
    return f"({' '.join((atom.predicate,) + atom.args)})"


def emit_problem(
    name: str,
    vocab: LiftedVocabulary,
    objs: ObjectSet,
    init: SymbolicState,
    goal: Goal,
    domain: str = "domain",
) -> str:
    """Render a problem file; output is byte-stable for equal inputs."""
    if not goal.literals:
        raise ValueError("a PDDL problem needs a non-empty goal")
    for atom in init.atoms:
        check_atom(vocab, objs, atom)
    for lit in goal.literals:
        check_atom(vocab, objs, lit.atom)
    lines = [f"(define (problem {name})", f"  (:domain {domain})", "  (:objects"]
    for typ, names in objs.by_type.items():
        lines.append(f"    {' '.join(names)} - {typ}")
    lines[-1] += ")"
    lines.append("  (:init")
    init_atoms = sorted(init.atoms)
    for atom in init_atoms:
        lines.append(f"    {_sexpr_atom(atom)}")
    if init_atoms:
        lines[-1] += ")"
    else:
        lines[-1] = "  (:init)"
    lines.append("  (:goal (and")
    for lit in goal.sorted_literals():
        s = _sexpr_atom(lit.atom)
        lines.append(f"    {s if lit.positive else f'(not {s})'}")
    lines[-1] += ")))"
    return "\n".join(lines) + "\n"


# -- grounding and application --------------------------------------------------


@dataclass(frozen=True)
class GroundAction:
    label: ActionLabel
    pre_pos: frozenset[GroundAtom]
    pre_neg: frozenset[GroundAtom]
    add: frozenset[GroundAtom]
    delete: frozenset[GroundAtom] = field(default=frozenset())

    def __post_init__(self):
        object.__setattr__(self, "delete", frozenset(self.delete) - frozenset(self.add))


def ground_actions(
    domain: PddlDomain,
    objs: ObjectSet,
    distinct: bool = False,
    static_init: Iterable[GroundAtom] | None = None,
) -> list[GroundAction]:
    """All type-consistent bindings of every action, in deterministic order.

    ``distinct`` drops bindings that repeat an object. ``static_init`` enables
    pruning of groundings whose static preconditions are false there.
    """
    vocab = domain.vocabulary
    pool = list(objs.objects)
    statics = domain.static_predicates
    static_true = frozenset(static_init) if static_init is not None else None
    out = []
    for act in domain.actions:
        slots = [[o.name for o in pool if vocab.is_subtype(o.type, t)] for _, t in act.parameters]
        slots = [sorted(set(s) | {c for c, ct in domain.constants if vocab.is_subtype(ct, t)}) for s, (_, t) in zip(slots, act.parameters)]
        for binding in itertools.product(*slots):
            if distinct and len(set(binding)) != len(binding):
                continue
            env = dict(zip((v for v, _ in act.parameters), binding))

            def bind(a: LiftedAtom) -> GroundAtom:
                return GroundAtom(a.predicate, tuple(env.get(t, t) for t in a.terms))

            pos = frozenset(bind(a) for a, p in act.precondition if p)
            neg = frozenset(bind(a) for a, p in act.precondition if not p)
            if static_true is not None and any(a.predicate in statics and a not in static_true for a in pos):
                continue
            for atom in itertools.chain(pos, neg, map(bind, act.add), map(bind, act.delete)):
                check_atom(objs.vocab, objs, atom)
            out.append(
                GroundAction(
                    ActionLabel(act.name, tuple(binding)),
                    pos,
                    neg,
                    frozenset(bind(a) for a in act.add),
                    frozenset(bind(a) for a in act.delete),
                )
            )
    out.sort(key=lambda ga: str(ga.label))
    return out


def applicable(state: SymbolicState, ga: GroundAction) -> bool:
    return ga.pre_pos <= state.atoms and not (ga.pre_neg & state.atoms)


def apply(state: SymbolicState, ga: GroundAction) -> SymbolicState:
    """Successor under STRIPS semantics; raises :class:`InapplicableAction`."""
    if not applicable(state, ga):
        raise InapplicableAction(f"{ga.label} is not applicable")
    return SymbolicState.trusted((state.atoms - ga.delete) | ga.add, state.objects)


def model_successors(actions: Sequence[GroundAction]):
    """Successor function induced by a list of ground actions."""

    def successors(state: SymbolicState) -> list[tuple[ActionLabel, SymbolicState]]:
        return [(ga.label, apply(state, ga)) for ga in actions if applicable(state, ga)]

    return successors


def plan_with_model(domain: PddlDomain, problem: PddlProblem, budget: SearchBudget | None = None) -> PlanResult:
    """A* (f = g + goal count) over the successor function induced by the domain."""
    vocab = domain.vocabulary
    for atom in problem.init.atoms:
        check_atom(vocab, problem.objects, atom)
    for lit in problem.goal.literals:
        check_atom(vocab, problem.objects, lit.atom)
    actions = ground_actions(domain, problem.objects, static_init=problem.init.atoms)
    return astar(problem.init, problem.goal, model_successors(actions), budget)
