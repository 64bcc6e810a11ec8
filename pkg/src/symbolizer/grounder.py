"""Grounding observations into objects, states and goals.

:class:`VLMGrounder` talks to an OpenAI-compatible chat-completions endpoint,
passing the compiled schema as the response format. Prompts are a short fixed
instruction followed by in-context examples and the query. :class:`MockGrounder`
is a seeded, offline stand-in that perturbs simulator ground truth.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import random
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import EmptyResult, InapplicableAction, MissingCredentials, TransportError, VocabularyError
from .schema import (
    SchemaDoc,
    compile_goal_schema,
    compile_object_schema,
    compile_predicate_schema,
    compile_successor_schema,
    encode_state,
    validate_and_decode,
)
from .simulator import ActionLabel, Instance, Simulator, get_simulator
from .vocabulary import (
    GroundAtom,
    Goal,
    LiftedVocabulary,
    Literal,
    ObjectSet,
    Observation,
    SymbolicState,
    ground_atom_universe,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "SYMBOLIZER_API_KEY"
MAX_EXAMPLES = 10
DEFAULT_EXAMPLES = 3

SYSTEM_TEXT = {
    "objects": "Follow the examples. List the relevant objects in the input.",
    "predicates": "Follow the examples. List the predicates that hold in the input.",
    "goal": "Follow the examples. List the predicates the goal requires.",
    "successor": "Follow the examples. List the predicates that hold after the action.",
}


@dataclass(frozen=True)
class GrounderConfig:
    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-mini"
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    cache_dir: str | None = None
    epsilon: float = 0.0
    spurious: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.spurious < 0 or self.max_retries < 0:
            raise ValueError("spurious count and retries must be non-negative")


# -- prompts ----------------------------------------------------------------------


@dataclass(frozen=True)
class InContextExample:
    """One demonstration: an observation (or state plus action) and its JSON answer."""

    stage: str
    input: Observation | tuple[dict, str]
    output: dict

    def user_content(self) -> list[dict]:
        return _content(self.input)

    def assistant_text(self) -> str:
        return json.dumps(self.output, separators=(",", ":"))

    def fingerprint(self) -> str:
        if isinstance(self.input, Observation):
            inp = self.input.digest()
        else:
            inp = json.dumps(self.input, sort_keys=True)
        return hashlib.sha256((self.stage + inp + self.assistant_text()).encode()).hexdigest()


def _content(query: Observation | tuple[dict, str]) -> list[dict]:
    if isinstance(query, Observation):
        if query.kind == "text":
            return [{"type": "text", "text": query.text}]
        url = f"data:{query.media_type};base64,{base64.b64encode(query.image).decode()}"  # type: ignore[arg-type]
        return [{"type": "image_url", "image_url": {"url": url}}]
    state, action = query
    return [{"type": "text", "text": json.dumps({"state": state, "action": action}, separators=(",", ":"))}]


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    examples: tuple[InContextExample, ...]
    query: Observation | tuple[dict, str]
    schema: SchemaDoc

    def __post_init__(self):
        if len(self.examples) > MAX_EXAMPLES:
            raise ValueError(f"at most {MAX_EXAMPLES} in-context examples, got {len(self.examples)}")
        for ex in self.examples:
            if ex.stage != self.schema.stage:
                raise ValueError(f"example for stage {ex.stage!r} in a {self.schema.stage!r} prompt")

    def messages(self) -> list[dict]:
        msgs: list[dict] = [{"role": "system", "content": self.system_text}]
        for ex in self.examples:
            msgs.append({"role": "user", "content": ex.user_content()})
            msgs.append({"role": "assistant", "content": ex.assistant_text()})
        msgs.append({"role": "user", "content": _content(self.query)})
        return msgs

    def cache_key(self, model: str) -> str:
        h = hashlib.sha256()
        for part in (
            self.system_text,
            *(ex.fingerprint() for ex in self.examples),
            _query_digest(self.query),
            self.schema.render(),
            model,
        ):
            h.update(part.encode())
            h.update(b"\0")
        return h.hexdigest()


def _query_digest(query) -> str:
    if isinstance(query, Observation):
        return query.digest()
    return json.dumps(query, sort_keys=True)


def load_examples(path: str | Path, stage: str | None = None) -> list[InContextExample]:
    """Read a JSON-lines example file.

    Each line carries ``stage``, ``output`` and an input given as ``text``,
    ``image`` (path relative to the file) or ``state`` plus ``action``.
    """
    path = Path(path)
    out = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        doc = json.loads(line)
        if stage is not None and doc["stage"] != stage:
            continue
        if "text" in doc:
            inp: Observation | tuple[dict, str] = Observation.from_text(doc["text"])
        elif "image" in doc:
            inp = Observation.from_image(path.parent / doc["image"])
        elif "state" in doc:
            inp = (doc["state"], doc["action"])
        else:
            raise VocabularyError(f"{path}:{n}: example has no input")
        out.append(InContextExample(doc["stage"], inp, doc["output"]))
    return out


def validate_example(ex: InContextExample, vocab: LiftedVocabulary, objects: ObjectSet | None = None) -> None:
    """Check an example's answer against its stage schema."""
    if ex.stage == "objects":
        validate_and_decode(compile_object_schema(vocab), ex.output)
        return
    if objects is None:
        raise ValueError("atom-stage examples are validated against an object set")
    compile = {"predicates": compile_predicate_schema, "goal": compile_goal_schema, "successor": compile_successor_schema}
    validate_and_decode(compile[ex.stage](vocab, objects), ex.output)


def bundled_examples(domain: str, stage: str, k: int = DEFAULT_EXAMPLES) -> list[InContextExample]:
    ref = resources.files("symbolizer.data").joinpath("examples").joinpath(f"{domain}.jsonl")
    if not ref.is_file():
        return []
    with resources.as_file(ref) as path:
        return load_examples(path, stage)[:k]


# -- transport ----------------------------------------------------------------------

Transport = Callable[[str, dict, dict, float], dict]


def _httpx_transport(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    import httpx

    try:
        resp = httpx.post(url, headers=headers, json=payload, timeout=timeout)
    except httpx.HTTPError as exc:
        raise TransportError(f"request to {url} failed: {exc}") from exc
    if resp.status_code >= 500 or resp.status_code == 429:
        raise TransportError(f"{url} answered {resp.status_code}")
    if resp.status_code >= 400:
        raise TransportError(f"{url} rejected the request ({resp.status_code}): {resp.text[:200]}")
    return resp.json()


class ChatClient:
    """Minimal OpenAI-compatible chat-completions client with an on-disk response cache."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 2,
        temperature: float = 0.0,
        cache_dir: str | Path | None = None,
        transport: Transport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.temperature = temperature
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.transport = transport or _httpx_transport
        self.network_calls = 0
        self.cache_hits = 0

    @classmethod
    def from_config(cls, cfg: GrounderConfig, transport: Transport | None = None) -> "ChatClient":
        key = os.environ.get(API_KEY_ENV)
        if not key and transport is None:
            raise MissingCredentials(f"live grounding needs the {API_KEY_ENV} environment variable")
        return cls(cfg.endpoint, cfg.model, key, cfg.timeout, cfg.max_retries, cfg.temperature, cfg.cache_dir, transport)

    def _cache_path(self, key: str) -> Path | None:
        return self.cache_dir / f"{key}.txt" if self.cache_dir else None

    def _store(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)

    def complete(self, messages: list[dict], response_format: dict | None = None, cache_key: str | None = None) -> str:
        payload: dict = {"model": self.model, "messages": messages, "temperature": self.temperature}
        if response_format is not None:
            payload["response_format"] = response_format
        if cache_key is None:
            cache_key = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
        path = self._cache_path(cache_key)
        if path is not None and path.is_file():
            self.cache_hits += 1
            log.debug("cache hit %s", cache_key[:12])
            return path.read_text(encoding="utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.endpoint}/chat/completions"
        for attempt in range(self.max_retries + 1):
            try:
                self.network_calls += 1
                body = self.transport(url, headers, payload, self.timeout)
                break
            except TransportError:
                if attempt == self.max_retries:
                    raise
                log.warning("transport error, retry %d/%d", attempt + 1, self.max_retries)
                time.sleep(min(2.0**attempt, 8.0) * 0.1)
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat-completions response: {exc}") from exc
        if text is None:
            raise TransportError("response carried no content")
        if path is not None:
            self._store(path, text)
        return text


# -- grounders ----------------------------------------------------------------------


def _objects_in(state: SymbolicState, action: ActionLabel | None = None) -> ObjectSet:
    names = {n for a in state.atoms for n in a.args}
    if action is not None:
        names.update(action.args)
    return state.objects.restrict(names)


def _nonempty(value, what: str):
    if len(value) == 0:
        raise EmptyResult(f"grounder returned no {what}")
    return value


class VLMGrounder:
    """Single-pass grounding through a chat endpoint; no planner-feedback retries."""

    def __init__(self, client: ChatClient):
        self.client = client

    def _ask(self, schema: SchemaDoc, query, examples: Sequence[InContextExample]):
        bundle = PromptBundle(SYSTEM_TEXT[schema.stage], tuple(examples), query, schema)
        raw = self.client.complete(bundle.messages(), schema.response_format(), bundle.cache_key(self.client.model))
        return validate_and_decode(schema, raw)

    def ground_objects(self, obs: Observation, vocab: LiftedVocabulary, examples: Sequence[InContextExample] = ()) -> ObjectSet:
        return _nonempty(self._ask(compile_object_schema(vocab), obs, examples), "objects")

    def ground_state(
        self, obs: Observation, vocab: LiftedVocabulary, objs: ObjectSet, examples: Sequence[InContextExample] = ()
    ) -> SymbolicState:
        return _nonempty(self._ask(compile_predicate_schema(vocab, objs), obs, examples), "atoms")

    def ground_goal(
        self, obs: Observation | str, vocab: LiftedVocabulary, objs: ObjectSet, examples: Sequence[InContextExample] = ()
    ) -> Goal:
        if isinstance(obs, str):
            if not obs.strip():
                raise EmptyResult("empty goal text")
            obs = Observation.from_text(obs)
        return _nonempty(self._ask(compile_goal_schema(vocab, objs), obs, examples), "goal literals")

    def predict_successor(
        self,
        state: SymbolicState,
        action: ActionLabel,
        vocab: LiftedVocabulary,
        examples: Sequence[InContextExample] = (),
    ) -> SymbolicState:
        objs = _objects_in(state, action)
        schema = compile_successor_schema(vocab, objs)
        nxt = self._ask(schema, (encode_state(state), str(action)), examples)
        return SymbolicState(_nonempty(nxt, "atoms").atoms, state.objects)


def mock_ground(
    gt: ObjectSet | SymbolicState | Goal,
    cfg: GrounderConfig,
    rng: random.Random | None = None,
    universe: Iterable[GroundAtom] | None = None,
):
    """Perturb ground truth: drop each element with probability ``epsilon``,
    then add ``spurious`` atoms drawn without replacement from ``universe``
    (default: every well-typed atom over the object set) minus the truth.
    """
    rng = rng or random.Random(cfg.seed)
    eps = cfg.epsilon
    if isinstance(gt, ObjectSet):
        kept = tuple(o for o in gt.objects if rng.random() >= eps)
        return ObjectSet(kept, gt.vocab)
    objs = gt.objects
    if universe is None:
        universe = ground_atom_universe(objs.vocab, objs)
    if isinstance(gt, Goal):
        lits = [l for l in gt.sorted_literals() if rng.random() >= eps]
        taken = {l.atom for l in gt.literals}
        pool = sorted(set(universe) - taken)
        extra = rng.sample(pool, min(cfg.spurious, len(pool)))
        return Goal(frozenset(lits) | {Literal(a) for a in extra}, objs)
    kept_atoms = [a for a in sorted(gt.atoms) if rng.random() >= eps]
    pool = sorted(set(universe) - gt.atoms)
    extra = rng.sample(pool, min(cfg.spurious, len(pool)))
    return SymbolicState(frozenset(kept_atoms) | frozenset(extra), objs)


class MockGrounder:
    """Offline grounder over one instance's ground truth.

    The observation argument is ignored; every stage draws from its own RNG
    stream keyed by ``(seed, instance id, stage)``, so results do not depend
    on call order.
    """

    def __init__(self, instance: Instance, cfg: GrounderConfig | None = None, simulator: Simulator | None = None):
        self.instance = instance
        self.cfg = cfg or GrounderConfig()
        self.simulator = simulator

    def _rng(self, stage: str) -> random.Random:
        return random.Random(f"{self.cfg.seed}:{self.instance.id}:{stage}")

    def ground_objects(self, obs=None, vocab=None, examples=()) -> ObjectSet:
        return _nonempty(mock_ground(self.instance.objects, self.cfg, self._rng("objects")), "objects")

    def ground_state(self, obs=None, vocab=None, objs: ObjectSet | None = None, examples=()) -> SymbolicState:
        objs = objs if objs is not None else self.instance.objects
        gt = _project(self.instance.init.atoms, objs)
        return _nonempty(mock_ground(SymbolicState(gt, objs), self.cfg, self._rng("predicates")), "atoms")

    def ground_goal(self, obs=None, vocab=None, objs: ObjectSet | None = None, examples=()) -> Goal:
        if isinstance(obs, str) and not obs.strip():
            raise EmptyResult("empty goal text")
        objs = objs if objs is not None else self.instance.objects
        keep = _project({l.atom for l in self.instance.goal.literals}, objs)
        gt = Goal(frozenset(l for l in self.instance.goal.literals if l.atom in keep), objs)
        return _nonempty(mock_ground(gt, self.cfg, self._rng("goal")), "goal literals")

    def predict_successor(self, state: SymbolicState, action: ActionLabel, vocab=None, examples=()) -> SymbolicState:
        sim = self.simulator or get_simulator(self.instance.domain)
        for label, nxt in sim.successors(state):
            if str(label) == str(action):
                return nxt
        raise InapplicableAction(f"no successor for {action}")


def _project(atoms: Iterable[GroundAtom], objs: ObjectSet) -> frozenset[GroundAtom]:
    """Atoms whose arguments all survive in ``objs`` with admissible types."""
    out = set()
    for a in atoms:
        sig = objs.vocab.predicate(a.predicate)
        if sig is None:
            continue
        if all(objs.type_of(x) is not None and objs.vocab.is_subtype(objs.type_of(x), t) for x, t in zip(a.args, sig.arg_types)):
            out.add(a)
    return frozenset(out)
