"""Command-line interface.

Exit codes: 0 success, 1 search exhausted without a plan, 2 input error,
3 environment or transport failure, 4 search budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import tomli

from . import __version__
from .errors import (
    MissingCredentials,
    ParseError,
    SymbolizerError,
    TransportError,
    UnsupportedSize,
    VocabularyError,
)
from .eval import (
    PlanningConfig,
    evaluate_grounding,
    evaluate_planning,
    mock_factory,
    noise_sweep,
    sweep_csv,
)
from .grounder import ChatClient, GrounderConfig, MockGrounder, VLMGrounder, bundled_examples, load_examples
from .pddl import emit_problem, parse_domain, parse_problem, plan_with_model
from .planner import BUDGET, EXHAUSTED, SearchBudget, bfs_oracle, plan
from .schema import STAGES, compile_lifted_schema, compile_schema, encode_goal, encode_objects, encode_state
from .simulator import (
    DOMAINS,
    Instance,
    bundled_suite,
    bundled_text,
    get_simulator,
    load_dataset,
    load_vocabulary,
    make_instance,
    write_dataset,
)
from .vocabulary import Goal, LiftedVocabulary, SymbolicState

log = logging.getLogger("symbolizer")

EXIT_OK, EXIT_UNSOLVED, EXIT_INPUT, EXIT_ENV, EXIT_BUDGET = 0, 1, 2, 3, 4


class InputError(Exception):
    """Bad user input detected by the CLI itself."""


@dataclass
class RunConfig:
    grounder: GrounderConfig = field(default_factory=GrounderConfig)
    vocabulary: str | None = None
    examples: dict[str, str] = field(default_factory=dict)
    domains: dict[str, str] = field(default_factory=dict)
    max_expansions: int = 100_000
    max_seconds: float = 60.0
    max_plan_length: int = 10_000
    tiebreak: str = "novelty"
    pairs: bool = False
    output_dir: str = "out"
    seed: int | None = None
    jobs: int = 1

    @property
    def budget(self) -> SearchBudget:
        return SearchBudget(self.max_expansions, self.max_seconds, self.max_plan_length)


_GROUNDER_KEYS = {f.name for f in fields(GrounderConfig)}


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a flat TOML document; ``[examples]`` and ``[domains]`` map domain names to files.

    Relative paths resolve against the config file's directory and must exist.
    """
    doc: dict = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            doc = tomli.loads(path.read_text(encoding="utf-8"))
        except tomli.TOMLDecodeError as exc:
            raise InputError(f"{path}: {exc}") from exc
        base = path.parent
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    gkw = {k: doc.pop(k) for k in list(doc) if k in _GROUNDER_KEYS and k != "seed"}
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")

    def resolve(p: str) -> str:
        full = Path(p) if Path(p).is_absolute() else base / p
        if not full.exists():
            raise InputError(f"referenced path does not exist: {full}")
        return str(full)

    for key in ("examples", "domains"):
        doc[key] = {k: resolve(v) for k, v in doc.get(key, {}).items()}
    if doc.get("vocabulary") and doc["vocabulary"].endswith(".json"):
        doc["vocabulary"] = resolve(doc["vocabulary"])
    if gkw.get("cache_dir"):
        gkw["cache_dir"] = str(base / gkw["cache_dir"])
    seed = doc.get("seed")
    cfg = RunConfig(**doc)
    cfg.grounder = GrounderConfig(**gkw, seed=seed if seed is not None else 0)
    return cfg


def _vocab(ref: str) -> LiftedVocabulary:
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        if not path.is_file():
            raise InputError(f"vocabulary file not found: {path}")
        return LiftedVocabulary.load(path)
    return load_vocabulary(ref)


def _load_instance(path: str) -> Instance:
    if not Path(path).is_file():
        raise InputError(f"instance file not found: {path}")
    return Instance.load(path)


def _examples_for(cfg: RunConfig):
    cache: dict = {}

    def source(domain: str, stage: str) -> list:
        key = (domain, stage)
        if key not in cache:
            path = cfg.examples.get(domain)
            cache[key] = load_examples(path, stage)[:10] if path else bundled_examples(domain, stage)
        return cache[key]

    return source


def _need_seed(cfg: RunConfig) -> None:
    if cfg.seed is None:
        raise InputError("mock runs need a seed (--seed or 'seed' in the config)")


def _live_client(cfg: RunConfig) -> ChatClient:
    return ChatClient.from_config(cfg.grounder)


# -- subcommands -------------------------------------------------------------------------


def cmd_schema(args) -> int:
    vocab = _vocab(args.vocab)
    objs = _load_instance(args.instance).objects if args.instance else None
    if args.stage not in ("all", "objects") and objs is None:
        raise InputError(f"--stage {args.stage} needs --instance to supply the object set")
    if args.stage != "all":
        docs = [compile_schema(args.stage, vocab, objs)]
    elif objs is None:
        # no objects yet: argument slots fall back to the name pattern
        docs = [compile_lifted_schema(s, vocab) for s in ("objects", "predicates", "goal")]
    else:
        docs = [compile_schema(s, vocab, objs) for s in STAGES]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        target = out / f"{doc.stage}.schema.json"
        target.write_text(doc.render(), encoding="utf-8")
        print(target)
    return EXIT_OK


def _grounder_for(inst: Instance, cfg: RunConfig, live: bool):
    if live:
        return VLMGrounder(_live_client(cfg))
    _need_seed(cfg)
    return MockGrounder(inst, cfg.grounder)


def cmd_ground(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "epsilon": args.epsilon, "spurious": args.spurious})
    inst = _load_instance(args.instance)
    grounder = _grounder_for(inst, cfg, args.live)
    examples = _examples_for(cfg)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    obs = inst.observation
    if obs is None:
        raise InputError(f"instance {inst.id} carries no observation")
    objs = grounder.ground_objects(obs, inst.vocab, examples(inst.domain, "objects"))
    state = grounder.ground_state(obs, inst.vocab, objs, examples(inst.domain, "predicates"))
    goal = grounder.ground_goal(inst.goal_text, inst.vocab, objs, examples(inst.domain, "goal"))
    for name, doc in (("objects", encode_objects(objs)), ("state", encode_state(state)), ("goal", encode_goal(goal))):
        (out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    calls = getattr(getattr(grounder, "client", None), "network_calls", 0)
    hits = getattr(getattr(grounder, "client", None), "cache_hits", 0)
    lines = [
        f"instance: {inst.id}",
        f"mode: {'live' if args.live else 'mock'}",
        f"objects: {len(objs)}",
        f"atoms: {len(state)}",
        f"goal literals: {len(goal)}",
        f"network calls: {calls}",
        f"cache hits: {hits}",
    ]
    (out / "ground.log").write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("network calls: %d, cache hits: %d", calls, hits)
    print("\n".join(lines))
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = load_config(
        args.config,
        {
            "seed": args.seed,
            "max_expansions": args.max_expansions,
            "max_seconds": args.max_seconds,
            "tiebreak": args.tiebreak,
            "pairs": args.pairs or None,
        },
    )
    inst = _load_instance(args.instance)
    sim = get_simulator(inst.domain)
    if args.grounding == "gt":
        init, goal = inst.init, inst.goal
    else:
        g = _grounder_for(inst, cfg, args.grounding == "live")
        ex = _examples_for(cfg)
        objs = g.ground_objects(inst.observation, inst.vocab, ex(inst.domain, "objects"))
        init = g.ground_state(inst.observation, inst.vocab, objs, ex(inst.domain, "predicates"))
        goal = g.ground_goal(inst.goal_text, inst.vocab, objs, ex(inst.domain, "goal"))
        init, goal = SymbolicState(init.atoms, inst.objects), Goal(goal.literals, inst.objects)
    if args.mode == "model-free":
        result = plan(init, goal, sim.successors, cfg.budget, cfg.tiebreak, cfg.pairs)
    elif args.mode == "bfs":
        result = bfs_oracle(init, goal, sim.successors, cfg.budget)
    else:
        path = cfg.domains.get(inst.domain)
        domain = parse_domain(Path(path).read_text() if path else bundled_text(f"{sim.vocab_name}.pddl"))
        problem = parse_problem(emit_problem(inst.id, domain.vocabulary, init.objects, init, goal, domain.name), domain)
        result = plan_with_model(domain, problem, cfg.budget)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / f"{inst.id}.plan"
    out.parent.mkdir(parents=True, exist_ok=True)
    result.write(out)
    print(f"{result.outcome}: {len(result.plan)} steps, {result.stats.expansions} expansions -> {out}")
    if result.outcome == BUDGET:
        return EXIT_BUDGET
    if result.outcome == EXHAUSTED:
        return EXIT_UNSOLVED
    return EXIT_OK


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad epsilon list {text!r}") from exc


def cmd_eval(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "epsilon": args.epsilon, "jobs": args.jobs})
    if not Path(args.dataset).is_file():
        raise InputError(f"dataset not found: {args.dataset}")
    dataset = load_dataset(args.dataset)
    if not dataset:
        raise InputError(f"dataset {args.dataset} is empty")
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    examples = _examples_for(cfg)
    written: list[Path] = []
    if args.sweep:
        _need_seed(cfg)
        rows = noise_sweep(dataset, _parse_floats(args.sweep), seed=cfg.seed, spurious=cfg.grounder.spurious, jobs=cfg.jobs)
        (out / "sweep.csv").write_text(sweep_csv(rows), encoding="utf-8")
        written.append(out / "sweep.csv")
        if not args.no_figures:
            from .plotting import plot_sweep

            written.append(plot_sweep(rows, out / "sweep.png"))
    elif args.mode == "grounding":
        if args.live:
            client = _live_client(cfg)
            factory = lambda inst: VLMGrounder(client)  # noqa: E731
        else:
            _need_seed(cfg)
            factory = mock_factory(cfg.grounder)
        report = evaluate_grounding(dataset, factory, chain=not args.no_chain, examples=examples, jobs=cfg.jobs)
        written += report.write(out)
        if not args.no_figures:
            from .plotting import plot_grounding

            written.append(plot_grounding(report, out / "grounding.png"))
        print(report.to_markdown(), end="")
    else:
        pcfg = PlanningConfig(cfg.budget, cfg.tiebreak, cfg.pairs, cfg.domains)
        if args.live:
            client = _live_client(cfg)
            factory = lambda inst: VLMGrounder(client)  # noqa: E731
            pcfg.direct_client_factory = lambda inst: client
            from .planner import VLMHeuristic

            pcfg.heuristic_factory = lambda inst: VLMHeuristic(client)
        else:
            if args.mode == "direct-vlm":
                raise InputError("direct-vlm evaluation needs --live")
            _need_seed(cfg)
            factory = mock_factory(cfg.grounder)
            if args.mode == "vlm-heuristic":
                from .planner import OracleDistanceHeuristic

                pcfg.heuristic_factory = lambda inst: OracleDistanceHeuristic(get_simulator(inst.domain).successors, seed=cfg.seed)
        report = evaluate_planning(dataset, args.mode, factory, pcfg, examples, jobs=cfg.jobs)
        written += report.write(out, f"planning-{args.mode}")
        if not args.no_figures:
            from .plotting import plot_planning

            written.append(plot_planning(report, out / f"planning-{args.mode}.png"))
        print(report.to_markdown(), end="")
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


def _parse_sizes(text: str) -> list[int]:
    try:
        if "-" in text:
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad size spec {text!r}") from exc


def cmd_make_instances(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.suite:
        insts = bundled_suite(seed)
    else:
        if not args.domain:
            raise InputError("--domain is required unless --suite is given")
        insts = []
        for n in _parse_sizes(args.sizes):
            for k in range(args.count):
                insts.append(make_instance(args.domain, n, seed + k, args.scramble, args.tower))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.split:
        out.mkdir(parents=True, exist_ok=True)
        for inst in insts:
            (out / f"{inst.id}.json").write_text(json.dumps(inst.to_dict(), indent=2) + "\n", encoding="utf-8")
    else:
        write_dataset(insts, out)
    print(f"wrote {len(insts)} instances to {out}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="symbolizer", description="Ground symbolic states with VLMs and plan over them.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("schema", help="compile structured-output schemas from a vocabulary")
    s.add_argument("vocab", help="vocabulary JSON file or bundled name")
    s.add_argument("--instance", help="instance file supplying the object set")
    s.add_argument("--stage", choices=["all", *STAGES], default="all")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_schema)

    def grounding_flags(q):
        q.add_argument("--config")
        q.add_argument("--seed", type=int)
        q.add_argument("--live", action="store_true", help=f"call the endpoint (needs ${'SYMBOLIZER_API_KEY'})")
        q.add_argument("--mock", dest="live", action="store_false", help="use the seeded mock grounder (default)")

    g = sub.add_parser("ground", help="ground objects, state and goal for one instance")
    g.add_argument("--instance", required=True)
    grounding_flags(g)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--spurious", type=int)
    g.add_argument("--out")
    g.set_defaults(func=cmd_ground)

    pl = sub.add_parser("plan", help="plan for one instance")
    pl.add_argument("--instance", required=True)
    pl.add_argument("--mode", choices=["model-free", "with-model", "bfs"], default="model-free")
    pl.add_argument("--grounding", choices=["gt", "mock", "live"], default="gt")
    pl.add_argument("--config")
    pl.add_argument("--seed", type=int)
    pl.add_argument("--max-expansions", type=int)
    pl.add_argument("--max-seconds", type=float)
    pl.add_argument("--tiebreak", choices=["novelty", "fifo"])
    pl.add_argument("--pairs", action="store_true", help="track atom pairs for novelty")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plan)

    e = sub.add_parser("eval", help="score grounding or planning over a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--mode", choices=["grounding", "model-free", "with-model", "direct-vlm", "vlm-heuristic"], default="grounding")
    grounding_flags(e)
    e.add_argument("--epsilon", type=float)
    e.add_argument("--sweep", help="comma-separated drop probabilities for a mock noise sweep")
    e.add_argument("--no-chain", action="store_true", help="feed ground-truth objects to later stages")
    e.add_argument("--jobs", type=int)
    e.add_argument("--no-figures", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("make-instances", help="generate simulator instances as JSON lines")
    m.add_argument("--domain", choices=sorted(DOMAINS))
    m.add_argument("--sizes", default="3")
    m.add_argument("--count", type=int, default=1)
    m.add_argument("--seed", type=int)
    m.add_argument("--scramble", type=int)
    m.add_argument("--tower", action="store_true")
    m.add_argument("--suite", action="store_true", help="the bundled evaluation suite")
    m.add_argument("--split", action="store_true", help="write one JSON file per instance into --out")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_make_instances)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MissingCredentials, TransportError) as exc:
        print(f"symbolizer: {exc}", file=sys.stderr)
        return EXIT_ENV
    except (InputError, VocabularyError, ParseError, UnsupportedSize, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"symbolizer: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SymbolizerError as exc:
        print(f"symbolizer: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
