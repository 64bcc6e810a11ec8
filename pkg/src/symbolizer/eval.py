"""Grounding and planning evaluation.

Grounding is scored per instance and per stage by set precision/recall/F1,
then macro-averaged. Planning is scored by success rate, where a plan only
counts once it replays to the goal on the ground-truth initial state.
"""

from __future__ import annotations

import csv
import io
import statistics
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import (
    ContradictionError,
    DuplicateNameError,
    EmptyResult,
    InapplicableAction,
    InconsistentState,
    MissingCredentials,
    ParseError,
    SchemaViolation,
    SymbolizerError,
    TransportError,
    TypedError,
)
from .grounder import GrounderConfig, MockGrounder, bundled_examples
from .pddl import emit_problem, parse_domain, parse_problem, plan_with_model
from .planner import SearchBudget, direct_vlm_plan, plan
from .simulator import Instance, bundled_text, get_simulator, replay
from .vocabulary import Goal, ObjectSet, Observation, SymbolicState, goal_satisfied

STAGES = ("objects", "predicates", "goal")
MODES = ("model-free", "with-model", "direct-vlm", "vlm-heuristic")
FAILURES = ("schema-violation", "empty-result", "transport", "unsolved", "replay-failure")

InstanceRecord = Instance
GrounderFactory = Callable[[Instance], object]
ExampleSource = Callable[[str, str], list]


def set_f1(predicted: Iterable, truth: Iterable) -> tuple[float, float, float]:
    """Precision, recall and F1 of ``predicted`` against ``truth``.

    Empty against empty scores (1, 1, 1). An empty side facing a non-empty
    one scores 0 on that side's ratio; F1 is 0 when both ratios are 0.
    """
    pred, gt = set(predicted), set(truth)
    if not pred and not gt:
        return 1.0, 1.0, 1.0
    hit = len(pred & gt)
    precision = hit / len(pred) if pred else 0.0
    recall = hit / len(gt) if gt else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def failure_kind(exc: BaseException) -> str:
    if isinstance(exc, EmptyResult):
        return "empty-result"
    if isinstance(exc, (TransportError, MissingCredentials)):
        return "transport"
    if isinstance(exc, (SchemaViolation, ParseError, TypedError, DuplicateNameError, ContradictionError)):
        return "schema-violation"
    return "unsolved"


def _elements(value, stage: str) -> set:
    if value is None:
        return set()
    if stage == "objects":
        return {(o.name, o.type) for o in value}
    if stage == "goal":
        return set(value.literals)
    return set(value.atoms)


def mock_factory(cfg: GrounderConfig) -> GrounderFactory:
    return lambda inst: MockGrounder(inst, cfg)


def default_examples(domain: str, stage: str) -> list:
    return bundled_examples(domain, stage)


# -- reports ------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return "" if x is None else str(x)


@dataclass
class ScoreReport:
    """Per-instance rows plus aggregate views.

    Grounding rows carry ``stage/precision/recall/f1``; planning rows carry
    ``mode/outcome/solved``. Both carry ``failure`` ("" on success).
    """

    kind: str
    rows: list[dict] = field(default_factory=list)

    @property
    def failures(self) -> Counter:
        c = Counter({k: 0 for k in FAILURES})
        c.update(r["failure"] for r in self.rows if r["failure"])
        return c

    @property
    def domains(self) -> list[str]:
        return sorted({r["domain"] for r in self.rows})

    def mean(self, metric: str, stage: str | None = None, domain: str | None = None) -> float:
        vals = [
            r[metric]
            for r in self.rows
            if (stage is None or r.get("stage") == stage) and (domain is None or r["domain"] == domain)
        ]
        return statistics.fmean(vals) if vals else float("nan")

    @property
    def success_rate(self) -> float:
        if not self.rows:
            return float("nan")
        return sum(1 for r in self.rows if r["solved"]) / len(self.rows)

    def domain_success(self, domain: str) -> float:
        rows = [r for r in self.rows if r["domain"] == domain]
        return sum(1 for r in rows if r["solved"]) / len(rows) if rows else float("nan")

    def columns(self) -> list[str]:
        if self.kind == "grounding":
            return ["id", "domain", "stage", "precision", "recall", "f1", "n_pred", "n_truth", "name_mismatches", "failure"]
        return ["id", "domain", "mode", "outcome", "solved", "plan_length", "expansions", "generated", "failure_step", "failure"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = []
        if self.kind == "grounding":
            stages = [s for s in STAGES if any(r["stage"] == s for r in self.rows)]
            lines.append("| Domain | " + " | ".join(f"{s.capitalize()} F1" for s in stages) + " |")
            lines.append("|---|" + "---:|" * len(stages))
            for d in self.domains + ["all"]:
                dom = None if d == "all" else d
                cells = [f"{self.mean('f1', s, dom):.3f}" for s in stages]
                lines.append(f"| {d} | " + " | ".join(cells) + " |")
        else:
            modes = sorted({r["mode"] for r in self.rows})
            lines.append("| Domain | " + " | ".join(modes) + " |")
            lines.append("|---|" + "---:|" * len(modes))
            for d in self.domains + ["all"]:
                cells = []
                for m in modes:
                    rows = [r for r in self.rows if r["mode"] == m and (d == "all" or r["domain"] == d)]
                    cells.append(f"{sum(r['solved'] for r in rows) / len(rows):.2f}" if rows else "-")
                lines.append(f"| {d} | " + " | ".join(cells) + " |")
        lines.append("")
        lines.append("Failures: " + ", ".join(f"{k}={v}" for k, v in sorted(self.failures.items())))
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path, stem: str | None = None) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.kind
        paths = [out / f"{stem}.csv", out / f"{stem}.md"]
        paths[0].write_text(self.to_csv(), encoding="utf-8")
        paths[1].write_text(self.to_markdown(), encoding="utf-8")
        return paths


def _map(fn, items: Sequence, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- grounding ------------------------------------------------------------------------


def _ground_row(inst: Instance, grounder, stages: Sequence[str], chain: bool, examples: ExampleSource) -> list[dict]:
    vocab = inst.vocab
    rows = []
    gt_names = set(inst.objects.names())

    def row(stage, pred, error: str = "", mismatches: int = 0):
        truth = _elements(inst.objects if stage == "objects" else inst.init if stage == "predicates" else inst.goal, stage)
        p, r, f = set_f1(_elements(pred, stage), truth)
        rows.append(
            {
                "id": inst.id,
                "domain": inst.domain,
                "stage": stage,
                "precision": p,
                "recall": r,
                "f1": f,
                "n_pred": len(_elements(pred, stage)),
                "n_truth": len(truth),
                "name_mismatches": mismatches,
                "failure": error,
            }
        )

    objs: ObjectSet | None = inst.objects
    obs = inst.observation or Observation.from_text("")
    if "objects" in stages:
        try:
            predicted = grounder.ground_objects(obs, vocab, examples(inst.domain, "objects"))
            row("objects", predicted, mismatches=len(set(predicted.names()) - gt_names))
            if chain:
                objs = predicted
        except SymbolizerError as exc:
            row("objects", None, failure_kind(exc))
            if chain:
                objs = None
    for stage in ("predicates", "goal"):
        if stage not in stages:
            continue
        if objs is None:
            row(stage, None, "empty-result")
            continue
        try:
            if stage == "predicates":
                pred = grounder.ground_state(obs, vocab, objs, examples(inst.domain, stage))
            else:
                pred = grounder.ground_goal(inst.goal_text, vocab, objs, examples(inst.domain, stage))
            row(stage, pred)
        except SymbolizerError as exc:
            row(stage, None, failure_kind(exc))
    return rows


def evaluate_grounding(
    dataset: Sequence[Instance],
    grounder: GrounderFactory,
    stages: Sequence[str] = STAGES,
    chain: bool = True,
    examples: ExampleSource = default_examples,
    jobs: int = 1,
) -> ScoreReport:
    """Score each requested stage on every row.

    With ``chain`` the predicted object set feeds the predicate and goal
    stages; without it those stages receive the ground-truth objects, which
    isolates each stage's own error. Per-row failures are recorded, never raised.
    """
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}")
    per_row = _map(lambda inst: _ground_row(inst, grounder(inst), stages, chain, examples), list(dataset), jobs)
    return ScoreReport("grounding", [r for rows in per_row for r in rows])


def noise_sweep(
    dataset: Sequence[Instance],
    epsilons: Sequence[float],
    seed: int = 0,
    spurious: int = 0,
    stages: Sequence[str] = STAGES,
    chain: bool = False,
    jobs: int = 1,
) -> list[dict]:
    """Mock-grounder sweep; one row per epsilon with mean precision/recall/F1 per stage."""
    out = []
    for eps in epsilons:
        cfg = GrounderConfig(epsilon=eps, spurious=spurious, seed=seed)
        report = evaluate_grounding(dataset, mock_factory(cfg), stages, chain, examples=lambda d, s: [], jobs=jobs)
        row: dict = {"epsilon": float(eps)}
        for s in stages:
            for metric in ("precision", "recall", "f1"):
                row[f"{s}_{metric}"] = report.mean(metric, s)
        row["failures"] = sum(report.failures.values())
        out.append(row)
    return out


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


# -- planning ---------------------------------------------------------------------------


@dataclass
class PlanningConfig:
    budget: SearchBudget = field(default_factory=SearchBudget)
    tiebreak: str = "novelty"
    pairs: bool = False
    domain_files: dict[str, str] = field(default_factory=dict)
    heuristic_factory: Callable[[Instance], Callable] | None = None
    direct_client_factory: Callable[[Instance], object] | None = None


def _domain_text(inst: Instance, cfg: PlanningConfig) -> str:
    sim = get_simulator(inst.domain)
    path = cfg.domain_files.get(inst.domain) or cfg.domain_files.get(sim.vocab_name)
    return Path(path).read_text(encoding="utf-8") if path else bundled_text(f"{sim.vocab_name}.pddl")


def _ground_problem(inst: Instance, grounder, examples: ExampleSource) -> tuple[SymbolicState, Goal]:
    obs = inst.observation or Observation.from_text("")
    objs = grounder.ground_objects(obs, inst.vocab, examples(inst.domain, "objects"))
    init = grounder.ground_state(obs, inst.vocab, objs, examples(inst.domain, "predicates"))
    goal = grounder.ground_goal(inst.goal_text, inst.vocab, objs, examples(inst.domain, "goal"))
    return init, goal


def _lift(state: SymbolicState, goal: Goal, objects: ObjectSet) -> tuple[SymbolicState, Goal]:
    """Re-home grounded values onto the full object set so the simulator sees every object."""
    return SymbolicState(state.atoms, objects), Goal(goal.literals, objects)


def plan_instance(inst: Instance, mode: str, grounder, cfg: PlanningConfig, examples: ExampleSource = default_examples) -> dict:
    sim = get_simulator(inst.domain)
    row = {
        "id": inst.id,
        "domain": inst.domain,
        "mode": mode,
        "outcome": "",
        "solved": False,
        "plan_length": None,
        "expansions": None,
        "generated": None,
        "failure_step": None,
        "failure": "",
    }
    try:
        if mode == "direct-vlm":
            if cfg.direct_client_factory is None:
                raise ValueError("direct-vlm mode needs a client factory")
            client = cfg.direct_client_factory(inst)
            obs = inst.observation or Observation.from_text(sim.describe(inst.init))
            result = direct_vlm_plan(obs, inst.goal_text, _domain_text(inst, cfg), client, inst.init, inst.goal, sim.successors)
        else:
            init, goal = _ground_problem(inst, grounder, examples)
            if mode == "with-model":
                domain = parse_domain(_domain_text(inst, cfg))
                text = emit_problem(inst.id.replace(" ", "_"), domain.vocabulary, init.objects, init, goal, domain.name)
                result = plan_with_model(domain, parse_problem(text, domain), cfg.budget)
            elif mode in ("model-free", "vlm-heuristic"):
                init, goal = _lift(init, goal, inst.objects)
                heuristic = None
                if mode == "vlm-heuristic":
                    if cfg.heuristic_factory is None:
                        raise ValueError("vlm-heuristic mode needs a heuristic factory")
                    heuristic = cfg.heuristic_factory(inst)
                result = plan(init, goal, sim.successors, cfg.budget, cfg.tiebreak, cfg.pairs, heuristic)
            else:
                raise ValueError(f"unknown planning mode {mode!r}")
    except InconsistentState as exc:
        row.update(outcome="unsolved", failure="unsolved", message=str(exc))
        return row
    except (SymbolizerError,) as exc:
        row.update(outcome="grounding-failed", failure=failure_kind(exc))
        return row
    row.update(
        outcome=result.outcome,
        plan_length=len(result.plan),
        expansions=result.stats.expansions,
        generated=result.stats.generated,
        failure_step=result.failure_step,
    )
    if mode == "direct-vlm":
        row["solved"] = result.solved
        row["failure"] = "" if result.solved else "replay-failure"
        return row
    if not result.solved:
        row["failure"] = "unsolved"
        return row
    try:
        final = replay(inst.init, result.plan, sim.successors)
        ok = goal_satisfied(final, inst.goal)
    except InapplicableAction as exc:
        ok = False
        row["failure_step"] = exc.step
    row["solved"] = ok
    row["failure"] = "" if ok else "replay-failure"
    return row


def evaluate_planning(
    dataset: Sequence[Instance],
    mode: str,
    grounder: GrounderFactory | None = None,
    cfg: PlanningConfig | None = None,
    examples: ExampleSource = default_examples,
    jobs: int = 1,
) -> ScoreReport:
    """Success rate of one planning mode; success requires replay on the true initial state."""
    if mode not in MODES:
        raise ValueError(f"unknown planning mode {mode!r}")
    cfg = cfg or PlanningConfig()
    factory = grounder or mock_factory(GrounderConfig())
    rows = _map(lambda inst: plan_instance(inst, mode, factory(inst), cfg, examples), list(dataset), jobs)
    for r in rows:
        r.pop("message", None)
    return ScoreReport("planning", rows)
