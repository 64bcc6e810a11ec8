import json

import pytest

from symbolizer.eval import (
    PlanningConfig,
    ScoreReport,
    evaluate_grounding,
    evaluate_planning,
    mock_factory,
    noise_sweep,
    set_f1,
)
from symbolizer.grounder import GrounderConfig
from symbolizer.simulator import bundled_suite, make_instance

from .test_planner import Scripted


def test_set_f1_vectors():
    assert set_f1({"p", "q"}, {"p", "q"}) == (1.0, 1.0, 1.0)
    p, r, f = set_f1({"p"}, {"p", "q"})
    assert (p, r) == (1.0, 0.5)
    assert f == pytest.approx(2 / 3, abs=1e-12)
    assert set_f1(set(), set()) == (1.0, 1.0, 1.0)
    assert set_f1(set(), {"p"}) == (0.0, 0.0, 0.0)
    assert set_f1({"x"}, {"p"}) == (0.0, 0.0, 0.0)
    assert set_f1({"p", "x"}, set()) == (0.0, 0.0, 0.0)


@pytest.fixture(scope="module")
def suite():
    return bundled_suite(0)


def test_exact_grounding_scores_one(suite):
    report = evaluate_grounding(suite, mock_factory(GrounderConfig()))
    assert len(report.rows) == 3 * len(suite)
    assert all(r["f1"] == 1.0 for r in report.rows)
    assert sum(report.failures.values()) == 0


def test_failures_recorded_not_raised(suite):
    report = evaluate_grounding(suite[:3], mock_factory(GrounderConfig(epsilon=1.0)))
    assert report.failures["empty-result"] == 9
    assert all(r["f1"] == 0.0 for r in report.rows)


def test_unchained_stages_use_truth_objects(suite):
    chained = evaluate_grounding(suite, mock_factory(GrounderConfig(epsilon=0.5, seed=3)), stages=("objects", "predicates"))
    free = evaluate_grounding(
        suite, mock_factory(GrounderConfig(epsilon=0.5, seed=3)), stages=("objects", "predicates"), chain=False
    )
    assert free.mean("f1", "objects") == chained.mean("f1", "objects")
    assert free.mean("recall", "predicates") > chained.mean("recall", "predicates")


def test_report_outputs(tmp_path, suite):
    report = evaluate_grounding(suite, mock_factory(GrounderConfig(epsilon=0.2, seed=1)))
    csv_path, md_path = report.write(tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("id,domain,stage,precision,recall,f1")
    assert len(lines) == 1 + len(report.rows)
    md = md_path.read_text()
    assert "| Domain | Objects F1 | Predicates F1 | Goal F1 |" in md
    assert "Failures:" in md
    again = evaluate_grounding(suite, mock_factory(GrounderConfig(epsilon=0.2, seed=1)))
    assert again.to_csv() == report.to_csv()
    assert again.to_markdown() == md


@pytest.mark.parametrize("mode", ["model-free", "with-model"])
def test_exact_grounding_plans_everything(suite, mode):
    report = evaluate_planning(suite, mode, mock_factory(GrounderConfig()))
    assert report.success_rate == 1.0
    assert sum(report.failures.values()) == 0


def test_direct_vlm_wrong_plan(suite):
    cfg = PlanningConfig(direct_client_factory=lambda inst: Scripted(json.dumps({"plan": ["fly(a)"]})))
    report = evaluate_planning(suite, "direct-vlm", cfg=cfg)
    assert report.success_rate == 0.0
    assert report.failures["replay-failure"] == len(suite)


def test_noisy_grounding_can_mislead_planner():
    inst = make_instance("blocksworld", 5, seed=2)
    report = evaluate_planning([inst], "model-free", mock_factory(GrounderConfig(epsilon=0.6, seed=0)))
    row = report.rows[0]
    assert row["solved"] is False
    assert row["failure"] in ("replay-failure", "unsolved", "empty-result")


def test_sweep_rows(suite):
    rows = noise_sweep(suite, [0.0, 0.3], seed=2)
    assert [r["epsilon"] for r in rows] == [0.0, 0.3]
    assert rows[0]["predicates_f1"] == 1.0 > rows[1]["predicates_f1"]


def test_unknown_mode():
    with pytest.raises(ValueError):
        evaluate_planning([], "telepathy")
    with pytest.raises(ValueError):
        evaluate_grounding([], mock_factory(GrounderConfig()), stages=("vibes",))


def test_empty_report_is_nan():
    r = ScoreReport("planning")
    assert r.success_rate != r.success_rate
