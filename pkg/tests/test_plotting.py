from symbolizer.eval import evaluate_grounding, evaluate_planning, mock_factory, noise_sweep
from symbolizer.grounder import GrounderConfig
from symbolizer.plotting import plot_grounding, plot_planning, plot_sweep
from symbolizer.simulator import bundled_suite

PNG = b"\x89PNG\r\n\x1a\n"


def test_figures_are_png_and_stable(tmp_path):
    suite = bundled_suite(0)
    report = evaluate_grounding(suite, mock_factory(GrounderConfig(epsilon=0.1, seed=0)))
    a = plot_grounding(report, tmp_path / "a.png")
    b = plot_grounding(report, tmp_path / "b.png")
    assert a.read_bytes().startswith(PNG)
    assert a.read_bytes() == b.read_bytes()
    assert plot_sweep(noise_sweep(suite, [0.0, 0.2]), tmp_path / "s.png").read_bytes().startswith(PNG)
    planning = evaluate_planning(suite, "model-free", mock_factory(GrounderConfig()))
    assert plot_planning(planning, tmp_path / "p.png").read_bytes().startswith(PNG)
