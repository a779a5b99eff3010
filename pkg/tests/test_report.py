import pytest

from hiddenfactor.report import PLOTTABLE_METRICS, emit_figures, plot_sweep_metric
from hiddenfactor.simulation import (
    PopulationModel,
    SweepConfig,
    SweepResult,
    run_sweep,
)


@pytest.fixture(scope="module")
def small_result():
    config = SweepConfig(
        n_units=20,
        n_plus_a=10,
        model=PopulationModel("strict_additive", 2.0, 2.0, 0.0, 1.0),
        pi_grid=(0.3, 0.5, 0.7),
        replicates=15,
        min_cell=2,
        alpha=0.05,
        master_seed=11,
    )
    return run_sweep(config)


def test_figure_contains_one_series_per_situation(small_result, tmp_path):
    path = tmp_path / "coverage.svg"
    plot_sweep_metric(small_result, "coverage", path)
    text = path.read_text()
    assert 'id="series-I"' in text
    assert 'id="series-II"' in text


def test_figure_rendering_is_deterministic(small_result, tmp_path):
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    plot_sweep_metric(small_result, "mean_width", a)
    plot_sweep_metric(small_result, "mean_width", b)
    assert a.read_bytes() == b.read_bytes()


def test_unknown_metric_rejected(small_result, tmp_path):
    with pytest.raises(ValueError, match="unknown metric"):
        plot_sweep_metric(small_result, "sharpness", tmp_path / "x.svg")


def test_empty_result_rejected(small_result, tmp_path):
    empty = SweepResult(config=small_result.config, theta_a=0.0, rows=())
    with pytest.raises(ValueError, match="no rows"):
        plot_sweep_metric(empty, "coverage", tmp_path / "x.svg")


def test_emit_figures_writes_requested_metrics(small_result, tmp_path):
    paths = emit_figures(small_result, tmp_path / "figs")
    assert [p.name for p in paths] == ["coverage.svg", "mean_width.svg"]
    for p in paths:
        assert p.exists() and p.stat().st_size > 0
    assert set(("coverage", "mean_width")) <= set(PLOTTABLE_METRICS)
