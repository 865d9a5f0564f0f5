"""Full-scale convergence runs on the shipped synthetic suites (enable with --runslow)."""
from pathlib import Path

import pytest

from cotest.harness.config import load_config, load_model
from cotest.harness.experiment import run_experiment
from cotest.harness.stats import paired_t_test
from cotest.harness.synthetic import ClassificationSpec, WrapperSpec, generate_synthetic_classification, generate_synthetic_wrapper

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


@pytest.fixture(autouse=True)
def no_tracking(monkeypatch):
    monkeypatch.delenv("MLFLOW_TRACKING_URI", raising=False)


@pytest.mark.slow
def test_naive_cotesting_beats_random_sampling(tmp_path):
    base_spec = load_model(CONFIGS / "classification_spec.json", ClassificationSpec)
    base = load_config(CONFIGS / "classification_suite.json")
    algorithms = [a for a in base.algorithms if a.name in ("cotest-naive", "random")]
    good_seeds = 0
    for seed in range(10):
        data = tmp_path / f"data{seed}"
        generate_synthetic_classification(base_spec.model_copy(update={"seed": seed}), data)
        config = base.model_copy(
            update={
                "data_path": str(data / "data.txt"),
                "views_path": str(data / "views.txt"),
                "output_dir": str(tmp_path / f"out{seed}"),
                "algorithms": algorithms,
                "plot": False,
            }
        )
        result = run_experiment(config, seed=seed)
        report = paired_t_test(result.curves("cotest-naive"), result.curves("random"), "second-half", config.alpha)
        if report.losses == 0 and report.wins >= 0.6 * len(report.points):
            good_seeds += 1
    assert good_seeds >= 8


@pytest.mark.slow
def test_aggressive_wrapper_converges_while_random_lags(tmp_path):
    spec = load_model(CONFIGS / "wrapper_spec.json", WrapperSpec)
    generate_synthetic_wrapper(spec, tmp_path / "tasks")
    base = load_config(CONFIGS / "wrapper_suite.json")
    config = base.model_copy(
        update={
            "wrapper_tasks": [str(tmp_path / "tasks")],
            "output_dir": str(tmp_path / "out"),
            "algorithms": [a for a in base.algorithms if a.name in ("aggressive", "random")],
        }
    )
    result = run_experiment(config)
    runs = result.runs_for("aggressive")
    assert len(runs) == spec.tasks * spec.folds

    steps = [r.queries_to_perfect for r in runs]
    within_seven = sum(1 for s in steps if s is not None and s <= 7)
    assert within_seven >= 0.9 * len(runs)

    prefix_tasks = sorted({r.task for r in runs if r.task.endswith("prefix-variant")})
    quick = 0
    for task in prefix_tasks:
        task_steps = [r.queries_to_perfect for r in runs if r.task == task]
        if 2 * sum(1 for s in task_steps if s is not None and s <= 1) >= len(task_steps):
            quick += 1
    assert prefix_tasks and quick >= 0.2 * len(prefix_tasks)

    random_runs = result.runs_for("random")
    converged = sum(1 for r in random_runs if r.queries_to_perfect is not None)
    assert converged <= 0.6 * len(random_runs)
