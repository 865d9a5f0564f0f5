"""End-to-end experiment runs on small generated data."""
import json

import pytest

from cotest.harness.config import load_config
from cotest.harness.experiment import RunResult, mistake_rates, pick_best_view, run_experiment
from cotest.harness.stats import ComparisonReport, read_curves
from cotest.harness.synthetic import ClassificationSpec, WrapperSpec, generate_synthetic_classification, generate_synthetic_wrapper
from cotest.wrapper.loop import BACKWARD_VIEW, FORWARD_VIEW

CLASSIFICATION_ALGORITHMS = [
    {"name": "cotest-naive", "kind": "cotesting", "query": "naive", "output": "winner_takes_all"},
    {"name": "cotest-conservative", "kind": "cotesting", "query": "conservative", "output": "weighted_vote"},
    {"name": "random", "kind": "random"},
    {"name": "uncertainty", "kind": "uncertainty"},
    {"name": "qbag", "kind": "qbag", "committee_size": 3},
    {"name": "qbc", "kind": "qbc"},
]


@pytest.fixture(autouse=True)
def no_tracking(monkeypatch):
    monkeypatch.delenv("MLFLOW_TRACKING_URI", raising=False)


@pytest.fixture
def classification_config(tmp_path):
    spec = ClassificationSpec(signal_features=8, noise_features=12, size=90, noise_rate=0.05, seed=11)
    generate_synthetic_classification(spec, tmp_path / "data")
    payload = {
        "name": "small",
        "data_path": "data/data.txt",
        "views_path": "data/views.txt",
        "folds": 3,
        "n_initial": 10,
        "episodes": 4,
        "batch_size": 2,
        "seed": 5,
        "algorithms": CLASSIFICATION_ALGORITHMS,
    }
    path = tmp_path / "small.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return load_config(path)


@pytest.fixture
def wrapper_config(tmp_path):
    spec = WrapperSpec(tasks=2, size=24, folds=3, ambiguity=["prefix-variant", "distractor-order"], seed=3)
    generate_synthetic_wrapper(spec, tmp_path / "tasks")
    payload = {
        "name": "pages",
        "task": "wrapper",
        "wrapper_tasks": ["tasks"],
        "folds": 3,
        "n_initial": 2,
        "episodes": 4,
        "seed": 1,
        "algorithms": [
            {"name": "naive", "kind": "wrapper_naive"},
            {"name": "aggressive", "kind": "wrapper_aggressive"},
            {"name": "random", "kind": "wrapper_random"},
            {"name": "qbag", "kind": "wrapper_qbag", "committee_size": 3},
        ],
    }
    path = tmp_path / "pages.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return load_config(path)


class TestClassificationExperiment:
    def test_curves_cover_every_fold_and_episode(self, classification_config, tmp_path):
        config = classification_config.model_copy(update={"output_dir": str(tmp_path / "out")})
        result = run_experiment(config)
        assert len(result.runs) == 3 * len(CLASSIFICATION_ALGORITHMS)
        for curve in result.curves():
            assert curve.labeled_counts == [12, 14, 16, 18]
        written = read_curves(tmp_path / "out" / "curves.csv")
        assert len(written) == len(result.runs)
        for alg in CLASSIFICATION_ALGORITHMS:
            assert len(read_curves(tmp_path / "out" / f"curves_{alg['name']}.csv")) == 3

    def test_reruns_are_byte_identical(self, classification_config, tmp_path):
        for name, threads in (("a", 0), ("b", 0), ("c", 3)):
            config = classification_config.model_copy(update={"output_dir": str(tmp_path / name)})
            run_experiment(config, threads=threads)
        first = (tmp_path / "a" / "curves.csv").read_bytes()
        assert (tmp_path / "b" / "curves.csv").read_bytes() == first
        assert (tmp_path / "c" / "curves.csv").read_bytes() == first

    def test_seed_override_changes_runs(self, classification_config, tmp_path):
        a = run_experiment(classification_config.model_copy(update={"output_dir": str(tmp_path / "a")}))
        b = run_experiment(classification_config.model_copy(update={"output_dir": str(tmp_path / "b")}), seed=99)
        assert b.config.seed == 99
        assert [r.points for r in a.runs] != [r.points for r in b.runs]

    def test_comparison_reports_follow_config(self, classification_config, tmp_path, capsys):
        config = classification_config.model_copy(
            update={"output_dir": str(tmp_path / "out"), "alpha": 0.1, "comparison_points": "all"}
        )
        result = run_experiment(config)
        assert len(result.reports) == 2 * 4
        report = ComparisonReport.load(tmp_path / "out" / "reports" / "cotest-naive_vs_random.json")
        assert report.alpha == 0.1
        assert [p.labeled_count for p in report.points] == [12, 14, 16, 18]
        rows = (tmp_path / "out" / "summary.csv").read_text(encoding="utf-8").splitlines()
        assert len(rows) == 1 + 2 * 4
        assert "Paired t-tests (alpha 0.1, all points)" in capsys.readouterr().out

    def test_exhausted_runs_are_reported(self, classification_config, tmp_path, capsys):
        config = classification_config.model_copy(
            update={
                "output_dir": str(tmp_path / "out"),
                "batch_size": 20,
                "algorithms": [a for a in classification_config.algorithms if a.name in ("cotest-naive", "random")],
            }
        )
        result = run_experiment(config)
        out = capsys.readouterr().out
        for r in result.runs_for("random"):
            assert r.exhausted and r.queries >= 45
            assert r.summary == f"{r.queries} queries, 0 fallback, pool exhausted"
            assert f"⚠️ random {r.fold_label}: {r.summary}" in out
        assert all(r.mistakes for r in result.runs_for("cotest-naive"))
        assert "cotest-naive: view mistake rates" in out

    def test_plot(self, classification_config, tmp_path):
        config = classification_config.model_copy(update={"output_dir": str(tmp_path / "p"), "plot": True})
        run_experiment(config)
        assert (tmp_path / "p" / "curves.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")


class TestWrapperExperiment:
    def test_runs_and_convergence_files(self, wrapper_config, tmp_path):
        config = wrapper_config.model_copy(update={"output_dir": str(tmp_path / "out")})
        result = run_experiment(config)
        for name in ("naive", "aggressive", "random", "qbag"):
            runs = result.runs_for(name)
            assert len(runs) == 2 * 3
            assert all(r.fold_label.startswith("task_0") for r in runs)
        assert {r.view for r in result.runs_for("qbag")} <= {FORWARD_VIEW, BACKWARD_VIEW}
        lines = (tmp_path / "out" / "convergence.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "algorithm,task,fold,view,queries_to_perfect"
        assert len(lines) == 1 + 4 * 2 * 3
        histogram = (tmp_path / "out" / "convergence_histogram.csv").read_text(encoding="utf-8").splitlines()
        assert len(histogram) == 1 + 4 * (4 + 2)
        assert histogram[-1].startswith("qbag,never,")

    def test_reruns_are_byte_identical(self, wrapper_config, tmp_path):
        for name in ("a", "b"):
            run_experiment(wrapper_config.model_copy(update={"output_dir": str(tmp_path / name)}))
        for f in ("curves.csv", "convergence.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def _runs(view, steps, task="t"):
    return [
        RunResult("qbag", task, fold, [(2, 0, 0.5)] + ([(2 + s, s, 1.0)] if s is not None else []), view=view)
        for fold, s in enumerate(steps)
    ]


class TestPickBestView:
    def test_more_converged_folds_win(self):
        kept = pick_best_view(_runs(FORWARD_VIEW, [1, None]) + _runs(BACKWARD_VIEW, [3, 4]), budget=18)
        assert {r.view for r in kept} == {BACKWARD_VIEW}

    def test_then_fewer_queries(self):
        kept = pick_best_view(_runs(FORWARD_VIEW, [3, 4]) + _runs(BACKWARD_VIEW, [1, 2]), budget=18)
        assert {r.view for r in kept} == {BACKWARD_VIEW}

    def test_ties_keep_forward(self):
        kept = pick_best_view(_runs(BACKWARD_VIEW, [2, 2]) + _runs(FORWARD_VIEW, [2, 2]), budget=18)
        assert {r.view for r in kept} == {FORWARD_VIEW}
        assert len(kept) == 2

    def test_chosen_per_task(self):
        runs = _runs(FORWARD_VIEW, [1], "a") + _runs(BACKWARD_VIEW, [5], "a")
        runs += _runs(FORWARD_VIEW, [None], "b") + _runs(BACKWARD_VIEW, [5], "b")
        kept = pick_best_view(runs, budget=18)
        assert [(r.task, r.view) for r in kept] == [("a", FORWARD_VIEW), ("b", BACKWARD_VIEW)]


def test_mistake_rates_pool_over_runs():
    runs = [
        RunResult("cotest", "", 0, [], mistakes={"a": 2, "b": 1}, queries=4),
        RunResult("cotest", "", 1, [], mistakes={"a": 0, "b": 3}, queries=6),
        RunResult("random", "", 0, [], queries=5),
    ]
    assert mistake_rates(runs) == {"a": 0.2, "b": 0.4}
    assert mistake_rates(runs[2:]) == {}
