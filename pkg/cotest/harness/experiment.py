"""Runs configured algorithms over cross-validation folds and writes learning curves."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from cotest import baselines
from cotest.core import MultiViewExample, derive_seed, kfold_indices, load_dataset, split_initial, stratified_kfold
from cotest.cotesting import evaluate, run_cotesting
from cotest.errors import CoTestError, ComparisonError, ConfigError
from cotest.harness import config as settings
from cotest.harness.config import AlgorithmConfig, AlgorithmKind, ExperimentConfig, TaskKind
from cotest.harness.oracle import Oracle
from cotest.harness.stats import ComparisonReport, LearningCurve, paired_t_test, summarize, summary_csv, summary_text, write_curves
from cotest.learners import make_learner
from cotest.wrapper.loop import (
    BACKWARD_VIEW,
    FORWARD_VIEW,
    WRAPPER_COMMITTEE_SIZE,
    WrapperMode,
    WrapperTask,
    load_wrapper_task,
    queries_to_perfect,
    run_wrapper_cotesting,
    run_wrapper_query_by_bagging,
    run_wrapper_random,
)

CLASSIFICATION_COMMITTEE_SIZE = 5
NB_COMMITTEE_SIZE = 2


@dataclass
class RunResult:
    """Evaluated outcome of one (algorithm, task, fold) run."""

    algorithm: str
    task: str
    fold: int
    points: list[tuple[int, int, float]]  # (labeled count, queries made, accuracy), episode 0 first
    fallback_count: int = 0
    exhausted: bool = False
    view: Optional[str] = None
    summary: str = ""  # set only when the run had fallbacks, quiet episodes or pool exhaustion
    mistakes: dict[str, int] = field(default_factory=dict)  # per strong view, over the query log
    queries: int = 0

    @property
    def fold_label(self) -> str:
        return f"{self.task}:{self.fold}" if self.task else str(self.fold)

    def curve(self, seed: int = 0) -> LearningCurve:
        return LearningCurve(self.algorithm, self.fold_label, tuple((c, a) for c, _, a in self.points[1:]), seed)

    @property
    def queries_to_perfect(self) -> Optional[int]:
        return queries_to_perfect([(q, a) for _, q, a in self.points])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult] = field(default_factory=list)
    output_dir: Optional[Path] = None
    reports: list[ComparisonReport] = field(default_factory=list)

    def runs_for(self, algorithm: str) -> list[RunResult]:
        return [r for r in self.runs if r.algorithm == algorithm]

    def curves(self, algorithm: Optional[str] = None) -> list[LearningCurve]:
        runs = self.runs if algorithm is None else self.runs_for(algorithm)
        return [r.curve(self.config.seed) for r in runs]

    def curves_by_algorithm(self) -> dict[str, list[LearningCurve]]:
        return {a.name: self.curves(a.name) for a in self.config.algorithms}


def _evaluate_snapshots(run, test: Sequence[MultiViewExample], n_initial: int) -> list[tuple[int, int, float]]:
    return [
        (snapshot.labeled_count, snapshot.labeled_count - n_initial, evaluate(output, test))
        for snapshot, output in run.snapshot_outputs()
    ]


def _run_notes(run) -> dict:
    notes = {"queries": len(run.query_log)}
    if baselines.has_events(run):
        notes["summary"] = baselines.summarize_run(run)
    if hasattr(run, "view_mistakes"):
        notes["mistakes"] = run.view_mistakes()
    return notes


# ---------------------------------------------------------------- classification

def _classification_run(alg: AlgorithmConfig, dataset, train, test, fold: int, config: ExperimentConfig, root: int) -> RunResult:
    labeled, pool = split_initial(train, config.n_initial, derive_seed(root, "initial", fold))
    oracle = Oracle(train)
    seed = derive_seed(root, "algorithm", alg.name, "fold", fold)
    labels = dataset.label_ids
    universe = sorted(dataset.view_spec.universe)
    n = config.n_queries
    b = config.batch_size

    if alg.kind is AlgorithmKind.COTESTING:
        learners = {
            view.id: make_learner(alg.view_learners.get(view.id, alg.learner), view.features, labels)
            for view in dataset.view_spec.views
        }
        run = run_cotesting(dataset.view_spec, learners, labeled, pool, n, alg.query, alg.output, seed, oracle, b)
    elif alg.kind is AlgorithmKind.RANDOM:
        run = baselines.random_sampling(labeled, pool, n, make_learner(alg.learner, universe, labels), seed, oracle, b)
    elif alg.kind is AlgorithmKind.UNCERTAINTY:
        run = baselines.uncertainty_sampling(labeled, pool, n, make_learner(alg.learner, universe, labels), seed, oracle, b)
    elif alg.kind is AlgorithmKind.QBAG:
        run = baselines.query_by_bagging(
            labeled,
            pool,
            n,
            make_learner(alg.learner, universe, labels),
            seed,
            oracle,
            committee_size=alg.committee_size or CLASSIFICATION_COMMITTEE_SIZE,
            batch_size=b,
        )
    elif alg.kind is AlgorithmKind.QBC:
        run = baselines.query_by_committee_nb(
            labeled,
            pool,
            n,
            seed,
            oracle,
            committee_size=alg.committee_size or NB_COMMITTEE_SIZE,
            alpha=alg.learner.alpha,
            vocabulary=universe,
            labels=labels,
            batch_size=b,
        )
    else:
        run = baselines.query_by_boosting()

    return RunResult(
        algorithm=alg.name,
        task="",
        fold=fold,
        points=_evaluate_snapshots(run, test, config.n_initial),
        fallback_count=run.fallback_count,
        exhausted=run.exhausted,
        **_run_notes(run),
    )


# ---------------------------------------------------------------- wrapper

def _wrapper_runs(alg: AlgorithmConfig, task: WrapperTask, train, test, fold: int, config: ExperimentConfig, root: int) -> list[RunResult]:
    labeled, pool = split_initial(train, config.n_initial, derive_seed(root, "initial", task.name, fold))
    oracle = Oracle(train)
    seed = derive_seed(root, "algorithm", alg.name, "task", task.name, "fold", fold)
    n = config.n_queries
    boundary = config.boundary

    if alg.kind is AlgorithmKind.WRAPPER_QBAG:
        runs = {
            view: run_wrapper_query_by_bagging(
                labeled, pool, n, seed, oracle, view, alg.committee_size or WRAPPER_COMMITTEE_SIZE, boundary
            )
            for view in (FORWARD_VIEW, BACKWARD_VIEW)
        }
    elif alg.kind is AlgorithmKind.WRAPPER_RANDOM:
        runs = {None: run_wrapper_random(labeled, pool, n, seed, oracle, boundary)}
    else:
        mode = WrapperMode.NAIVE if alg.kind is AlgorithmKind.WRAPPER_NAIVE else WrapperMode.AGGRESSIVE
        runs = {None: run_wrapper_cotesting(labeled, pool, n, mode, seed, oracle, boundary)}

    return [
        RunResult(
            algorithm=alg.name,
            task=task.name,
            fold=fold,
            points=_evaluate_snapshots(run, test, config.n_initial),
            fallback_count=run.run.fallback_count,
            exhausted=run.run.exhausted,
            view=view,
            **_run_notes(run.run),
        )
        for view, run in runs.items()
    ]


def pick_best_view(runs: Sequence[RunResult], budget: int) -> list[RunResult]:
    """Keep, per task, the rule direction whose query-by-bagging runs converge best.

    More folds reaching 100% wins; then the lower mean number of queries
    (never = budget + 1); then the forward direction.
    """
    by_task: dict[str, dict[str, list[RunResult]]] = {}
    for r in runs:
        by_task.setdefault(r.task, {}).setdefault(r.view, []).append(r)
    kept = []
    for task in sorted(by_task):
        def score(view: str):
            results = by_task[task][view]
            steps = [r.queries_to_perfect for r in results]
            converged = sum(s is not None for s in steps)
            mean = sum(budget + 1 if s is None else s for s in steps) / len(steps)
            return (-converged, mean, 0 if view == FORWARD_VIEW else 1)

        best = min(by_task[task], key=score)
        kept.extend(by_task[task][best])
    return kept


def load_wrapper_tasks(config: ExperimentConfig) -> list[WrapperTask]:
    paths: list[Path] = []
    for entry in config.wrapper_tasks:
        p = Path(entry)
        paths.extend(sorted(p.glob("*.tsv")) if p.is_dir() else [p])
    if not paths:
        raise ConfigError("wrapper_tasks matched no task files")
    return [load_wrapper_task(p, config.boundary) for p in paths]


# ---------------------------------------------------------------- driver

Job = tuple[tuple, Callable[[], list[RunResult]]]


def _guard(label: str, fn: Callable[[], list[RunResult]]) -> Callable[[], list[RunResult]]:
    def call():
        try:
            return fn()
        except CoTestError as e:
            raise type(e)(f"{label}: {e}") from e

    return call


def _jobs(config: ExperimentConfig, root: int) -> list[Job]:
    jobs: list[Job] = []
    order = {a.name: i for i, a in enumerate(config.algorithms)}
    if config.task is TaskKind.CLASSIFICATION:
        dataset = load_dataset(config.data_path, config.views_path)
        print(f"📊 Loaded {len(dataset)} examples, views {dataset.view_spec.ids}, labels {[l.name for l in dataset.labels]}")
        folds = stratified_kfold(dataset, config.folds, derive_seed(root, "fold"))
        for alg in config.algorithms:
            for fold, (train, test) in enumerate(folds):
                fn = lambda alg=alg, train=train, test=test, fold=fold: [
                    _classification_run(alg, dataset, train, test, fold, config, root)
                ]
                jobs.append(((order[alg.name], "", fold), _guard(f"{alg.name} fold {fold}", fn)))
    else:
        tasks = load_wrapper_tasks(config)
        print(f"📊 Loaded {len(tasks)} wrapper tasks ({sum(len(t) for t in tasks)} documents)")
        for task in tasks:
            examples = task.examples()
            folds = kfold_indices(len(examples), config.folds, derive_seed(root, "fold", task.name))
            for alg in config.algorithms:
                for fold, (train_idx, test_idx) in enumerate(folds):
                    train = [examples[i] for i in train_idx]
                    test = [examples[i] for i in test_idx]
                    fn = lambda alg=alg, task=task, train=train, test=test, fold=fold: _wrapper_runs(
                        alg, task, train, test, fold, config, root
                    )
                    jobs.append(((order[alg.name], task.name, fold), _guard(f"{alg.name} {task.name} fold {fold}", fn)))
    return jobs


def _execute(jobs: list[Job], threads: int) -> list[RunResult]:
    if threads > 0:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [(key, pool.submit(fn)) for key, fn in jobs]
            done = [(key, f.result()) for key, f in futures]
    else:
        done = [(key, fn()) for key, fn in jobs]
    done.sort(key=lambda item: item[0])
    return [r for _, results in done for r in results]


def write_convergence(result: ExperimentResult, outdir: Path) -> None:
    budget = result.config.n_queries
    with open(outdir / "convergence.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "task", "fold", "view", "queries_to_perfect"])
        for r in result.runs:
            steps = r.queries_to_perfect
            writer.writerow([r.algorithm, r.task, r.fold, r.view or "", "" if steps is None else steps])
    with open(outdir / "convergence_histogram.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "queries", "runs"])
        for alg in result.config.algorithms:
            buckets = [0] * (budget + 2)
            for r in result.runs_for(alg.name):
                steps = r.queries_to_perfect
                buckets[budget + 1 if steps is None else min(steps, budget)] += 1
            for q, count in enumerate(buckets):
                writer.writerow([alg.name, q if q <= budget else "never", count])


COTESTING_KINDS = {AlgorithmKind.COTESTING, AlgorithmKind.WRAPPER_NAIVE, AlgorithmKind.WRAPPER_AGGRESSIVE}


def mistake_rates(runs: Sequence[RunResult]) -> dict[str, float]:
    """Share of queried examples each strong view had mislabeled, pooled over runs."""
    queries = sum(r.queries for r in runs if r.mistakes)
    if not queries:
        return {}
    totals: dict[str, int] = {}
    for r in runs:
        for view, count in r.mistakes.items():
            totals[view] = totals.get(view, 0) + count
    return {view: count / queries for view, count in totals.items()}


def write_comparisons(result: ExperimentResult, outdir: Path) -> list[ComparisonReport]:
    """Paired t-test of every co-testing algorithm against every baseline in the run.

    Uses the config's alpha and comparison points; writes reports/<a>_vs_<b>.json
    and summary.csv. Pairs whose curves cannot be paired are skipped with a warning.
    """
    config = result.config
    ours = [a.name for a in config.algorithms if a.kind in COTESTING_KINDS]
    others = [a.name for a in config.algorithms if a.kind not in COTESTING_KINDS]
    reports = []
    for a in ours:
        for b in others:
            try:
                report = paired_t_test(result.curves(a), result.curves(b), config.comparison_points, config.alpha)
            except ComparisonError as e:
                print(f"⚠️ Warning: skipped {a} vs {b} (non-critical): {e}")
                continue
            report.save(outdir / "reports" / f"{a}_vs_{b}.json")
            reports.append(report)
    if reports:
        rows = summarize(reports)
        (outdir / "summary.csv").write_text(summary_csv(rows), encoding="utf-8")
        print(f"📊 Paired t-tests (alpha {config.alpha}, {config.comparison_points} points):")
        print(summary_text(rows), end="")
    return reports


def run_experiment(config: ExperimentConfig, seed: Optional[int] = None, threads: Optional[int] = None) -> ExperimentResult:
    """Run every configured algorithm on every fold and write the curve files.

    Writes curves.csv and curves_<algorithm>.csv (plus convergence files for
    wrapper tasks and curves.svg when plotting is on) under the output directory.
    """
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    threads = settings.COTEST_THREADS if threads is None else threads
    root = config.seed
    outdir = Path(config.output_dir)

    print(f"🚀 Running experiment '{config.name}' ({config.task.value}, seed {root})")
    print(f"   Folds: {config.folds}, initial: {config.n_initial}, episodes: {config.episodes} x {config.batch_size}")
    jobs = _jobs(config, root)
    print(f"🔍 {len(jobs)} runs, {'serial' if threads <= 0 else f'{threads} threads'}")
    runs = _execute(jobs, threads)

    if config.task is TaskKind.WRAPPER:
        qbag = {a.name for a in config.algorithms if a.kind is AlgorithmKind.WRAPPER_QBAG}
        runs = [r for r in runs if r.algorithm not in qbag] + [
            kept for name in sorted(qbag) for kept in pick_best_view([r for r in runs if r.algorithm == name], config.n_queries)
        ]
        order = {a.name: i for i, a in enumerate(config.algorithms)}
        runs.sort(key=lambda r: (order[r.algorithm], r.task, r.fold))

    result = ExperimentResult(config, runs, outdir)
    for r in runs:
        if r.summary:
            marker = "⚠️" if r.exhausted else "🔍"
            print(f"{marker} {r.algorithm} {r.fold_label}: {r.summary}")

    outdir.mkdir(parents=True, exist_ok=True)
    write_curves(result.curves(), outdir / "curves.csv")
    for alg in config.algorithms:
        curves = result.curves(alg.name)
        write_curves(curves, outdir / f"curves_{alg.name}.csv")
        finals = [c.accuracies[-1] for c in curves if c.points]
        if finals:
            print(f"✅ {alg.name}: mean final accuracy {sum(finals) / len(finals):.4f} over {len(finals)} runs")
        rates = mistake_rates(result.runs_for(alg.name))
        if rates:
            print(f"📊 {alg.name}: view mistake rates " + ", ".join(f"{v} {rate:.3f}" for v, rate in rates.items()))
    extra = {}
    if config.task is TaskKind.WRAPPER:
        write_convergence(result, outdir)
        for alg in config.algorithms:
            runs_alg = result.runs_for(alg.name)
            converged = [r for r in runs_alg if r.queries_to_perfect is not None]
            share = len(converged) / len(runs_alg) if runs_alg else 0.0
            extra[alg.name] = {"converged_share": share}
            print(f"📊 {alg.name}: 100% extraction reached on {len(converged)}/{len(runs_alg)} runs")

    reports = write_comparisons(result, outdir)
    result.reports = reports

    if config.plot:
        from cotest.harness.plots import plot_curves

        svg = plot_curves(result.curves_by_algorithm(), outdir / "curves.svg", config.name)
        print(f"📊 Plot written to {svg}")

    from cotest.harness.tracking import log_experiment

    log_experiment(config, result.curves_by_algorithm(), extra)
    print(f"🎉 Curves written to {outdir}")
    return result
