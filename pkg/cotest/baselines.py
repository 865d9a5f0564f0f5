"""Single-view active learners used as comparison points for co-testing."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from cotest.core import Description, MultiViewExample, Prediction, derive_rng, union_view
from cotest.cotesting import Oracle, QueryRecord
from cotest.errors import ContractError, DatasetError
from cotest.learners import Hypothesis, ViewLearner, bagged_committee, sample_nb_committee, train_naive_bayes

UNION_VIEW = "union"

Describe = Callable[[MultiViewExample], Description]


@dataclass
class SingleViewOutput:
    """Applies one hypothesis to a chosen description of each example."""

    hypothesis: Hypothesis
    describe: Describe = union_view

    def predict(self, example: MultiViewExample) -> Prediction:
        return self.hypothesis.predict(self.describe(example))

    def predict_batch(self, examples: Sequence[MultiViewExample]) -> list[Prediction]:
        return self.hypothesis.predict_batch([self.describe(x) for x in examples])


@dataclass(frozen=True)
class BaselineSnapshot:
    episode: int
    labeled_count: int
    hypothesis: Hypothesis
    n_queries: int


@dataclass
class BaselineRun:
    snapshots: list[BaselineSnapshot]
    query_log: tuple[QueryRecord, ...]
    describe: Describe
    exhausted: bool = False
    quiet_episodes: int = 0  # episodes where the committee agreed on every pool example
    events: list[str] = field(default_factory=list)

    @property
    def hypothesis(self) -> Hypothesis:
        return self.snapshots[-1].hypothesis

    @property
    def output(self) -> SingleViewOutput:
        return SingleViewOutput(self.hypothesis, self.describe)

    @property
    def fallback_count(self) -> int:
        return sum(1 for record in self.query_log if record.fallback)

    def snapshot_outputs(self) -> list[tuple[BaselineSnapshot, SingleViewOutput]]:
        return [(s, SingleViewOutput(s.hypothesis, self.describe)) for s in self.snapshots]


# (hypothesis, pool descriptions, labeled training set, rng, size) -> [(position, fallback)]
Chooser = Callable[[Hypothesis, list, list, np.random.Generator, int], list[tuple[int, bool]]]


def _run_single_view(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    fit: Callable[[list], Hypothesis],
    choose: Chooser,
    seed: int,
    oracle: Oracle,
    batch_size: int,
    describe: Describe,
    view: str,
) -> BaselineRun:
    if n_queries < 0 or batch_size < 1:
        raise ValueError(f"n_queries must be >= 0 and batch_size >= 1, got {n_queries}, {batch_size}")
    if not labeled:
        raise DatasetError("active learning needs a non-empty initial labeled set")
    labeled = list(labeled)
    pool = list(pool)
    training = [(describe(x), x.label) for x in labeled]
    hypothesis = fit(training)
    snapshots = [BaselineSnapshot(0, len(labeled), hypothesis, 0)]
    log: list[QueryRecord] = []
    run = BaselineRun(snapshots, (), describe)

    remaining, episode = n_queries, 0
    while remaining > 0:
        if not pool:
            run.exhausted = True
            run.events.append(f"pool exhausted after {len(log)} queries")
            break
        episode += 1
        rng = derive_rng(seed, "episode", episode)
        size = min(batch_size, remaining, len(pool))
        descriptions = [describe(x) for x in pool]
        chosen = choose(hypothesis, descriptions, training, rng, size)
        if any(fallback for _, fallback in chosen):
            run.quiet_episodes += 1
        predictions = hypothesis.predict_batch([descriptions[p] for p, _ in chosen])
        for (position, fallback), made in zip(chosen, predictions):
            x = pool[position]
            label = oracle(x)
            log.append(QueryRecord(x.example_id, label, {view: made}, episode, fallback))
            labeled.append(x.with_label(label))
            training.append((descriptions[position], label))
        taken = {p for p, _ in chosen}
        pool = [x for i, x in enumerate(pool) if i not in taken]
        remaining -= len(chosen)
        hypothesis = fit(training)
        snapshots.append(BaselineSnapshot(episode, len(labeled), hypothesis, len(log)))

    run.query_log = tuple(log)
    return run


def _top(scores: np.ndarray, size: int) -> list[int]:
    """Indices of the ``size`` largest scores; ties go to the lowest index."""
    return [int(i) for i in np.argsort(-scores, kind="stable")[:size]]


def _fill_randomly(chosen: list[int], n: int, size: int, rng: np.random.Generator) -> list[tuple[int, bool]]:
    out = [(i, False) for i in chosen]
    if len(out) < size:
        taken = set(chosen)
        rest = [i for i in range(n) if i not in taken]
        out.extend((rest[int(j)], True) for j in rng.choice(len(rest), size=size - len(out), replace=False))
    return out


def vote_entropy(committee: Sequence[Hypothesis], descriptions: Sequence[Description]) -> np.ndarray:
    """Entropy of the committee's label votes per description; abstentions form their own vote."""
    votes = [member.predict_batch(descriptions) for member in committee]
    m = len(committee)
    entropy = np.zeros(len(descriptions))
    for i in range(len(descriptions)):
        counts: dict = {}
        for member_votes in votes:
            label = member_votes[i].label
            counts[label] = counts.get(label, 0) + 1
        p = np.array(list(counts.values()), dtype=float) / m
        entropy[i] = float(-(p * np.log(p)).sum())
    return entropy


def committee_disagreement(committee: Sequence[Hypothesis], descriptions: Sequence[Description]) -> np.ndarray:
    """Boolean mask of descriptions on which committee members do not all agree."""
    votes = [member.predict_batch(descriptions) for member in committee]
    return np.array(
        [len({member_votes[i].label for member_votes in votes}) > 1 for i in range(len(descriptions))],
        dtype=bool,
    )


def random_sampling(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    learner: ViewLearner,
    seed: int,
    oracle: Oracle,
    batch_size: int = 1,
    describe: Describe = union_view,
    view: str = UNION_VIEW,
) -> BaselineRun:
    """Query uniformly at random from the pool."""

    def choose(hypothesis, descriptions, training, rng, size):
        return [(int(i), False) for i in rng.choice(len(descriptions), size=size, replace=False)]

    return _run_single_view(
        labeled, pool, n_queries, lambda t: learner.fit(t, view), choose, seed, oracle, batch_size, describe, view
    )


def uncertainty_sampling(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    learner: ViewLearner,
    seed: int,
    oracle: Oracle,
    batch_size: int = 1,
    describe: Describe = union_view,
    view: str = UNION_VIEW,
) -> BaselineRun:
    """Query the pool examples the current hypothesis is least confident about."""
    if not learner.confidence_supported:
        raise ContractError(f"uncertainty sampling needs a confidence-reporting learner, got {learner!r}")

    def choose(hypothesis, descriptions, training, rng, size):
        confidence = np.array([p.confidence for p in hypothesis.predict_batch(descriptions)], dtype=float)
        return [(i, False) for i in _top(-confidence, size)]

    return _run_single_view(
        labeled, pool, n_queries, lambda t: learner.fit(t, view), choose, seed, oracle, batch_size, describe, view
    )


def query_by_bagging(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    learner: ViewLearner,
    seed: int,
    oracle: Oracle,
    committee_size: int = 5,
    batch_size: int = 1,
    describe: Describe = union_view,
    view: str = UNION_VIEW,
    require_all_labels: bool = True,
) -> BaselineRun:
    """Query where a bootstrap committee's votes have the highest entropy.

    The committee is rebuilt from the labeled set every episode. Examples the
    committee agrees on score zero; when they fill the batch they are taken in
    pool order and flagged as fallback queries.
    """

    def choose(hypothesis, descriptions, training, rng, size):
        committee = bagged_committee(
            learner, training, committee_size, int(rng.integers(2**32)), require_all_labels, view
        )
        entropy = vote_entropy(committee, descriptions)
        return [(i, bool(entropy[i] <= 0)) for i in _top(entropy, size)]

    return _run_single_view(
        labeled, pool, n_queries, lambda t: learner.fit(t, view), choose, seed, oracle, batch_size, describe, view
    )


def query_by_committee_nb(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    seed: int,
    oracle: Oracle,
    committee_size: int = 2,
    alpha: float = 1.0,
    vocabulary: Optional[Iterable[int]] = None,
    labels: Optional[Sequence[int]] = None,
    batch_size: int = 1,
    describe: Describe = union_view,
    view: str = UNION_VIEW,
) -> BaselineRun:
    """Query a random pool example on which sampled Naive Bayes members disagree."""
    vocabulary = None if vocabulary is None else sorted(vocabulary)

    def fit(training):
        return train_naive_bayes(training, alpha, vocabulary, labels, view)

    def choose(hypothesis, descriptions, training, rng, size):
        committee = sample_nb_committee(
            training, committee_size, int(rng.integers(2**32)), alpha, vocabulary, labels, view
        )
        disputed = np.flatnonzero(committee_disagreement(committee, descriptions))
        picked = [int(disputed[j]) for j in rng.choice(len(disputed), size=min(size, len(disputed)), replace=False)]
        return _fill_randomly(picked, len(descriptions), size, rng)

    return _run_single_view(labeled, pool, n_queries, fit, choose, seed, oracle, batch_size, describe, view)


def query_by_boosting(*args, **kwargs) -> BaselineRun:
    """Registered so configurations naming it fail with a clear message."""
    raise ContractError("query-by-boosting is out of scope for this package")


def summarize_run(run) -> str:
    """One-line account of a baseline or co-testing run: queries, fallbacks and pool state."""
    parts = [f"{len(run.query_log)} queries", f"{run.fallback_count} fallback"]
    quiet = getattr(run, "quiet_episodes", 0)
    if quiet:
        parts.append(f"{quiet} quiet episodes")
    if run.exhausted:
        parts.append("pool exhausted")
    return ", ".join(parts)


def has_events(run) -> bool:
    return bool(run.fallback_count or getattr(run, "quiet_episodes", 0) or run.exhausted)


__all__ = [
    "BaselineRun",
    "BaselineSnapshot",
    "SingleViewOutput",
    "UNION_VIEW",
    "committee_disagreement",
    "has_events",
    "query_by_bagging",
    "query_by_boosting",
    "query_by_committee_nb",
    "random_sampling",
    "summarize_run",
    "uncertainty_sampling",
    "vote_entropy",
]
