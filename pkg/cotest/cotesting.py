"""Multi-view active learning: contention points, query selection and output hypotheses."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union, runtime_checkable

import numpy as np

from cotest.core import ABSTAIN, Description, MultiViewExample, Prediction, ViewSpec, derive_rng, project
from cotest.errors import ContractError, DatasetError, NoContentionError
from cotest.learners import Hypothesis, ViewLearner

Oracle = Callable[[MultiViewExample], int]
SeedLike = Union[int, np.random.Generator]


class QueryStrategy(str, Enum):
    NAIVE = "naive"
    AGGRESSIVE = "aggressive"
    CONSERVATIVE = "conservative"
    WEAK_VIEW_AGGRESSIVE = "weak_view_aggressive"
    WEAK_VIEW_CONFIDENT = "weak_view_confident"
    POOL_RANDOM = "pool_random"


class OutputStrategy(str, Enum):
    WEIGHTED_VOTE = "weighted_vote"
    MAJORITY_VOTE = "majority_vote"
    WINNER_TAKES_ALL = "winner_takes_all"
    WEAK_TIEBREAK_VOTE = "weak_tiebreak_vote"


CONFIDENCE_QUERIES = {QueryStrategy.AGGRESSIVE, QueryStrategy.CONSERVATIVE}


@runtime_checkable
class ViolationCounter(Protocol):
    """A weak-view hypothesis that scores how implausible a prediction looks."""

    def count_violations(self, description: Description, prediction: Prediction) -> int:
        ...


@dataclass(frozen=True)
class QueryRecord:
    """One oracle query with the predictions every view made at selection time."""

    example_id: int
    label: int
    predictions: Mapping[str, Prediction]
    episode: int
    fallback: bool = False

    def mistaken(self, view: str) -> bool:
        prediction = self.predictions.get(view)
        return prediction is not None and prediction.label != self.label


@dataclass(frozen=True)
class ContentionPoint:
    position: int
    example: MultiViewExample
    predictions: Mapping[str, Prediction]


@dataclass(frozen=True)
class ContentionSet:
    points: tuple[ContentionPoint, ...] = ()

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def examples(self) -> list[MultiViewExample]:
        return [p.example for p in self.points]


def _disagree(predictions: Sequence[Prediction]) -> bool:
    labels = [p.label for p in predictions]
    # an abstention disagrees with everything, another abstention included
    return any(label is None for label in labels) or len(set(labels)) > 1


def predict_pool(
    hypotheses: Mapping[str, Hypothesis], pool: Sequence[MultiViewExample]
) -> dict[str, list[Prediction]]:
    return {view: h.predict_batch([project(x, view) for x in pool]) for view, h in hypotheses.items()}


def contention_points(
    hypotheses: Mapping[str, Hypothesis],
    pool: Sequence[MultiViewExample],
    predictions: Optional[Mapping[str, Sequence[Prediction]]] = None,
) -> ContentionSet:
    """Members of ``pool`` on which the strong-view hypotheses do not all agree."""
    if len(hypotheses) < 2:
        raise ContractError(f"contention needs at least 2 strong views, got {len(hypotheses)}")
    if predictions is None:
        predictions = predict_pool(hypotheses, pool)
    points = []
    for i, x in enumerate(pool):
        per_view = {view: predictions[view][i] for view in hypotheses}
        if _disagree(list(per_view.values())):
            points.append(ContentionPoint(i, x, per_view))
    return ContentionSet(tuple(points))


def _confidences(point: ContentionPoint) -> list[float]:
    values = [p.confidence for p in point.predictions.values()]
    if any(v is None for v in values):
        raise ContractError(
            f"example {point.example.example_id}: confidence-based selection needs every view to report confidence"
        )
    return values


def _require_counter(weak: Optional[Hypothesis]) -> ViolationCounter:
    if weak is None or not isinstance(weak, ViolationCounter):
        raise ContractError("weak-view selection needs a weak-view hypothesis that counts violations")
    return weak


def rank_contention(
    strategy: QueryStrategy,
    contention: ContentionSet,
    seed: SeedLike,
    k: int = 1,
    weak: Optional[Hypothesis] = None,
) -> list[ContentionPoint]:
    """Pick up to ``k`` contention points in selection order.

    Deterministic strategies break score ties by pool position.
    """
    points = list(contention)
    if not points:
        return []
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    strategy = QueryStrategy(strategy)

    if strategy in (QueryStrategy.NAIVE, QueryStrategy.POOL_RANDOM):
        chosen = rng.choice(len(points), size=min(k, len(points)), replace=False)
        return [points[int(i)] for i in chosen]

    if strategy is QueryStrategy.AGGRESSIVE:
        scored = [(-min(_confidences(p)), p.position, p) for p in points]
    elif strategy is QueryStrategy.CONSERVATIVE:
        scored = []
        for p in points:
            conf = _confidences(p)
            scored.append((max(conf) - min(conf), p.position, p))
    elif strategy is QueryStrategy.WEAK_VIEW_AGGRESSIVE:
        counter = _require_counter(weak)
        scored = []
        for p in points:
            description = project(p.example, weak.view)
            fewest = min(counter.count_violations(description, pred) for pred in p.predictions.values())
            scored.append((-fewest, p.position, p))
    elif strategy is QueryStrategy.WEAK_VIEW_CONFIDENT:
        if weak is None or not weak.confidence_supported:
            raise ContractError("weak_view_confident needs a confidence-reporting weak-view hypothesis")
        scored = []
        for p in points:
            weak_prediction = weak.predict(project(p.example, weak.view))
            strong_labels = {pred.label for pred in p.predictions.values()}
            if weak_prediction.label is not None and weak_prediction.label not in strong_labels:
                scored.append((-(weak_prediction.confidence or 0.0), p.position, p))
        if not scored:
            return rank_contention(QueryStrategy.NAIVE, contention, rng, k)
    else:
        raise ContractError(f"strategy {strategy.value} does not rank contention points")

    scored.sort(key=lambda item: (item[0], item[1]))
    return [p for _, _, p in scored[:k]]


def select_query(
    strategy: QueryStrategy,
    contention: ContentionSet,
    hypotheses: Optional[Mapping[str, Hypothesis]] = None,
    weak: Optional[Hypothesis] = None,
    seed: SeedLike = 0,
) -> MultiViewExample:
    """Choose the single contention point to hand to the oracle.

    ``hypotheses`` is accepted for symmetry with the loop; every score the
    strategies need is already carried by the contention points.
    """
    if len(contention) == 0:
        raise NoContentionError("no contention points to choose from")
    if hypotheses is not None and QueryStrategy(strategy) in CONFIDENCE_QUERIES:
        lacking = [v for v, h in hypotheses.items() if not h.confidence_supported]
        if lacking:
            raise ContractError(f"views {lacking} do not report confidence")
    return rank_contention(strategy, contention, seed, 1, weak)[0].example


# ---------------------------------------------------------------- output hypotheses

def view_mistakes(query_log: Sequence[QueryRecord], views: Sequence[str]) -> dict[str, int]:
    """Per view, how many queried examples it mislabeled when they were selected."""
    return {view: sum(1 for record in query_log if record.mistaken(view)) for view in views}


def _vote_margin(scores: Mapping[int, float]) -> float:
    ordered = sorted(scores.values(), reverse=True)
    total = sum(ordered)
    if total <= 0:
        return 0.0
    second = ordered[1] if len(ordered) > 1 else 0.0
    return (ordered[0] - second) / total


def _first_in_view_order(tied: set, predictions: Mapping[str, Prediction]) -> int:
    for prediction in predictions.values():
        if prediction.label in tied:
            return prediction.label
    raise AssertionError("tied label not predicted by any view")


def combine_predictions(
    strategy: OutputStrategy,
    predictions: Mapping[str, Prediction],
    mistakes: Optional[Mapping[str, int]] = None,
    weak: Optional[Hypothesis] = None,
    weak_description: Optional[Description] = None,
) -> Prediction:
    """Merge strong-view predictions (in view order) into one Prediction."""
    strategy = OutputStrategy(strategy)
    voters = {view: p for view, p in predictions.items() if not p.abstained}

    if strategy is OutputStrategy.WINNER_TAKES_ALL:
        if mistakes is None:
            raise ContractError("winner_takes_all needs the query log")
        best = min(predictions, key=lambda view: (mistakes.get(view, 0), list(predictions).index(view)))
        return predictions[best]

    if not voters:
        return ABSTAIN

    if strategy is OutputStrategy.WEIGHTED_VOTE:
        scores: dict[int, float] = {}
        for view, p in voters.items():
            if p.confidence is None:
                raise ContractError(f"weighted vote needs confidence from view '{view}'")
            scores[p.label] = scores.get(p.label, 0.0) + p.confidence
        top = max(scores.values())
        winner = _first_in_view_order({lbl for lbl, s in scores.items() if s == top}, voters)
        return Prediction(winner, _vote_margin(scores))

    counts = Counter(p.label for p in voters.values())
    top = max(counts.values())
    tied = {label for label, c in counts.items() if c == top}

    if strategy is OutputStrategy.MAJORITY_VOTE:
        winner = _first_in_view_order(tied, voters)
        margin = None
        if all(p.confidence is not None for p in voters.values()):
            margin = _vote_margin({label: float(c) for label, c in counts.items()})
        return Prediction(winner, margin)

    if strategy is OutputStrategy.WEAK_TIEBREAK_VOTE:
        if weak is None:
            raise ContractError("weak_tiebreak_vote needs a weak-view hypothesis")
        if len(tied) == 1:
            return Prediction(next(iter(tied)))
        if isinstance(weak, ViolationCounter):
            candidates = [(view, p) for view, p in voters.items() if p.label in tied]
            view, best = min(
                candidates,
                key=lambda vp: (weak.count_violations(weak_description, vp[1]), list(voters).index(vp[0])),
            )
            return Prediction(best.label)
        weak_label = weak.predict(weak_description).label
        if weak_label in tied:
            return Prediction(weak_label)
        return Prediction(_first_in_view_order(tied, voters))

    raise ContractError(f"unknown output strategy {strategy}")


@dataclass
class OutputHypothesis:
    """Final classifier combining the strong-view hypotheses."""

    strategy: OutputStrategy
    hypotheses: Mapping[str, Hypothesis]
    weak: Optional[Hypothesis] = None
    query_log: Sequence[QueryRecord] = ()

    def __post_init__(self):
        self._mistakes = view_mistakes(self.query_log, list(self.hypotheses))

    def _weak_description(self, example: MultiViewExample):
        return None if self.weak is None else project(example, self.weak.view)

    def predict(self, example: MultiViewExample) -> Prediction:
        return self.predict_batch([example])[0]

    def predict_batch(self, examples: Sequence[MultiViewExample]) -> list[Prediction]:
        per_view = predict_pool(self.hypotheses, examples)
        return [
            combine_predictions(
                self.strategy,
                {view: per_view[view][i] for view in self.hypotheses},
                self._mistakes,
                self.weak,
                self._weak_description(x),
            )
            for i, x in enumerate(examples)
        ]


def output_predict(
    strategy: OutputStrategy,
    hypotheses: Mapping[str, Hypothesis],
    weak: Optional[Hypothesis],
    query_log: Optional[Sequence[QueryRecord]],
    example: MultiViewExample,
) -> Prediction:
    if OutputStrategy(strategy) is OutputStrategy.WINNER_TAKES_ALL and query_log is None:
        raise ContractError("winner_takes_all needs the query log")
    return OutputHypothesis(OutputStrategy(strategy), hypotheses, weak, query_log or ()).predict(example)


def evaluate(model, test: Sequence[MultiViewExample]) -> float:
    """Accuracy of ``model`` (anything with predict/predict_batch) on labeled test examples."""
    if len(test) == 0:
        raise DatasetError("cannot evaluate on an empty test set")
    if hasattr(model, "predict_batch"):
        predictions = model.predict_batch(list(test))
    else:
        predictions = [model.predict(x) for x in test]
    correct = sum(1 for p, x in zip(predictions, test) if p.label is not None and p.label == x.label)
    return correct / len(test)


# ---------------------------------------------------------------- the loop

@dataclass(frozen=True)
class Snapshot:
    episode: int
    labeled_count: int
    hypotheses: Mapping[str, Hypothesis]
    weak: Optional[Hypothesis]
    n_queries: int

    def output(self, strategy: OutputStrategy, query_log: Sequence[QueryRecord]) -> OutputHypothesis:
        return OutputHypothesis(OutputStrategy(strategy), self.hypotheses, self.weak, tuple(query_log[: self.n_queries]))


@dataclass
class CoTestingRun:
    hypotheses: Mapping[str, Hypothesis]
    weak: Optional[Hypothesis]
    query_log: tuple[QueryRecord, ...]
    output: OutputHypothesis
    snapshots: list[Snapshot]
    output_strategy: OutputStrategy
    exhausted: bool = False
    events: list[str] = field(default_factory=list)

    @property
    def fallback_count(self) -> int:
        return sum(1 for record in self.query_log if record.fallback)

    def view_mistakes(self) -> dict[str, int]:
        return view_mistakes(self.query_log, list(self.hypotheses))

    def snapshot_outputs(self) -> list[tuple[Snapshot, OutputHypothesis]]:
        return [(s, s.output(self.output_strategy, self.query_log)) for s in self.snapshots]


def _check_capabilities(
    view_spec: ViewSpec,
    learners: Mapping[str, ViewLearner],
    query_strategy: QueryStrategy,
    output_strategy: OutputStrategy,
) -> tuple[list[str], Optional[str]]:
    strong = view_spec.strong_ids
    if len(strong) < 2:
        raise ContractError(f"co-testing needs at least 2 strong views, got {strong}")
    missing = [v for v in strong if v not in learners]
    if missing:
        raise ContractError(f"no learner configured for strong views {missing}")
    weak_views = [v for v in view_spec.weak_ids if v in learners]
    weak_view = weak_views[0] if weak_views else None

    if query_strategy in CONFIDENCE_QUERIES or output_strategy is OutputStrategy.WEIGHTED_VOTE:
        lacking = [v for v in strong if not learners[v].confidence_supported]
        if lacking:
            name = query_strategy.value if query_strategy in CONFIDENCE_QUERIES else output_strategy.value
            raise ContractError(f"{name} needs confidence estimates but views {lacking} do not provide them")
    needs_weak = query_strategy in (QueryStrategy.WEAK_VIEW_AGGRESSIVE, QueryStrategy.WEAK_VIEW_CONFIDENT) or (
        output_strategy is OutputStrategy.WEAK_TIEBREAK_VOTE
    )
    if needs_weak and weak_view is None:
        raise ContractError(f"{query_strategy.value}/{output_strategy.value} needs a learner for a weak view")
    if query_strategy is QueryStrategy.WEAK_VIEW_CONFIDENT and not learners[weak_view].confidence_supported:
        raise ContractError("weak_view_confident needs a confidence-reporting weak-view learner")
    return strong, weak_view


def _train(
    learners: Mapping[str, ViewLearner],
    views: Sequence[str],
    weak_view: Optional[str],
    labeled: Sequence[MultiViewExample],
) -> tuple[dict[str, Hypothesis], Optional[Hypothesis]]:
    hypotheses = {v: learners[v].fit([(project(x, v), x.label) for x in labeled], v) for v in views}
    weak = None
    if weak_view is not None:
        weak = learners[weak_view].fit([(project(x, weak_view), x.label) for x in labeled], weak_view)
    return hypotheses, weak


def run_cotesting(
    view_spec: ViewSpec,
    learners: Mapping[str, ViewLearner],
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    query_strategy: QueryStrategy,
    output_strategy: OutputStrategy,
    seed: int,
    oracle: Oracle,
    batch_size: int = 1,
) -> CoTestingRun:
    """Run the co-testing loop for up to ``n_queries`` oracle queries.

    Each episode retrains one hypothesis per view on the labeled set, finds
    the contention points in the pool, queries up to ``batch_size`` of them
    and moves them to the labeled set. When there are fewer contention points
    than the batch needs, the rest are drawn at random from the pool and
    flagged as fallback queries. A snapshot is taken before the first query
    and after every episode.
    """
    query_strategy = QueryStrategy(query_strategy)
    output_strategy = OutputStrategy(output_strategy)
    if n_queries < 0 or batch_size < 1:
        raise ValueError(f"n_queries must be >= 0 and batch_size >= 1, got {n_queries}, {batch_size}")
    if not labeled:
        raise DatasetError("co-testing needs a non-empty initial labeled set")
    strong, weak_view = _check_capabilities(view_spec, learners, query_strategy, output_strategy)

    labeled = list(labeled)
    pool = list(pool)
    log: list[QueryRecord] = []
    events: list[str] = []

    hypotheses, weak = _train(learners, strong, weak_view, labeled)
    if query_strategy is QueryStrategy.WEAK_VIEW_AGGRESSIVE:
        _require_counter(weak)
    snapshots = [Snapshot(0, len(labeled), hypotheses, weak, 0)]

    remaining = n_queries
    episode = 0
    exhausted = False
    while remaining > 0:
        if not pool:
            exhausted = True
            events.append(f"pool exhausted after {len(log)} queries")
            break
        episode += 1
        rng = derive_rng(seed, "episode", episode)
        size = min(batch_size, remaining, len(pool))
        predictions = predict_pool(hypotheses, pool)

        if query_strategy is QueryStrategy.POOL_RANDOM:
            chosen = [(int(i), False) for i in rng.choice(len(pool), size=size, replace=False)]
        else:
            contention = contention_points(hypotheses, pool, predictions)
            chosen = [(p.position, False) for p in rank_contention(query_strategy, contention, rng, size, weak)]
            if len(chosen) < size:
                if not contention:
                    events.append(f"episode {episode}: no contention points, random fallback")
                taken = {pos for pos, _ in chosen}
                rest = [i for i in range(len(pool)) if i not in taken]
                extra = rng.choice(len(rest), size=size - len(chosen), replace=False)
                chosen.extend((rest[int(i)], True) for i in extra)

        for position, fallback in chosen:
            x = pool[position]
            label = oracle(x)
            made = {view: predictions[view][position] for view in strong}
            if weak is not None:
                made[weak_view] = weak.predict(project(x, weak_view))
            log.append(QueryRecord(x.example_id, label, made, episode, fallback))
            labeled.append(x.with_label(label))
        taken = {position for position, _ in chosen}
        pool = [x for i, x in enumerate(pool) if i not in taken]
        remaining -= len(chosen)

        hypotheses, weak = _train(learners, strong, weak_view, labeled)
        snapshots.append(Snapshot(episode, len(labeled), hypotheses, weak, len(log)))

    query_log = tuple(log)
    return CoTestingRun(
        hypotheses=hypotheses,
        weak=weak,
        query_log=query_log,
        output=OutputHypothesis(output_strategy, hypotheses, weak, query_log),
        snapshots=snapshots,
        output_strategy=output_strategy,
        exhausted=exhausted,
        events=events,
    )
