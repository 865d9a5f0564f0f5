"""Selection, output and Naive Bayes results checked against brute-force recomputation."""
import math

import numpy as np
import pytest
from scipy import stats as sstats

from cotest.core import ABSTAIN, FeatureVector, MultiViewExample, Prediction
from cotest.cotesting import (
    ContentionPoint,
    ContentionSet,
    OutputStrategy,
    QueryRecord,
    QueryStrategy,
    combine_predictions,
    select_query,
    view_mistakes,
)
from cotest.harness.stats import LearningCurve, Verdict, compare_point, paired_t_test
from cotest.learners import Hypothesis, train_naive_bayes

TRIALS = 1000
VIEWS = ("v1", "v2", "v3")


class ViolationTable(Hypothesis):
    def __init__(self, table):
        super().__init__("w")
        self.table = table

    def predict(self, description):
        return ABSTAIN

    def count_violations(self, description, prediction):
        return self.table[(description, prediction.label)]


def random_contention(rng, n_views=2):
    """Contention points at increasing pool positions with coarse confidences, so ties are common."""
    n = int(rng.integers(1, 8))
    positions = np.sort(rng.choice(50, size=n, replace=False))
    points = []
    for pos in positions:
        x = MultiViewExample(int(pos), {v: int(pos) for v in (*VIEWS[:n_views], "w")})
        predictions = {
            v: Prediction(j % 2, float(rng.integers(0, 5)) / 4) for j, v in enumerate(VIEWS[:n_views])
        }
        points.append(ContentionPoint(int(pos), x, predictions))
    return ContentionSet(tuple(points))


def first_best(points, score):
    """Highest score, earliest pool position on ties."""
    best = None
    for p in points:
        s = score(p)
        if best is None or s > best[0]:
            best = (s, p)
    return best[1].example.example_id


class TestQuerySelection:
    @pytest.mark.parametrize("n_views", [2, 3])
    def test_aggressive_maximizes_the_smallest_confidence(self, n_views):
        rng = np.random.default_rng(1)
        for _ in range(TRIALS):
            contention = random_contention(rng, n_views)
            expected = first_best(contention, lambda p: min(q.confidence for q in p.predictions.values()))
            assert select_query(QueryStrategy.AGGRESSIVE, contention).example_id == expected

    @pytest.mark.parametrize("n_views", [2, 3])
    def test_conservative_minimizes_the_spread(self, n_views):
        rng = np.random.default_rng(2)
        for _ in range(TRIALS):
            contention = random_contention(rng, n_views)

            def negative_spread(p):
                conf = sorted(q.confidence for q in p.predictions.values())
                return -(conf[-1] - conf[0])

            assert select_query(QueryStrategy.CONSERVATIVE, contention).example_id == first_best(contention, negative_spread)

    def test_weak_aggressive_maximizes_the_fewer_violations(self):
        rng = np.random.default_rng(3)
        for _ in range(TRIALS):
            contention = random_contention(rng)
            table = {(p.position, label): int(rng.integers(0, 5)) for p in contention for label in (0, 1)}
            weak = ViolationTable(table)

            def fewest(p):
                return min(table[(p.position, q.label)] for q in p.predictions.values())

            chosen = select_query(QueryStrategy.WEAK_VIEW_AGGRESSIVE, contention, weak=weak)
            assert chosen.example_id == first_best(contention, fewest)


def random_predictions(rng, with_confidence=True):
    out = {}
    for v in VIEWS:
        if rng.random() < 0.15:
            out[v] = ABSTAIN
        else:
            confidence = float(rng.integers(1, 5)) / 4 if with_confidence else None
            out[v] = Prediction(int(rng.integers(0, 3)), confidence)
    return out


def first_tied(tied, predictions):
    return next(p.label for p in predictions.values() if p.label in tied)


class TestOutputHypotheses:
    def test_weighted_vote(self):
        rng = np.random.default_rng(4)
        for _ in range(TRIALS):
            preds = random_predictions(rng)
            voters = {v: p for v, p in preds.items() if p.label is not None}
            got = combine_predictions(OutputStrategy.WEIGHTED_VOTE, preds)
            if not voters:
                assert got.abstained
                continue
            totals = {}
            for p in voters.values():
                totals[p.label] = totals.get(p.label, 0.0) + p.confidence
            top = max(totals.values())
            assert got.label == first_tied({k for k, s in totals.items() if s == top}, voters)

    def test_majority_vote(self):
        rng = np.random.default_rng(5)
        for _ in range(TRIALS):
            preds = random_predictions(rng, with_confidence=False)
            voters = {v: p for v, p in preds.items() if p.label is not None}
            got = combine_predictions(OutputStrategy.MAJORITY_VOTE, preds)
            if not voters:
                assert got.abstained
                continue
            labels = [p.label for p in voters.values()]
            top = max(labels.count(label) for label in labels)
            assert got.label == first_tied({label for label in labels if labels.count(label) == top}, voters)

    def test_winner_takes_all_from_the_query_log(self):
        rng = np.random.default_rng(6)
        for _ in range(TRIALS):
            log = [
                QueryRecord(i, int(rng.integers(0, 3)), random_predictions(rng, with_confidence=False), i + 1)
                for i in range(int(rng.integers(0, 12)))
            ]
            preds = random_predictions(rng)
            errors = {v: sum(1 for r in log if r.predictions[v].label != r.label) for v in VIEWS}
            winner = min(VIEWS, key=lambda v: (errors[v], VIEWS.index(v)))
            got = combine_predictions(OutputStrategy.WINNER_TAKES_ALL, preds, view_mistakes(log, VIEWS))
            assert got == preds[winner]


class TestNaiveBayes:
    def test_log_space_matches_direct_probabilities(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n_features = int(rng.integers(2, 9))
            labels = [0, 1, 2]
            alpha = float(rng.choice([0.5, 1.0, 2.0]))

            def draw():
                counts = rng.integers(0, 3, size=n_features)
                return {int(i): float(c) for i, c in enumerate(counts) if c}

            training = [(FeatureVector.from_mapping(draw()), int(rng.integers(0, 3))) for _ in range(12)]
            h = train_naive_bayes(training, alpha=alpha, vocabulary=range(n_features), labels=labels)

            priors, theta = [], []
            for c in labels:
                members = [x for x, y in training if y == c]
                priors.append((len(members) + alpha) / (len(training) + alpha * len(labels)))
                words = [sum(x.get(f) for x in members) for f in range(n_features)]
                theta.append([(words[f] + alpha) / (sum(words) + alpha * n_features) for f in range(n_features)])

            samples = [FeatureVector.from_mapping(draw()) for _ in range(10)]
            got = h.posteriors(samples)
            for row, sample in zip(got, samples):
                joint = [priors[c] * math.prod(theta[c][f] ** sample.get(f) for f in range(n_features)) for c in labels]
                expected = [j / sum(joint) for j in joint]
                np.testing.assert_allclose(row, expected, rtol=0, atol=1e-9)
                assert row.sum() == pytest.approx(1.0, abs=1e-12)
            np.testing.assert_allclose(np.exp(h.log_theta).sum(axis=1), 1.0, atol=1e-9)


class TestPairedTTest:
    SUITE = [
        [0.01, 0.03, -0.02, 0.04, 0.00, 0.02, 0.05, -0.01, 0.03, 0.01],
        [0.2, 0.1, 0.15, 0.12, 0.18, 0.11, 0.16, 0.14, 0.13, 0.17],
        [-0.05, -0.02, -0.08, 0.01, -0.04, -0.03, -0.06, -0.01, -0.02, -0.07],
        [0.3, -0.3, 0.2, -0.1, 0.05],
        [0.001 * k for k in range(20)],
    ]

    @pytest.mark.parametrize("diffs", SUITE)
    def test_p_values_match_reference(self, diffs):
        mean, t, p, _ = compare_point(diffs, 0.05)
        d = np.asarray(diffs)
        ref_t = d.mean() / (d.std(ddof=1) / math.sqrt(len(d)))
        assert t == pytest.approx(ref_t, rel=1e-12)
        assert p == pytest.approx(2 * sstats.t.sf(abs(ref_t), len(d) - 1), abs=1e-6)

    def test_identical_curves_are_all_ties(self):
        curve = tuple((6 + i, 0.5 + 0.01 * i) for i in range(30))
        a = [LearningCurve("a", str(f), curve) for f in range(10)]
        b = [LearningCurve("b", str(f), curve) for f in range(10)]
        report = paired_t_test(a, b, points="all")
        assert report.ties == 30 and report.wins == report.losses == 0

    def test_threshold_example(self):
        # mean 0.03, sd 0.04, n 10: t = 0.03 / (0.04 / sqrt(10)) = 2.3717 > 2.262
        z = np.array([1.0, -1.0] * 5)
        z = z / z.std(ddof=1)
        _, t, _, verdict = compare_point(0.03 + 0.04 * z, 0.05)
        assert t == pytest.approx(2.3717, abs=1e-4)
        assert verdict is Verdict.WIN
        _, t, _, verdict = compare_point(0.028 + 0.04 * z, 0.05)
        assert t < 2.262 and verdict is Verdict.TIE
