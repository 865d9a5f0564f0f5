"""Base learners for one view: Naive Bayes, nearest neighbor and a decision tree.

Also builds the committees used by the committee-based baselines.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Protocol, Sequence, runtime_checkable

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp

from cotest.core import Description, FeatureVector, Prediction
from cotest.errors import TrainingError

# (description, label) pairs for a single view
TrainingSet = Sequence[tuple[Description, int]]

MAX_RESAMPLE_ATTEMPTS = 100


class LearnerKind(str, Enum):
    NAIVE_BAYES = "naive_bayes"
    NEAREST_NEIGHBOR = "nearest_neighbor"
    DECISION_TREE = "decision_tree"


class BaseLearnerSpec(BaseModel):
    """Which base learner to train and its hyperparameters."""

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    kind: LearnerKind = LearnerKind.NAIVE_BAYES
    alpha: float = Field(1.0, gt=0, description="Laplace smoothing for Naive Bayes")
    max_depth: int = Field(20, ge=1)
    min_leaf: int = Field(1, ge=1)


class Hypothesis(ABC):
    """A trained single-view classifier."""

    confidence_supported: bool = True

    def __init__(self, view: Optional[str] = None):
        self.view = view

    @abstractmethod
    def predict(self, description: Description) -> Prediction:
        ...

    def predict_batch(self, descriptions: Sequence[Description]) -> list[Prediction]:
        return [self.predict(d) for d in descriptions]


@runtime_checkable
class ViewLearner(Protocol):
    """Anything that turns a single-view training set into a Hypothesis."""

    confidence_supported: bool

    def fit(self, examples: TrainingSet, view: Optional[str] = None) -> Hypothesis:
        ...


def _columns(features: Iterable[int]) -> dict[int, int]:
    return {f: c for c, f in enumerate(sorted(set(features)))}


def _to_matrix(vectors: Sequence[FeatureVector], columns: dict[int, int]) -> sp.csr_matrix:
    rows, cols, data = [], [], []
    for r, vec in enumerate(vectors):
        for f, value in zip(vec.indices, vec.values):
            c = columns.get(f)
            if c is not None:
                rows.append(r)
                cols.append(c)
                data.append(value)
    return sp.csr_matrix((data, (rows, cols)), shape=(len(vectors), len(columns)), dtype=float)


def _check_training_set(examples: TrainingSet) -> None:
    if len(examples) == 0:
        raise TrainingError("cannot train on an empty example set")


def _resolve_labels(examples: TrainingSet, labels: Optional[Sequence[int]]) -> list[int]:
    observed = sorted({y for _, y in examples})
    if labels is None:
        return observed
    labels = sorted(labels)
    unknown = set(observed) - set(labels)
    if unknown:
        raise TrainingError(f"training labels {sorted(unknown)} not in label set {labels}")
    return labels


# ---------------------------------------------------------------- Naive Bayes

@dataclass
class _NaiveBayesCounts:
    columns: dict[int, int]
    labels: list[int]
    word_counts: np.ndarray  # (classes, vocabulary)
    class_counts: np.ndarray
    n_examples: int


def _nb_counts(
    examples: TrainingSet, vocabulary: Optional[Iterable[int]], labels: Optional[Sequence[int]]
) -> _NaiveBayesCounts:
    _check_training_set(examples)
    labels = _resolve_labels(examples, labels)
    vectors = [x for x, _ in examples]
    if vocabulary is None:
        vocabulary = {f for vec in vectors for f in vec.indices}
    columns = _columns(vocabulary)
    label_pos = {label: i for i, label in enumerate(labels)}
    Y = sp.csr_matrix(
        (np.ones(len(examples)), (np.arange(len(examples)), [label_pos[y] for _, y in examples])),
        shape=(len(examples), len(labels)),
    )
    if columns:
        word_counts = np.asarray((Y.T @ _to_matrix(vectors, columns)).todense(), dtype=float)
    else:
        # empty view: prior-only model
        word_counts = np.zeros((len(labels), 0))
    class_counts = np.asarray(Y.sum(axis=0), dtype=float).ravel()
    return _NaiveBayesCounts(columns, labels, word_counts, class_counts, len(examples))


class NaiveBayesHypothesis(Hypothesis):
    """Multinomial Naive Bayes; confidence is the posterior of the predicted class."""

    def __init__(self, columns, labels, log_prior, log_theta, view=None):
        super().__init__(view)
        self.columns = columns
        self.labels = list(labels)
        self.log_prior = np.asarray(log_prior, dtype=float)
        self.log_theta = np.asarray(log_theta, dtype=float)

    def posteriors(self, descriptions: Sequence[FeatureVector]) -> np.ndarray:
        if not self.columns:
            joint = np.tile(self.log_prior, (len(descriptions), 1))
        else:
            X = _to_matrix(descriptions, self.columns)
            joint = np.asarray(X @ self.log_theta.T) + self.log_prior
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def predict_batch(self, descriptions):
        if len(descriptions) == 0:
            return []
        post = self.posteriors(descriptions)
        best = np.argmax(post, axis=1)
        return [
            Prediction(self.labels[b], float(min(1.0, max(0.0, post[i, b]))))
            for i, b in enumerate(best)
        ]

    def predict(self, description):
        return self.predict_batch([description])[0]


def _nb_hypothesis(counts: _NaiveBayesCounts, theta: np.ndarray, alpha: float, view) -> NaiveBayesHypothesis:
    n_labels = len(counts.labels)
    prior = (counts.class_counts + alpha) / (counts.n_examples + alpha * n_labels)
    return NaiveBayesHypothesis(counts.columns, counts.labels, np.log(prior), np.log(theta), view)


def train_naive_bayes(
    examples: TrainingSet,
    alpha: float = 1.0,
    vocabulary: Optional[Iterable[int]] = None,
    labels: Optional[Sequence[int]] = None,
    view: Optional[str] = None,
) -> NaiveBayesHypothesis:
    """Fit multinomial Naive Bayes with Laplace-smoothed word and class probabilities."""
    counts = _nb_counts(examples, vocabulary, labels)
    n_words = counts.word_counts.shape[1]
    theta = (counts.word_counts + alpha) / (counts.word_counts.sum(axis=1, keepdims=True) + alpha * n_words)
    return _nb_hypothesis(counts, theta, alpha, view)


def sample_nb_committee(
    examples: TrainingSet,
    m: int,
    seed: int,
    alpha: float = 1.0,
    vocabulary: Optional[Iterable[int]] = None,
    labels: Optional[Sequence[int]] = None,
    view: Optional[str] = None,
) -> list[NaiveBayesHypothesis]:
    """Draw m Naive Bayes members from the Dirichlet posterior over word parameters.

    Each class row is sampled as normalized Gamma(count + alpha, 1) draws;
    class priors stay at their smoothed point estimate.
    """
    if m < 2:
        raise TrainingError(f"a committee needs at least 2 members, got {m}")
    counts = _nb_counts(examples, vocabulary, labels)
    rng = np.random.default_rng(seed)
    members = []
    for _ in range(m):
        draws = rng.gamma(counts.word_counts + alpha, 1.0)
        theta = draws / draws.sum(axis=1, keepdims=True)
        theta = np.maximum(theta, np.finfo(float).tiny)
        members.append(_nb_hypothesis(counts, theta, alpha, view))
    return members


# ---------------------------------------------------------------- nearest neighbor

class NearestNeighborHypothesis(Hypothesis):
    """1-NN under Euclidean distance; confidence is 1 / (1 + distance)."""

    def __init__(self, columns, train_matrix: sp.csr_matrix, train_labels: Sequence[int], view=None):
        super().__init__(view)
        self.columns = columns
        self.train_matrix = train_matrix
        self.train_labels = list(train_labels)
        self.train_norms = np.asarray(train_matrix.multiply(train_matrix).sum(axis=1)).ravel()

    def predict_batch(self, descriptions):
        if len(descriptions) == 0:
            return []
        X = _to_matrix(descriptions, self.columns)
        # full norm, including features never seen in training
        x_norms = np.array([sum(v * v for v in d.values) for d in descriptions])
        cross = np.asarray((X @ self.train_matrix.T).todense())
        sq = np.maximum(x_norms[:, None] + self.train_norms[None, :] - 2.0 * cross, 0.0)
        nearest = np.argmin(sq, axis=1)
        out = []
        for i, j in enumerate(nearest):
            distance = float(np.sqrt(sq[i, j]))
            out.append(Prediction(self.train_labels[j], 1.0 / (1.0 + distance)))
        return out

    def predict(self, description):
        return self.predict_batch([description])[0]


def train_nearest_neighbor(
    examples: TrainingSet,
    vocabulary: Optional[Iterable[int]] = None,
    view: Optional[str] = None,
) -> NearestNeighborHypothesis:
    _check_training_set(examples)
    vectors = [x for x, _ in examples]
    features = {f for vec in vectors for f in vec.indices}
    if vocabulary is not None:
        features |= set(vocabulary)
    columns = _columns(features)
    return NearestNeighborHypothesis(columns, _to_matrix(vectors, columns), [y for _, y in examples], view)


# ---------------------------------------------------------------- decision tree

@dataclass
class TreeNode:
    label: int
    feature: Optional[int] = None
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy (bits) of class-count rows; 0 log 0 is 0."""
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1)), 0.0)
    return -(p * logs).sum(axis=-1)


class DecisionTreeHypothesis(Hypothesis):
    """Axis-aligned threshold tree. Makes no confidence estimate."""

    confidence_supported = False

    def __init__(self, root: TreeNode, view=None):
        super().__init__(view)
        self.root = root

    @property
    def depth(self) -> int:
        return self.root.depth()

    def predict(self, description):
        values = description.entries
        node = self.root
        while not node.is_leaf:
            node = node.left if values.get(node.feature, 0.0) <= node.threshold else node.right
        return Prediction(node.label)


def train_decision_tree(
    examples: TrainingSet,
    max_depth: int = 20,
    min_leaf: int = 1,
    view: Optional[str] = None,
) -> DecisionTreeHypothesis:
    """Grow an information-gain tree without pruning.

    A node keeps splitting while it is impure and some threshold leaves at
    least ``min_leaf`` examples on both sides, even at zero gain. Ties in gain
    go to the lowest feature id; leaf ties go to the lowest label id.
    """
    _check_training_set(examples)
    vectors = [x for x, _ in examples]
    features = sorted({f for vec in vectors for f in vec.indices})
    labels = sorted({y for _, y in examples})
    label_pos = {label: i for i, label in enumerate(labels)}
    X = _to_matrix(vectors, _columns(features)).toarray()
    y = np.array([label_pos[label] for _, label in examples])
    onehot = np.eye(len(labels))[y]

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        class_counts = onehot[idx].sum(axis=0)
        node = TreeNode(label=labels[int(np.argmax(class_counts))])
        n = len(idx)
        if np.count_nonzero(class_counts) <= 1 or depth >= max_depth or n < 2 * min_leaf:
            return node
        parent = float(_entropy(class_counts))
        best_gain, best = -np.inf, None
        for col in range(X.shape[1]):
            order = np.argsort(X[idx, col], kind="stable")
            values = X[idx[order], col]
            left_counts = np.cumsum(onehot[idx[order]], axis=0)[:-1]
            sizes = np.arange(1, n)
            valid = (values[:-1] != values[1:]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
            if not valid.any():
                continue
            right_counts = class_counts - left_counts
            weighted = (sizes * _entropy(left_counts) + (n - sizes) * _entropy(right_counts)) / n
            gains = np.where(valid, parent - weighted, -np.inf)
            cut = int(np.argmax(gains))
            if gains[cut] > best_gain + 1e-12:
                best_gain = gains[cut]
                best = (col, (values[cut] + values[cut + 1]) / 2.0)
        if best is None:
            return node
        col, threshold = best
        go_left = X[idx, col] <= threshold
        node.feature = features[col]
        node.threshold = float(threshold)
        node.left = grow(idx[go_left], depth + 1)
        node.right = grow(idx[~go_left], depth + 1)
        return node

    return DecisionTreeHypothesis(grow(np.arange(len(examples)), 0), view)


# ---------------------------------------------------------------- learner factory

class Learner:
    """Configured base learner; ``fit`` trains a fresh hypothesis each call."""

    def __init__(
        self,
        spec: BaseLearnerSpec,
        vocabulary: Optional[Iterable[int]] = None,
        labels: Optional[Sequence[int]] = None,
    ):
        self.spec = spec
        self.vocabulary = None if vocabulary is None else sorted(vocabulary)
        self.labels = None if labels is None else list(labels)

    @property
    def confidence_supported(self) -> bool:
        return self.spec.kind is not LearnerKind.DECISION_TREE

    def fit(self, examples: TrainingSet, view: Optional[str] = None) -> Hypothesis:
        kind = self.spec.kind
        if kind is LearnerKind.NAIVE_BAYES:
            return train_naive_bayes(examples, self.spec.alpha, self.vocabulary, self.labels, view)
        if kind is LearnerKind.NEAREST_NEIGHBOR:
            return train_nearest_neighbor(examples, self.vocabulary, view)
        return train_decision_tree(examples, self.spec.max_depth, self.spec.min_leaf, view)

    def __repr__(self) -> str:
        return f"Learner({self.spec.kind.value})"


def make_learner(
    spec: BaseLearnerSpec | LearnerKind | str,
    vocabulary: Optional[Iterable[int]] = None,
    labels: Optional[Sequence[int]] = None,
) -> Learner:
    if not isinstance(spec, BaseLearnerSpec):
        spec = BaseLearnerSpec(kind=LearnerKind(spec))
    return Learner(spec, vocabulary, labels)


def bagged_committee(
    learner: ViewLearner,
    examples: TrainingSet,
    m: int,
    seed: int,
    require_all_labels: bool = True,
    view: Optional[str] = None,
) -> list[Hypothesis]:
    """Train m members on bootstrap resamples of ``examples``.

    With ``require_all_labels`` a resample missing any label present in
    ``examples`` is redrawn; resamples the learner cannot fit are redrawn too.
    """
    if m < 2:
        raise TrainingError(f"a committee needs at least 2 members, got {m}")
    _check_training_set(examples)
    rng = np.random.default_rng(seed)
    present = {y for _, y in examples}
    n = len(examples)
    members = []
    for member in range(m):
        for _ in range(MAX_RESAMPLE_ATTEMPTS):
            sample = [examples[i] for i in rng.integers(0, n, size=n)]
            if require_all_labels and {y for _, y in sample} != present:
                continue
            try:
                members.append(learner.fit(sample, view))
                break
            except TrainingError:
                continue
        else:
            raise TrainingError(
                f"cannot form a class-complete resample for member {member} "
                f"after {MAX_RESAMPLE_ATTEMPTS} attempts"
            )
    return members


__all__ = [
    "BaseLearnerSpec",
    "DecisionTreeHypothesis",
    "Hypothesis",
    "Learner",
    "LearnerKind",
    "NaiveBayesHypothesis",
    "NearestNeighborHypothesis",
    "TreeNode",
    "ViewLearner",
    "bagged_committee",
    "make_learner",
    "sample_nb_committee",
    "train_decision_tree",
    "train_naive_bayes",
    "train_nearest_neighbor",
]
