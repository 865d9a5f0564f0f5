"""Co-testing for wrapper induction: task files, view learners and the extraction loops."""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from cotest import baselines
from cotest.core import ABSTAIN, MultiViewExample, Prediction, Strength, View, ViewSpec, project
from cotest.cotesting import CoTestingRun, Oracle, OutputStrategy, QueryStrategy, run_cotesting
from cotest.errors import DatasetError
from cotest.learners import Hypothesis
from cotest.wrapper.content import ContentPattern, learn_content_pattern, violations
from cotest.wrapper.rules import Direction, ExtractionPrediction, LandmarkRule, apply_rule, learn_rule
from cotest.wrapper.tokens import Boundary, TokenSequence, item_span, tokenize

FORWARD_VIEW = "forward"
BACKWARD_VIEW = "backward"
CONTENT_VIEW = "content"
WRAPPER_COMMITTEE_SIZE = 10

WRAPPER_VIEWS = ViewSpec(
    (
        View(FORWARD_VIEW, frozenset(), Strength.STRONG),
        View(BACKWARD_VIEW, frozenset(), Strength.STRONG),
        View(CONTENT_VIEW, frozenset(), Strength.WEAK),
    )
)


class WrapperMode(str, Enum):
    NAIVE = "naive"
    AGGRESSIVE = "aggressive"


# ---------------------------------------------------------------- task files

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {v[1]: k for k, v in _ESCAPES.items()}
_ESCAPE_RE = re.compile(r"\\(.)", re.S)


def _escape(raw: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in raw)


def _unescape(text: str, line: int) -> str:
    def sub(match):
        ch = match.group(1)
        if ch not in _UNESCAPES:
            raise DatasetError(f"unknown escape '\\{ch}'", line)
        return _UNESCAPES[ch]

    return _ESCAPE_RE.sub(sub, text)


@dataclass(frozen=True)
class LabeledDocument:
    doc_id: str
    tokens: TokenSequence
    start: int
    end: Optional[int] = None

    def __post_init__(self):
        n = len(self.tokens)
        if not 0 <= self.start <= n:
            raise DatasetError(f"document {self.doc_id}: start {self.start} outside 0..{n}")
        if self.end is not None and not self.start <= self.end <= n:
            raise DatasetError(f"document {self.doc_id}: end {self.end} outside {self.start}..{n}")

    def target(self, boundary: Boundary) -> int:
        if Boundary(boundary) is Boundary.START:
            return self.start
        if self.end is None:
            return item_span(self.tokens, self.start, Boundary.START)[1]
        return self.end


@dataclass(frozen=True)
class WrapperTask:
    """One extraction task: documents from a single site, each with the item located."""

    name: str
    item: str
    documents: tuple[LabeledDocument, ...]
    boundary: Boundary = Boundary.START

    def __len__(self) -> int:
        return len(self.documents)

    def examples(self) -> list[MultiViewExample]:
        """Documents as labeled multi-view examples; the label is the target token index."""
        return [
            MultiViewExample(
                example_id=i,
                views={view: doc.tokens for view in WRAPPER_VIEWS.ids},
                label=doc.target(self.boundary),
            )
            for i, doc in enumerate(self.documents)
        ]


def load_wrapper_task(path: Union[str, Path], boundary: Boundary = Boundary.START) -> WrapperTask:
    """Read ``item<TAB>name`` then ``doc_id<TAB>raw<TAB>start[<TAB>end]`` records."""
    path = Path(path)
    item, documents = None, []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if item is None:
                if len(fields) != 2 or fields[0] != "item":
                    raise DatasetError("first record must be 'item<TAB><name>'", lineno)
                item = fields[1]
                continue
            if len(fields) not in (3, 4):
                raise DatasetError(f"expected 3 or 4 tab-separated fields, got {len(fields)}", lineno)
            try:
                start = int(fields[2])
                end = int(fields[3]) if len(fields) == 4 else None
            except ValueError:
                raise DatasetError("token indices must be integers", lineno) from None
            try:
                documents.append(LabeledDocument(fields[0], tokenize(_unescape(fields[1], lineno)), start, end))
            except DatasetError as exc:
                raise DatasetError(str(exc), lineno) from None
    if item is None:
        raise DatasetError(f"{path}: missing item header")
    if not documents:
        raise DatasetError(f"{path}: no documents")
    return WrapperTask(path.stem, item, tuple(documents), Boundary(boundary))


def write_wrapper_task(task: WrapperTask, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"item\t{task.item}\n")
        for doc in task.documents:
            record = [doc.doc_id, _escape(doc.tokens.raw), str(doc.start)]
            if doc.end is not None:
                record.append(str(doc.end))
            fh.write("\t".join(record) + "\n")


# ---------------------------------------------------------------- view learners

class RuleHypothesis(Hypothesis):
    """A landmark rule used as a view hypothesis; predicts the extraction index."""

    confidence_supported = False

    def __init__(self, rule: LandmarkRule, boundary: Boundary = Boundary.START, view: Optional[str] = None):
        super().__init__(view)
        self.rule = rule
        self.boundary = boundary
        # id(document) -> (document, extraction); holding the document keeps its id unique
        self._extracted: dict[int, tuple[TokenSequence, ExtractionPrediction]] = {}

    def extract(self, tokens: TokenSequence) -> ExtractionPrediction:
        hit = self._extracted.get(id(tokens))
        if hit is not None and hit[0] is tokens:
            return hit[1]
        extraction = apply_rule(self.rule, tokens, self.boundary)
        self._extracted[id(tokens)] = (tokens, extraction)
        return extraction

    def predict(self, tokens: TokenSequence) -> Prediction:
        return Prediction(self.extract(tokens).index)

    def __repr__(self) -> str:
        return f"RuleHypothesis({self.rule})"


class RuleLearner:
    confidence_supported = False

    def __init__(self, direction: Direction, boundary: Boundary = Boundary.START):
        self.direction = Direction(direction)
        self.boundary = Boundary(boundary)
        self._fitted: dict[tuple[LandmarkRule, Optional[str]], RuleHypothesis] = {}

    def fit(self, examples, view: Optional[str] = None) -> RuleHypothesis:
        """Learn a rule; a rule this learner produced before returns that hypothesis and its extractions."""
        key = (learn_rule(list(examples), self.direction), view)
        if key not in self._fitted:
            self._fitted[key] = RuleHypothesis(key[0], self.boundary, view)
        return self._fitted[key]

    def __repr__(self) -> str:
        return f"RuleLearner({self.direction.value})"


class ContentPatternHypothesis(Hypothesis):
    """Weak view: never locates items itself, only scores candidate extractions."""

    confidence_supported = False

    def __init__(self, pattern: ContentPattern, boundary: Boundary = Boundary.START, view: Optional[str] = None):
        super().__init__(view)
        self.pattern = pattern
        self.boundary = boundary

    def predict(self, tokens: TokenSequence) -> Prediction:
        return ABSTAIN

    def count_violations(self, tokens: TokenSequence, prediction: Prediction) -> int:
        if prediction.label is None:
            return violations(self.pattern, None)
        start, stop = item_span(tokens, prediction.label, self.boundary)
        return violations(self.pattern, tokens.tokens[start:stop])


class ContentPatternLearner:
    confidence_supported = False

    def __init__(self, boundary: Boundary = Boundary.START):
        self.boundary = Boundary(boundary)

    def fit(self, examples, view: Optional[str] = None) -> ContentPatternHypothesis:
        positives = []
        for tokens, index in examples:
            start, stop = item_span(tokens, index, self.boundary)
            positives.append(tokens.tokens[start:stop])
        return ContentPatternHypothesis(learn_content_pattern(positives), self.boundary, view)


# ---------------------------------------------------------------- loops

@dataclass
class WrapperRun:
    """Result of an extraction learning run and the rules it ended with."""

    run: Union[CoTestingRun, baselines.BaselineRun]
    boundary: Boundary

    @property
    def query_log(self):
        return self.run.query_log

    @property
    def forward_rule(self) -> Optional[LandmarkRule]:
        hyp = getattr(self.run, "hypotheses", {}).get(FORWARD_VIEW)
        return None if hyp is None else hyp.rule

    @property
    def backward_rule(self) -> Optional[LandmarkRule]:
        hyp = getattr(self.run, "hypotheses", {}).get(BACKWARD_VIEW)
        return None if hyp is None else hyp.rule

    @property
    def pattern(self) -> Optional[ContentPattern]:
        weak = getattr(self.run, "weak", None)
        return None if weak is None else weak.pattern

    @property
    def output(self):
        return self.run.output

    @property
    def snapshots(self):
        return self.run.snapshots

    def snapshot_outputs(self):
        return self.run.snapshot_outputs()

    def extract(self, example: MultiViewExample) -> ExtractionPrediction:
        """Item extracted by the output hypothesis, as index and text."""
        index = self.output.predict(example).label
        if index is None:
            return ExtractionPrediction()
        tokens = project(example, FORWARD_VIEW)
        start, stop = item_span(tokens, index, self.boundary)
        return ExtractionPrediction(index, tokens.span_text(start, stop))


def _rule_learners(boundary: Boundary) -> dict:
    return {
        FORWARD_VIEW: RuleLearner(Direction.FORWARD, boundary),
        BACKWARD_VIEW: RuleLearner(Direction.BACKWARD, boundary),
    }


def run_wrapper_cotesting(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    mode: WrapperMode,
    seed: int,
    oracle: Oracle,
    boundary: Boundary = Boundary.START,
) -> WrapperRun:
    """Naive mode queries a random contention point and keeps the rule with fewer mistakes;
    aggressive mode queries the point whose better extraction breaks the most content
    constraints and settles disagreements by fewer violations.
    """
    mode = WrapperMode(mode)
    learners = _rule_learners(boundary)
    if mode is WrapperMode.NAIVE:
        query, output = QueryStrategy.NAIVE, OutputStrategy.WINNER_TAKES_ALL
    else:
        learners[CONTENT_VIEW] = ContentPatternLearner(boundary)
        query, output = QueryStrategy.WEAK_VIEW_AGGRESSIVE, OutputStrategy.WEAK_TIEBREAK_VOTE
    run = run_cotesting(WRAPPER_VIEWS, learners, labeled, pool, n_queries, query, output, seed, oracle)
    return WrapperRun(run, Boundary(boundary))


def run_wrapper_random(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    seed: int,
    oracle: Oracle,
    boundary: Boundary = Boundary.START,
) -> WrapperRun:
    """Naive co-testing with queries drawn from the whole pool instead of the contention points."""
    run = run_cotesting(
        WRAPPER_VIEWS,
        _rule_learners(boundary),
        labeled,
        pool,
        n_queries,
        QueryStrategy.POOL_RANDOM,
        OutputStrategy.WINNER_TAKES_ALL,
        seed,
        oracle,
    )
    return WrapperRun(run, Boundary(boundary))


def run_wrapper_query_by_bagging(
    labeled: Sequence[MultiViewExample],
    pool: Sequence[MultiViewExample],
    n_queries: int,
    seed: int,
    oracle: Oracle,
    view: str = FORWARD_VIEW,
    committee_size: int = WRAPPER_COMMITTEE_SIZE,
    boundary: Boundary = Boundary.START,
) -> WrapperRun:
    """Query-by-bagging over one rule direction; committee members are rules learned on resamples."""
    direction = Direction.FORWARD if view == FORWARD_VIEW else Direction.BACKWARD
    run = baselines.query_by_bagging(
        labeled,
        pool,
        n_queries,
        RuleLearner(direction, boundary),
        seed,
        oracle,
        committee_size=committee_size,
        describe=lambda x: project(x, view),
        view=view,
        require_all_labels=False,
    )
    return WrapperRun(run, Boundary(boundary))


def queries_to_perfect(points: Sequence[tuple[int, float]]) -> Optional[int]:
    """Fewest queries after which test accuracy is 100%, or None when never reached.

    ``points`` are (queries made, accuracy) pairs in query order.
    """
    for queries, accuracy in points:
        if accuracy >= 1.0 - 1e-12:
            return queries
    return None
