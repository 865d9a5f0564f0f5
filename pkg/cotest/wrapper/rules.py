"""Landmark extraction rules: application and greedy induction.

A rule is a chain of landmarks. A forward rule skips from the start of the
document to the end of each landmark in turn and extracts at the position
right after the last one. A backward rule does the same on the reversed
token stream, so its result is the position where the last landmark
(in application order) begins.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

from cotest.errors import InconsistentTrainingSetError, TrainingError
from cotest.wrapper.tokens import SPECIFICITY, Boundary, Token, TokenClass, TokenIndex, TokenSequence, item_span

MAX_LANDMARK_TOKENS = 3
MAX_LANDMARKS = 3
BEAM_WIDTH = 3
MAX_CANDIDATE_ENDS = 12
RULE_CACHE_SIZE = 4096


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class Matcher:
    """Matches a token by exact text or by token class."""

    literal: Optional[str] = None
    token_class: Optional[TokenClass] = None

    def __post_init__(self):
        if (self.literal is None) == (self.token_class is None):
            raise ValueError("a matcher is either a literal or a token class")

    def matches(self, token: Token) -> bool:
        if self.literal is not None:
            return token.text == self.literal
        return self.token_class in token.classes

    @property
    def is_wildcard(self) -> bool:
        return self.token_class is not None

    def __str__(self) -> str:
        return self.literal if self.literal is not None else f"_{self.token_class.value}_"


def literal(text: str) -> Matcher:
    return Matcher(literal=text)


def wildcard(token_class: TokenClass | str) -> Matcher:
    return Matcher(token_class=TokenClass(token_class))


Landmark = tuple[Matcher, ...]


def landmark(*items: str | TokenClass | Matcher) -> Landmark:
    """Build a landmark; TokenClass items become wildcards, strings literals."""
    out = []
    for item in items:
        if isinstance(item, Matcher):
            out.append(item)
        elif isinstance(item, TokenClass):
            out.append(wildcard(item))
        else:
            out.append(literal(item))
    return tuple(out)


@dataclass(frozen=True)
class LandmarkRule:
    direction: Direction
    landmarks: tuple[Landmark, ...]

    def __post_init__(self):
        if not self.landmarks or any(len(lm) == 0 for lm in self.landmarks):
            raise ValueError("a rule needs at least one landmark and no empty landmarks")

    def __str__(self) -> str:
        verb = "SkipTo" if self.direction is Direction.FORWARD else "BackTo"
        return " ".join(f"{verb}({' '.join(str(m) for m in lm)})" for lm in self.landmarks)


@dataclass(frozen=True)
class ExtractionPrediction:
    """Extraction index and text, or both None when the rule abstains."""

    index: Optional[int] = None
    text: Optional[str] = None

    def __post_init__(self):
        if (self.index is None) != (self.text is None):
            raise ValueError("index and text must both be set or both be None")

    @property
    def abstained(self) -> bool:
        return self.index is None


def common_matcher(tokens: Sequence[Token]) -> Optional[Matcher]:
    """Literal if every token has the same text, else the most specific shared class."""
    texts = {t.text for t in tokens}
    if len(texts) == 1:
        return literal(texts.pop())
    shared = frozenset.intersection(*(t.classes for t in tokens))
    for cls in SPECIFICITY:
        if cls in shared:
            return wildcard(cls)
    return None


def _match_at(tokens: Sequence[Token], lm: Landmark, start: int) -> bool:
    return all(m.matches(tokens[start + j]) for j, m in enumerate(lm))


def _positions(index: TokenIndex, m: Matcher) -> tuple[int, ...]:
    if m.literal is not None:
        return index.by_text.get(m.literal, ())
    return index.by_class.get(m.token_class, ())


def _find(index: TokenIndex, lm: Landmark, start: int) -> Optional[int]:
    last = len(index) - len(lm)
    candidates = _positions(index, lm[0])
    for s in candidates[bisect_left(candidates, start) :]:
        if s > last:
            break
        if _match_at(index.tokens, lm, s):
            return s
    return None


def _match_starts(index: TokenIndex, lm: Landmark) -> list[int]:
    last = len(index) - len(lm)
    return [s for s in _positions(index, lm[0]) if s <= last and _match_at(index.tokens, lm, s)]


def _scan(index: TokenIndex, landmarks: Sequence[Landmark]) -> Optional[int]:
    position = 0
    for lm in landmarks:
        found = _find(index, lm, position)
        if found is None:
            return None
        position = found + len(lm)
    return position


def _reverse(landmarks: Sequence[Landmark]) -> list[Landmark]:
    return [tuple(reversed(lm)) for lm in landmarks]


def locate(rule: LandmarkRule, doc: TokenSequence) -> Optional[int]:
    """Token index the rule points at, or None when some landmark is missing."""
    if rule.direction is Direction.FORWARD:
        return _scan(doc.forward_index, rule.landmarks)
    consumed = _scan(doc.backward_index, _reverse(rule.landmarks))
    return None if consumed is None else len(doc) - consumed


def apply_rule(rule: LandmarkRule, doc: TokenSequence, boundary: Boundary = Boundary.START) -> ExtractionPrediction:
    """Apply ``rule`` to ``doc``; the text is the item span located at the index."""
    index = locate(rule, doc)
    if index is None:
        return ExtractionPrediction()
    start, stop = item_span(doc, index, boundary)
    return ExtractionPrediction(index, doc.span_text(start, stop))


# ---------------------------------------------------------------- induction

class _Documents:
    """Training documents in scan order, with landmark match starts memoized per induction."""

    def __init__(self, indexes: Sequence[TokenIndex]):
        self.indexes = list(indexes)
        self._starts: dict[tuple[int, Landmark], list[int]] = {}

    def __iter__(self):
        return iter(self.indexes)

    def starts(self, d: int, lm: Landmark) -> list[int]:
        key = (d, lm)
        if key not in self._starts:
            self._starts[key] = _match_starts(self.indexes[d], lm)
        return self._starts[key]


def _aligned_candidates(docs: _Documents, ends: Sequence[int]) -> list[Landmark]:
    out = []
    for length in range(MAX_LANDMARK_TOKENS, 0, -1):
        if any(end - length < 0 for end in ends):
            continue
        matchers = []
        for j in range(length):
            m = common_matcher([index.tokens[end - length + j] for index, end in zip(docs, ends)])
            if m is None:
                break
            matchers.append(m)
        else:
            out.append(tuple(matchers))
    return out


def _window_variants(window: Sequence[Token]) -> list[Landmark]:
    exact = tuple(literal(t.text) for t in window)
    mixed = tuple(wildcard(TokenClass.NUMBER) if TokenClass.NUMBER in t.classes else literal(t.text) for t in window)
    general = tuple(wildcard(t.primary) for t in window)
    return [exact, mixed, general]


def _candidates(docs: _Documents, intervals) -> list[Landmark]:
    """Landmark candidates ending inside every interval, most specific first."""
    out: list[Landmark] = []
    seen = set()

    def add(lm: Landmark):
        if lm and lm not in seen:
            seen.add(lm)
            out.append(lm)

    if all(lo == hi for lo, hi in intervals):
        for lm in _aligned_candidates(docs, [hi for _, hi in intervals]):
            add(lm)
    seed = docs.indexes[0].tokens
    lo, hi = intervals[0]
    for end in list(range(hi, max(lo, 1) - 1, -1))[:MAX_CANDIDATE_ENDS]:
        for length in range(min(MAX_LANDMARK_TOKENS, end), 0, -1):
            for lm in _window_variants(seed[end - length : end]):
                add(lm)
    return out


def _learn_chain(docs: _Documents, intervals, depth: int) -> Optional[list[Landmark]]:
    """Find landmarks whose scan ends inside ``intervals[d]`` for every document d.

    The last landmark is fixed first; when an earlier, wrongly placed match
    would be hit from the document start, earlier landmarks are searched to
    land past it.
    """
    deferred = []
    for lm in _candidates(docs, intervals):
        bounds = []
        for d, (lo, hi) in enumerate(intervals):
            starts = docs.starts(d, lm)
            valid = [s for s in starts if lo <= s + len(lm) <= hi]
            if not valid:
                break
            best = max(valid)
            wrong = max((s for s in starts if s < best and not lo <= s + len(lm) <= hi), default=-1)
            bounds.append((wrong + 1, best))
        else:
            if all(b_lo == 0 for b_lo, _ in bounds):
                return [lm]
            deferred.append((lm, bounds))
    if depth <= 1:
        return None
    for lm, bounds in deferred[:BEAM_WIDTH]:
        earlier = _learn_chain(docs, bounds, depth - 1)
        if earlier is not None:
            return earlier + [lm]
    return None


def learn_rule(documents: Sequence[tuple[TokenSequence, int]], direction: Direction = Direction.FORWARD) -> LandmarkRule:
    """Induce a rule that locates the labeled index in every training document.

    Raises InconsistentTrainingSetError when no chain of at most MAX_LANDMARKS
    landmarks covers all documents. Results are cached on the training set, so
    repeated calls with the same documents and targets return the same rule.
    """
    if not documents:
        raise TrainingError("cannot learn a rule from zero documents")
    # duplicates add no constraints; first occurrences keep their order
    unique = tuple(dict.fromkeys((doc, int(target)) for doc, target in documents))
    return _learn_rule(unique, Direction(direction))


@lru_cache(maxsize=RULE_CACHE_SIZE)
def _learn_rule(documents: tuple[tuple[TokenSequence, int], ...], direction: Direction) -> LandmarkRule:
    indexes, targets = [], []
    for doc, target in documents:
        if not 0 <= target <= len(doc):
            raise TrainingError(f"target {target} outside document of {len(doc)} tokens")
        if direction is Direction.FORWARD:
            indexes.append(doc.forward_index)
            targets.append(target)
        else:
            indexes.append(doc.backward_index)
            targets.append(len(doc) - target)

    chain = _learn_chain(_Documents(indexes), [(t, t) for t in targets], MAX_LANDMARKS)
    if chain is None:
        raise InconsistentTrainingSetError(
            f"no {direction.value} rule with at most {MAX_LANDMARKS} landmarks covers all {len(documents)} documents"
        )
    rule = LandmarkRule(direction, tuple(chain if direction is Direction.FORWARD else _reverse(chain)))
    for doc, target in documents:
        if locate(rule, doc) != target:
            raise InconsistentTrainingSetError(f"learned rule {rule} misses a training document")
    return rule
