"""Content view: what a correctly extracted item looks like, independent of where it sits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from cotest.errors import TrainingError
from cotest.wrapper.rules import Matcher, common_matcher
from cotest.wrapper.tokens import Token, TokenClass

PATTERN_TOKENS = 3
CONSTRAINT_FAMILIES = 4


@dataclass(frozen=True)
class ContentPattern:
    min_length: int
    max_length: int
    allowed: frozenset[TokenClass]
    start: tuple[Matcher, ...] = ()
    end: tuple[Matcher, ...] = ()

    def __post_init__(self):
        if self.min_length > self.max_length:
            raise ValueError(f"min_length {self.min_length} > max_length {self.max_length}")

    def describe(self) -> str:
        return (
            f"length {self.min_length}-{self.max_length}, "
            f"classes {sorted(c.value for c in self.allowed)}, "
            f"start [{' '.join(map(str, self.start))}], end [{' '.join(map(str, self.end))}]"
        )


def _common_prefix(sequences: Sequence[Sequence[Token]]) -> tuple[Matcher, ...]:
    shortest = min(len(s) for s in sequences)
    matchers = []
    for i in range(min(PATTERN_TOKENS, shortest)):
        m = common_matcher([s[i] for s in sequences])
        if m is None:
            break
        matchers.append(m)
    return tuple(matchers)


def learn_content_pattern(positives: Sequence[Sequence[Token]]) -> ContentPattern:
    """Summarize correctly extracted items by length range, token classes and common ends."""
    if not positives:
        raise TrainingError("cannot learn a content pattern from zero positives")
    lengths = [len(p) for p in positives]
    allowed = frozenset(t.primary for p in positives for t in p)
    start = _common_prefix(positives)
    end = tuple(reversed(_common_prefix([list(reversed(p)) for p in positives])))
    return ContentPattern(min(lengths), max(lengths), allowed, start, end)


def _matches_prefix(tokens: Sequence[Token], matchers: Sequence[Matcher]) -> bool:
    return len(tokens) >= len(matchers) and all(m.matches(t) for m, t in zip(matchers, tokens))


def violations(pattern: ContentPattern, tokens: Optional[Sequence[Token]]) -> int:
    """Number of constraint families (length, classes, start, end) that ``tokens`` breaks.

    ``None`` stands for a failed extraction and breaks all of them.
    """
    if tokens is None:
        return CONSTRAINT_FAMILIES
    tokens = list(tokens)
    count = 0
    if not pattern.min_length <= len(tokens) <= pattern.max_length:
        count += 1
    if any(t.primary not in pattern.allowed for t in tokens):
        count += 1
    if not _matches_prefix(tokens, pattern.start):
        count += 1
    if not _matches_prefix(tokens[::-1], pattern.end[::-1]):
        count += 1
    return count
