"""HTML-aware tokenizer and token classes for wrapper induction."""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterator, Optional


class TokenClass(str, Enum):
    ALL_CAPS = "AllCaps"
    NUMBER = "Number"
    CAPITALIZED = "Capitalized"
    HTML_TAG = "HtmlTag"
    PUNCTUATION = "Punctuation"
    WHITESPACE = "Whitespace"
    ALPHA_NUM = "AlphaNum"


# most specific first
SPECIFICITY: tuple[TokenClass, ...] = tuple(TokenClass)

_TOKEN_RE = re.compile(r"<[^<>]*>|&#?\w+;|[^\W_]+|\S")
_SPACE_ENTITIES = {"&nbsp;", "&#160;"}


class Boundary(str, Enum):
    """Which end of the item a rule locates."""

    START = "start"
    END = "end"


def token_classes(text: str) -> frozenset[TokenClass]:
    if text.startswith("<") and text.endswith(">") and len(text) >= 2:
        return frozenset({TokenClass.HTML_TAG})
    if text.startswith("&") and text.endswith(";") and len(text) > 2:
        if text in _SPACE_ENTITIES:
            return frozenset({TokenClass.WHITESPACE})
        return frozenset({TokenClass.PUNCTUATION})
    if text.isalnum():
        classes = {TokenClass.ALPHA_NUM}
        if text.isdigit():
            classes.add(TokenClass.NUMBER)
        if text[0].isupper():
            classes.add(TokenClass.CAPITALIZED)
            if text.isalpha() and text.isupper():
                classes.add(TokenClass.ALL_CAPS)
        return frozenset(classes)
    if text.isspace():
        return frozenset({TokenClass.WHITESPACE})
    return frozenset({TokenClass.PUNCTUATION})


def most_specific(classes: frozenset[TokenClass]) -> Optional[TokenClass]:
    for cls in SPECIFICITY:
        if cls in classes:
            return cls
    return None


@dataclass(frozen=True)
class Token:
    text: str
    classes: frozenset[TokenClass]
    gap: str = ""  # whitespace between the previous token and this one

    @property
    def primary(self) -> TokenClass:
        return most_specific(self.classes)

    def __str__(self) -> str:
        return self.text


def make_token(text: str, gap: str = "") -> Token:
    return Token(text, token_classes(text), gap)


class TokenIndex:
    """Ascending positions of every token text and token class in a token tuple."""

    def __init__(self, tokens: tuple[Token, ...]):
        self.tokens = tokens
        by_text, by_class = defaultdict(list), defaultdict(list)
        for i, token in enumerate(tokens):
            by_text[token.text].append(i)
            for cls in token.classes:
                by_class[cls].append(i)
        self.by_text = {k: tuple(v) for k, v in by_text.items()}
        self.by_class = {k: tuple(v) for k, v in by_class.items()}

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class TokenSequence:
    """A tokenized document; joining gaps, texts and ``trailing`` restores the raw string."""

    tokens: tuple[Token, ...]
    trailing: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    @cached_property
    def reversed_tokens(self) -> tuple[Token, ...]:
        return self.tokens[::-1]

    @cached_property
    def forward_index(self) -> TokenIndex:
        return TokenIndex(self.tokens)

    @cached_property
    def backward_index(self) -> TokenIndex:
        return TokenIndex(self.reversed_tokens)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """Character offset of each token in the raw document."""
        out, position = [], 0
        for token in self.tokens:
            position += len(token.gap)
            out.append(position)
            position += len(token.text)
        return tuple(out)

    @property
    def raw(self) -> str:
        return "".join(t.gap + t.text for t in self.tokens) + self.trailing

    def texts(self, start: int = 0, stop: Optional[int] = None) -> list[str]:
        return [t.text for t in self.tokens[start:stop]]

    def index_at_offset(self, offset: int) -> int:
        """Index of the token starting at ``offset``, or len(self) at the end of the text."""
        if offset in self.offsets:
            return self.offsets.index(offset)
        end = self.offsets[-1] + len(self.tokens[-1].text) if self.tokens else 0
        if offset >= end:
            return len(self.tokens)
        raise ValueError(f"no token starts at character offset {offset}")

    def span_text(self, start: int, stop: int) -> str:
        if start >= stop:
            return ""
        pieces = [self.tokens[start].text]
        pieces.extend(t.gap + t.text for t in self.tokens[start + 1 : stop])
        return "".join(pieces)


def tokenize(raw: str) -> TokenSequence:
    """Split raw HTML text into tag, entity, alphanumeric-run and single-character tokens."""
    tokens, cursor = [], 0
    for match in _TOKEN_RE.finditer(raw):
        gap = raw[cursor : match.start()]
        tokens.append(make_token(match.group(), gap))
        cursor = match.end()
    return TokenSequence(tuple(tokens), raw[cursor:])


def item_span(tokens: TokenSequence, index: int, boundary: Boundary = Boundary.START) -> tuple[int, int]:
    """Token range of the item located at ``index``.

    From a start index the item runs to the next HtmlTag; from an end index it
    runs back to the previous HtmlTag.
    """
    n = len(tokens)
    if not 0 <= index <= n:
        raise IndexError(f"index {index} outside document of {n} tokens")
    if Boundary(boundary) is Boundary.START:
        stop = index
        while stop < n and TokenClass.HTML_TAG not in tokens[stop].classes:
            stop += 1
        return index, stop
    start = index
    while start > 0 and TokenClass.HTML_TAG not in tokens[start - 1].classes:
        start -= 1
    return start, index
