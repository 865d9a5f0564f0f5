"""Simulated user that reveals held-back labels."""
from __future__ import annotations

from typing import Iterable

from cotest.core import MultiViewExample
from cotest.errors import ContractError


class Oracle:
    """Answers label queries for the examples of one training fold and counts them."""

    def __init__(self, examples: Iterable[MultiViewExample]):
        self._labels = {ex.example_id: ex.label for ex in examples}
        if any(label is None for label in self._labels.values()):
            raise ContractError("the oracle must be built from labeled examples")
        self.queries = 0

    def __call__(self, example: MultiViewExample) -> int:
        try:
            label = self._labels[example.example_id]
        except KeyError:
            raise ContractError(f"example {example.example_id} is not part of this fold") from None
        self.queries += 1
        return label

    def __len__(self) -> int:
        return len(self._labels)
