"""Domain model, dataset files, view projection and fold construction."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from cotest.errors import DatasetError, StratificationError

UNLABELED = "?"


class Strength(str, Enum):
    STRONG = "strong"
    WEAK = "weak"


@dataclass(frozen=True)
class Label:
    id: int
    name: str


@dataclass(frozen=True)
class FeatureVector:
    """Sparse map from feature id to a positive count/weight.

    Zero entries are never stored; indices are kept sorted.
    """

    indices: tuple[int, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have the same length")

    @classmethod
    def from_mapping(cls, entries: Mapping[int, float]) -> "FeatureVector":
        items = sorted((int(k), float(v)) for k, v in entries.items() if v != 0)
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @property
    def entries(self) -> dict[int, float]:
        return dict(zip(self.indices, self.values))

    def get(self, feature: int, default: float = 0.0) -> float:
        return self.entries.get(feature, default)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class View:
    id: str
    features: frozenset[int]
    strength: Strength = Strength.STRONG

    @property
    def is_strong(self) -> bool:
        return self.strength is Strength.STRONG


@dataclass(frozen=True)
class ViewSpec:
    """Ordered collection of pairwise-disjoint views."""

    views: tuple[View, ...]

    def __post_init__(self):
        ids = [v.id for v in self.views]
        if len(set(ids)) != len(ids):
            raise DatasetError(f"duplicate view ids: {ids}")
        seen: dict[int, str] = {}
        for view in self.views:
            for feature in view.features:
                if feature in seen:
                    raise DatasetError(
                        f"feature {feature} assigned to both '{seen[feature]}' and '{view.id}'"
                    )
                seen[feature] = view.id

    @property
    def ids(self) -> list[str]:
        return [v.id for v in self.views]

    @property
    def strong_ids(self) -> list[str]:
        return [v.id for v in self.views if v.is_strong]

    @property
    def weak_ids(self) -> list[str]:
        return [v.id for v in self.views if not v.is_strong]

    @property
    def universe(self) -> frozenset[int]:
        return frozenset().union(*(v.features for v in self.views))

    def view(self, view_id: str) -> View:
        for v in self.views:
            if v.id == view_id:
                return v
        raise DatasetError(f"unknown view '{view_id}'")

    def feature_owner(self) -> dict[int, str]:
        return {f: v.id for v in self.views for f in v.features}


@dataclass(frozen=True)
class MultiViewExample:
    """One instance described in every view; ``label`` is None while unlabeled."""

    example_id: int
    views: Mapping[str, Any]
    label: Optional[int] = None

    @property
    def is_labeled(self) -> bool:
        return self.label is not None

    def unlabeled(self) -> "MultiViewExample":
        return replace(self, label=None)

    def with_label(self, label: int) -> "MultiViewExample":
        return replace(self, label=label)


@dataclass(frozen=True)
class Prediction:
    """A label (None = abstain) with an optional confidence in [0, 1]."""

    label: Optional[int]
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def abstained(self) -> bool:
        return self.label is None


ABSTAIN = Prediction(None)


@dataclass(frozen=True)
class Dataset:
    examples: tuple[MultiViewExample, ...]
    view_spec: ViewSpec
    labels: tuple[Label, ...]
    n_features: int = 0

    @property
    def label_ids(self) -> list[int]:
        return [label.id for label in self.labels]

    def label_name(self, label_id: int) -> str:
        return self.labels[label_id].name

    def __len__(self) -> int:
        return len(self.examples)


# FeatureVector for classification views, TokenSequence for wrapper views.
Description = Any


def project(example: MultiViewExample, view_id: str) -> Description:
    """Return the description of ``example`` in one view."""
    try:
        return example.views[view_id]
    except KeyError:
        raise DatasetError(f"unknown view '{view_id}' for example {example.example_id}") from None


def union_view(example: MultiViewExample) -> FeatureVector:
    """Merge every feature-vector view into a single vector over the whole feature set."""
    merged: dict[int, float] = {}
    for description in example.views.values():
        if isinstance(description, FeatureVector):
            merged.update(description.entries)
    return FeatureVector.from_mapping(merged)


# ---------------------------------------------------------------- seeding

def derive_seed(seed: int, *names: object) -> int:
    """Derive an independent 32-bit seed for a named sub-stream."""
    key = tuple(zlib.crc32(str(name).encode("utf-8")) for name in names)
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=key).generate_state(1)[0])


def derive_rng(seed: int, *names: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *names))


# ---------------------------------------------------------------- file I/O

def _parse_feature_list(text: str, line: int) -> frozenset[int]:
    features: set[int] = set()
    if text.strip() in ("", "-"):
        return frozenset()
    for part in text.split(","):
        part = part.strip()
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                if hi < lo:
                    raise ValueError(part)
                features.update(range(lo, hi + 1))
            else:
                features.add(int(part))
        except ValueError:
            raise DatasetError(f"malformed feature range '{part}'", line) from None
    if any(f < 0 for f in features):
        raise DatasetError("feature ids must be non-negative", line)
    return frozenset(features)


def _format_feature_list(features: Iterable[int]) -> str:
    ordered = sorted(features)
    if not ordered:
        return "-"
    parts, start, prev = [], ordered[0], ordered[0]
    for f in ordered[1:] + [None]:
        if f is not None and f == prev + 1:
            prev = f
            continue
        parts.append(str(start) if start == prev else f"{start}-{prev}")
        if f is not None:
            start = prev = f
    return ",".join(parts)


def load_view_spec(views_path: Union[str, Path]) -> ViewSpec:
    """Read ``view <id> strong|weak <features>`` lines."""
    views: list[View] = []
    with open(views_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 3)
            if len(parts) < 3 or parts[0] != "view":
                raise DatasetError(f"expected 'view <id> strong|weak <features>', got '{line}'", lineno)
            try:
                strength = Strength(parts[2])
            except ValueError:
                raise DatasetError(f"view strength must be strong or weak, got '{parts[2]}'", lineno) from None
            features = _parse_feature_list(parts[3] if len(parts) == 4 else "", lineno)
            views.append(View(parts[1], features, strength))
    if not views:
        raise DatasetError(f"no views declared in {views_path}")
    return ViewSpec(tuple(views))


def load_dataset(data_path: Union[str, Path], views_path: Union[str, Path]) -> Dataset:
    """Parse an example file and a views file into a Dataset.

    Example lines are ``<label|?> <feature>:<value> ...``. Optional directives
    ``#labels: a b ...`` and ``#dim: n`` fix the label order and feature universe.
    """
    view_spec = load_view_spec(views_path)
    owner = view_spec.feature_owner()

    declared_labels: Optional[list[str]] = None
    dim: Optional[int] = None
    rows: list[tuple[int, Optional[str], dict[int, float]]] = []

    with open(data_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                directive = line[1:].strip()
                if directive.startswith("labels:"):
                    declared_labels = directive[len("labels:"):].split()
                elif directive.startswith("dim:"):
                    try:
                        dim = int(directive[len("dim:"):])
                    except ValueError:
                        raise DatasetError("malformed #dim directive", lineno) from None
                continue
            tokens = line.split()
            label_name = None if tokens[0] == UNLABELED else tokens[0]
            entries: dict[int, float] = {}
            for token in tokens[1:]:
                try:
                    key, value = token.split(":", 1)
                    feature, weight = int(key), float(value)
                except ValueError:
                    raise DatasetError(f"malformed feature entry '{token}'", lineno) from None
                if feature < 0 or weight < 0:
                    raise DatasetError(f"negative feature id or value in '{token}'", lineno)
                if feature in entries:
                    raise DatasetError(f"feature {feature} repeated", lineno)
                entries[feature] = weight
            rows.append((lineno, label_name, entries))

    universe = set(view_spec.universe)
    if dim is not None:
        expected = set(range(dim))
        missing = sorted(expected - universe)
        extra = sorted(universe - expected)
        if missing:
            raise DatasetError(f"incomplete view partition: features {missing[:10]} belong to no view")
        if extra:
            raise DatasetError(f"views reference features {extra[:10]} outside #dim {dim}")
    elif universe:
        holes = sorted(set(range(max(universe) + 1)) - universe)
        if holes:
            raise DatasetError(f"incomplete view partition: features {holes[:10]} belong to no view")
    for lineno, _, entries in rows:
        stray = sorted(f for f in entries if f not in owner)
        if stray:
            raise DatasetError(f"incomplete view partition: features {stray[:10]} belong to no view", lineno)

    if declared_labels is None:
        declared_labels = sorted({name for _, name, _ in rows if name is not None})
    if len(declared_labels) < 2:
        raise DatasetError(f"need at least 2 labels, found {declared_labels}")
    if len(set(declared_labels)) != len(declared_labels):
        raise DatasetError(f"duplicate label names: {declared_labels}")
    label_ids = {name: i for i, name in enumerate(declared_labels)}

    examples = []
    for position, (lineno, name, entries) in enumerate(rows):
        if name is not None and name not in label_ids:
            raise DatasetError(f"unknown label '{name}'", lineno)
        per_view: dict[str, dict[int, float]] = {vid: {} for vid in view_spec.ids}
        for feature, weight in entries.items():
            per_view[owner[feature]][feature] = weight
        examples.append(
            MultiViewExample(
                example_id=position,
                views={vid: FeatureVector.from_mapping(e) for vid, e in per_view.items()},
                label=None if name is None else label_ids[name],
            )
        )

    return Dataset(
        examples=tuple(examples),
        view_spec=view_spec,
        labels=tuple(Label(i, n) for i, n in enumerate(declared_labels)),
        n_features=dim if dim is not None else (max(universe) + 1 if universe else 0),
    )


def write_dataset(dataset: Dataset, data_path: Union[str, Path], views_path: Union[str, Path]) -> None:
    """Write a Dataset back out in the format load_dataset reads."""
    Path(data_path).parent.mkdir(parents=True, exist_ok=True)
    Path(views_path).parent.mkdir(parents=True, exist_ok=True)
    with open(views_path, "w", encoding="utf-8") as fh:
        for view in dataset.view_spec.views:
            fh.write(f"view {view.id} {view.strength.value} {_format_feature_list(view.features)}\n")
    with open(data_path, "w", encoding="utf-8") as fh:
        fh.write(f"#labels: {' '.join(label.name for label in dataset.labels)}\n")
        fh.write(f"#dim: {dataset.n_features}\n")
        for ex in dataset.examples:
            vec = union_view(ex)
            name = UNLABELED if ex.label is None else dataset.label_name(ex.label)
            body = " ".join(f"{f}:{v:g}" for f, v in zip(vec.indices, vec.values))
            fh.write(f"{name} {body}".rstrip() + "\n")


# ---------------------------------------------------------------- folds

Fold = tuple[list[MultiViewExample], list[MultiViewExample]]


def stratified_kfold(dataset: Dataset, k: int, seed: int) -> list[Fold]:
    """Split labeled examples into k (train, test) folds with per-class balance.

    Members of each class (in label-id order) are shuffled and dealt
    round-robin onto a seeded fold order; the dealing cursor carries over
    from one class to the next so fold sizes differ by at most one.
    """
    if k < 2:
        raise DatasetError(f"need at least 2 folds, got {k}")
    examples = list(dataset.examples)
    if any(ex.label is None for ex in examples):
        raise DatasetError("stratified folds need every example labeled")
    if len(examples) < k:
        raise DatasetError(f"{len(examples)} examples cannot fill {k} folds")

    by_class: dict[int, list[int]] = {}
    for position, ex in enumerate(examples):
        by_class.setdefault(ex.label, []).append(position)
    small = {label: len(m) for label, m in by_class.items() if len(m) < k}
    if small:
        raise StratificationError(f"classes {small} have fewer than k={k} examples")

    rng = np.random.default_rng(seed)
    fold_order = rng.permutation(k)
    assignment = np.empty(len(examples), dtype=int)
    cursor = 0
    for label in sorted(by_class):
        members = np.array(by_class[label])[rng.permutation(len(by_class[label]))]
        for position in members:
            assignment[position] = fold_order[cursor % k]
            cursor += 1

    folds: list[Fold] = []
    for fold in range(k):
        test = [ex for ex, a in zip(examples, assignment) if a == fold]
        train = [ex for ex, a in zip(examples, assignment) if a != fold]
        folds.append((train, test))
    return folds


def kfold_indices(n: int, k: int, seed: int) -> list[tuple[list[int], list[int]]]:
    """Unstratified k-fold split of range(n); used for wrapper tasks."""
    if k < 2 or n < k:
        raise DatasetError(f"cannot split {n} items into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = []
    for chunk in np.array_split(perm, k):
        test = sorted(int(i) for i in chunk)
        held = set(test)
        folds.append(([i for i in range(n) if i not in held], test))
    return folds


def split_initial(
    train: Sequence[MultiViewExample], n_initial: int, seed: int
) -> tuple[list[MultiViewExample], list[MultiViewExample]]:
    """Draw the initial labeled set L and hide the labels of the rest (U)."""
    if not 1 <= n_initial <= len(train):
        raise DatasetError(f"n_initial must be in [1, {len(train)}], got {n_initial}")
    chosen = set(np.random.default_rng(seed).choice(len(train), size=n_initial, replace=False).tolist())
    labeled = [ex for i, ex in enumerate(train) if i in chosen]
    pool = [ex.unlabeled() for i, ex in enumerate(train) if i not in chosen]
    return labeled, pool
