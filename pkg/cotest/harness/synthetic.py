"""Synthetic stand-ins for the benchmark domains: multi-view text-like data and restaurant pages."""
from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from cotest.core import Dataset, FeatureVector, Label, MultiViewExample, Strength, View, ViewSpec, derive_rng, write_dataset
from cotest.wrapper.loop import LabeledDocument, WrapperTask, write_wrapper_task
from cotest.wrapper.tokens import tokenize

LABEL_NAMES = ("neg", "pos")
# each hidden attribute is on with this probability, so the conjunction is balanced
ATTRIBUTE_RATE = math.sqrt(0.5)


class ClassificationSpec(BaseModel):
    """Every view can read the same hidden conjunction from its own signal words."""

    views: int = Field(2, ge=2)
    signal_features: int = Field(20, ge=4, description="per view; split into four attribute groups")
    noise_features: int = Field(80, ge=1)
    redundancy: Union[float, list[float]] = 1.0
    noise_rate: float = Field(0.0, ge=0.0, lt=0.5)
    size: int = Field(1000, ge=2)
    words_per_attribute: int = Field(1, ge=1)
    noise_words: int = Field(20, ge=0)
    seed: int = Field(0, ge=0)

    @field_validator("signal_features")
    @classmethod
    def _divisible(cls, value: int) -> int:
        if value % 4:
            raise ValueError("signal_features must be a multiple of 4")
        return value

    @model_validator(mode="after")
    def _redundancy_per_view(self):
        values = self.redundancies
        if len(values) != self.views:
            raise ValueError(f"redundancy needs {self.views} values, got {len(values)}")
        if any(not 0.0 <= r <= 1.0 for r in values):
            raise ValueError("redundancy values must lie in [0, 1]")
        return self

    @property
    def redundancies(self) -> list[float]:
        if isinstance(self.redundancy, list):
            return list(self.redundancy)
        return [self.redundancy] * self.views

    @property
    def view_width(self) -> int:
        return self.signal_features + self.noise_features


def generate_synthetic_classification(spec: ClassificationSpec, outdir: Optional[Union[str, Path]] = None) -> Dataset:
    """Draw a dataset whose label is a AND b for hidden attributes a, b.

    Each view emits words from the group that reports a (or not a) and the
    group that reports b (or not b). With probability 1 - redundancy a word
    is drawn from all four groups instead, carrying no signal. Label noise
    flips the observed label.
    """
    rng = derive_rng(spec.seed, "classification")
    width, quarter = spec.view_width, spec.signal_features // 4
    views = tuple(
        View(
            f"v{v + 1}",
            frozenset(range(v * width, (v + 1) * width)),
            Strength.STRONG,
        )
        for v in range(spec.views)
    )

    examples = []
    for i in range(spec.size):
        a = bool(rng.random() < ATTRIBUTE_RATE)
        b = bool(rng.random() < ATTRIBUTE_RATE)
        label = int(a and b)
        if rng.random() < spec.noise_rate:
            label = 1 - label
        descriptions = {}
        for v, redundancy in enumerate(spec.redundancies):
            base = v * width
            counts = np.zeros(width)
            for group in ((0 if a else 1), (2 if b else 3)):
                informative = rng.random(spec.words_per_attribute) < redundancy
                for on_topic in informative:
                    if on_topic:
                        counts[group * quarter + int(rng.integers(quarter))] += 1
                    else:
                        counts[int(rng.integers(spec.signal_features))] += 1
            for f in rng.integers(spec.noise_features, size=spec.noise_words):
                counts[spec.signal_features + int(f)] += 1
            nz = np.flatnonzero(counts)
            descriptions[views[v].id] = FeatureVector(tuple(int(base + f) for f in nz), tuple(float(counts[f]) for f in nz))
        examples.append(MultiViewExample(i, descriptions, label))

    dataset = Dataset(
        examples=tuple(examples),
        view_spec=ViewSpec(views),
        labels=tuple(Label(i, name) for i, name in enumerate(LABEL_NAMES)),
        n_features=spec.views * width,
    )
    if outdir is not None:
        outdir = Path(outdir)
        write_dataset(dataset, outdir / "data.txt", outdir / "views.txt")
    return dataset


# ---------------------------------------------------------------- wrapper pages

class AmbiguityMode(str, Enum):
    OFF = "off"
    PREFIX_VARIANT = "prefix-variant"
    DISTRACTOR_ORDER = "distractor-order"


class WrapperSpec(BaseModel):
    tasks: int = Field(1, ge=1)
    templates: int = Field(3, ge=1)
    distractors: int = Field(2, ge=0)
    ambiguity: Union[AmbiguityMode, list[AmbiguityMode]] = AmbiguityMode.OFF
    rare_share: float = Field(0.05, gt=0.0, lt=1.0, description="share of pages drawn from the layouts after the first")
    size: int = Field(200, ge=2)
    folds: int = Field(20, ge=2)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _enough_documents(self):
        if self.size < self.folds * 2:
            raise ValueError(f"size {self.size} must be at least folds x 2 = {self.folds * 2}")
        if isinstance(self.ambiguity, list) and not self.ambiguity:
            raise ValueError("ambiguity list must not be empty")
        return self

    def mode_for(self, task: int) -> AmbiguityMode:
        if isinstance(self.ambiguity, list):
            return self.ambiguity[task % len(self.ambiguity)]
        return self.ambiguity


FIRST = ("Joe", "Maria", "Lucky", "Golden", "Blue", "Rosa", "Sunny", "Casa", "Little", "Grand")
SECOND = ("Diner", "Bistro", "Kitchen", "Grill", "Cafe", "Trattoria", "Garden", "Palace", "House", "Table")
STREETS = ("Main", "Oak", "Pine", "Maple", "Cedar", "Elm", "Lake", "Hill", "Park", "Sunset")
CITIES = ("Springfield", "Riverside", "Fairview", "Madison", "Georgetown", "Clinton", "Salem", "Ashland")
CUISINES = ("Thai", "Italian", "Mexican", "French", "Greek", "Indian", "Japanese", "Cajun")
PHONE_LABELS = ("Tel", "Telephone", "Voice", "Call")
DISTRACTOR_LABELS = ("Fax", "Cell", "Office", "Home")
TRAILERS = ("cuisine", "hours", "rating")


def _phone(rng: np.random.Generator) -> str:
    return f"({rng.integers(200, 1000)}) {rng.integers(200, 1000)}-{rng.integers(1000, 10000)}"


def _templates(spec: WrapperSpec, mode: AmbiguityMode, rng: np.random.Generator) -> list[dict]:
    templates = []
    for k in range(spec.templates):
        trailers = [TRAILERS[int(i)] for i in rng.permutation(len(TRAILERS))[: 1 + int(rng.integers(len(TRAILERS)))]]
        template = {
            "heading": "h1" if k % 2 == 0 else "h2",
            "trailers": trailers,
            "label": "Phone",
            "old_phone": False,
            "late_distractor": False,
        }
        if mode is AmbiguityMode.PREFIX_VARIANT and k > 0:
            template["label"] = PHONE_LABELS[(k - 1) % len(PHONE_LABELS)]
        if mode is AmbiguityMode.DISTRACTOR_ORDER and k > 0:
            template["old_phone" if k % 2 else "late_distractor"] = True
        templates.append(template)
    return templates


def _render(template: dict, spec: WrapperSpec, rng: np.random.Generator) -> tuple[str, int]:
    """Build one page; returns the raw text and the character offset of the item."""
    pick = lambda options: options[int(rng.integers(len(options)))]
    name = f"{pick(FIRST)}'s {pick(SECOND)}"
    heading = template["heading"]
    parts = [f"<html><head><title>{name}</title></head><body>\n<{heading}>{name}</{heading}>\n"]
    if template["old_phone"]:
        parts.append(f"<p>Old {template['label']}:<i>{_phone(rng)}</i>\n")
    labels = [pick(DISTRACTOR_LABELS) for _ in range(spec.distractors)]
    late = labels.pop() if template["late_distractor"] and labels else None
    for label in labels:
        parts.append(f"<p>{label}:<b>{_phone(rng)}</b>\n")
    parts.append(f"<p>{rng.integers(1, 999)} {pick(STREETS)} St<br>{pick(CITIES)}\n")
    parts.append(f"<p>{template['label']}:<i>")
    offset = sum(len(p) for p in parts)
    parts.append(f"{_phone(rng)}</i>\n")
    if late is not None:
        parts.append(f"<p>{late}:<b>{_phone(rng)}</b>\n")
    for trailer in template["trailers"]:
        if trailer == "cuisine":
            parts.append(f"<p>Cuisine: {pick(CUISINES)}\n")
        elif trailer == "hours":
            parts.append(f"<p>Hours: {rng.integers(6, 12)}am - {rng.integers(8, 12)}pm\n")
        else:
            parts.append(f"<p>Rating: {rng.integers(1, 6)} / 5\n")
    parts.append("</body></html>\n")
    return "".join(parts), offset


def _template_weights(n: int, rare_share: float) -> np.ndarray:
    """The first layout is the common one; the rest split ``rare_share`` evenly."""
    if n == 1:
        return np.ones(1)
    return np.array([1.0 - rare_share] + [rare_share / (n - 1)] * (n - 1))


def generate_wrapper_task(spec: WrapperSpec, task: int = 0) -> WrapperTask:
    mode = spec.mode_for(task)
    rng = derive_rng(spec.seed, "wrapper", task)
    templates = _templates(spec, mode, rng)
    weights = _template_weights(len(templates), spec.rare_share)
    documents = []
    for i in range(spec.size):
        template = templates[int(rng.choice(len(templates), p=weights))]
        raw, offset = _render(template, spec, rng)
        tokens = tokenize(raw)
        documents.append(LabeledDocument(f"t{task:02d}-d{i:04d}", tokens, tokens.index_at_offset(offset)))
    return WrapperTask(f"task_{task:02d}_{mode.value}", "Phone", tuple(documents))


def generate_synthetic_wrapper(spec: WrapperSpec, outdir: Optional[Union[str, Path]] = None) -> list[WrapperTask]:
    """Generate ``spec.tasks`` restaurant-page tasks, each locating the main phone number.

    Every page carries distractor phone numbers in other markup. Ambiguity
    modes vary the text before the item across layouts (prefix-variant) or
    add layouts where a phone-like string precedes or follows the item in a
    way that misleads one rule direction (distractor-order). Only
    ``rare_share`` of the pages use the layouts after the first, so a few
    pages labeled at random usually miss them.
    """
    tasks = [generate_wrapper_task(spec, t) for t in range(spec.tasks)]
    if outdir is not None:
        for task in tasks:
            write_wrapper_task(task, Path(outdir) / f"{task.name}.tsv")
    return tasks
