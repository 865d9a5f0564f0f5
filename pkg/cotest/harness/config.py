"""Experiment configuration models and the environment-driven defaults."""
from __future__ import annotations

import json
import os
from enum import Enum
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from cotest.cotesting import OutputStrategy, QueryStrategy
from cotest.errors import ConfigError
from cotest.learners import BaseLearnerSpec, LearnerKind
from cotest.wrapper.tokens import Boundary

# Configuration from environment
COTEST_THREADS = int(os.getenv("COTEST_THREADS", "0"))


class TaskKind(str, Enum):
    CLASSIFICATION = "classification"
    WRAPPER = "wrapper"


class AlgorithmKind(str, Enum):
    COTESTING = "cotesting"
    RANDOM = "random"
    UNCERTAINTY = "uncertainty"
    QBAG = "qbag"
    QBC = "qbc"
    QBOOST = "qboost"
    WRAPPER_NAIVE = "wrapper_naive"
    WRAPPER_AGGRESSIVE = "wrapper_aggressive"
    WRAPPER_RANDOM = "wrapper_random"
    WRAPPER_QBAG = "wrapper_qbag"


CLASSIFICATION_KINDS = {
    AlgorithmKind.COTESTING,
    AlgorithmKind.RANDOM,
    AlgorithmKind.UNCERTAINTY,
    AlgorithmKind.QBAG,
    AlgorithmKind.QBC,
    AlgorithmKind.QBOOST,
}
WRAPPER_KINDS = {
    AlgorithmKind.WRAPPER_NAIVE,
    AlgorithmKind.WRAPPER_AGGRESSIVE,
    AlgorithmKind.WRAPPER_RANDOM,
    AlgorithmKind.WRAPPER_QBAG,
}


class AlgorithmConfig(BaseModel):
    """One learner/strategy combination to run on every fold."""

    name: str = Field(..., min_length=1, pattern=r"^[A-Za-z0-9_.+-]+$")
    kind: AlgorithmKind
    learner: BaseLearnerSpec = BaseLearnerSpec()
    view_learners: dict[str, BaseLearnerSpec] = Field(default_factory=dict)
    query: QueryStrategy = QueryStrategy.NAIVE
    output: OutputStrategy = OutputStrategy.WINNER_TAKES_ALL
    committee_size: Optional[int] = Field(None, ge=2)

    @model_validator(mode="after")
    def _check_capabilities(self):
        if self.kind is AlgorithmKind.QBOOST:
            raise ValueError(f"algorithm '{self.name}': query-by-boosting is out of scope")
        no_confidence = self.learner.kind is LearnerKind.DECISION_TREE or any(
            spec.kind is LearnerKind.DECISION_TREE for spec in self.view_learners.values()
        )
        if self.kind is AlgorithmKind.UNCERTAINTY and self.learner.kind is LearnerKind.DECISION_TREE:
            raise ValueError(f"algorithm '{self.name}': uncertainty sampling needs a confidence-reporting learner")
        if self.kind is AlgorithmKind.COTESTING and no_confidence:
            if self.query in (QueryStrategy.AGGRESSIVE, QueryStrategy.CONSERVATIVE):
                raise ValueError(f"algorithm '{self.name}': {self.query.value} needs confidence estimates")
            if self.output is OutputStrategy.WEIGHTED_VOTE:
                raise ValueError(f"algorithm '{self.name}': weighted_vote needs confidence estimates")
        return self


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    task: TaskKind = TaskKind.CLASSIFICATION
    data_path: Optional[str] = None
    views_path: Optional[str] = None
    wrapper_tasks: list[str] = Field(default_factory=list)
    boundary: Boundary = Boundary.START
    algorithms: list[AlgorithmConfig] = Field(..., min_length=1)
    folds: int = Field(10, ge=2)
    n_initial: int = Field(..., ge=1)
    episodes: int = Field(..., ge=1)
    batch_size: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    output_dir: str = "results"
    alpha: float = Field(0.05, gt=0, lt=1)
    comparison_points: Literal["second-half", "all"] = "second-half"
    plot: bool = False

    @model_validator(mode="after")
    def _check_task(self):
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError(f"algorithm names must be unique: {names}")
        allowed = CLASSIFICATION_KINDS if self.task is TaskKind.CLASSIFICATION else WRAPPER_KINDS
        wrong = [a.name for a in self.algorithms if a.kind not in allowed]
        if wrong:
            raise ValueError(f"algorithms {wrong} are not registered for {self.task.value} tasks")
        if self.task is TaskKind.CLASSIFICATION and not (self.data_path and self.views_path):
            raise ValueError("classification experiments need data_path and views_path")
        if self.task is TaskKind.WRAPPER and not self.wrapper_tasks:
            raise ValueError("wrapper experiments need at least one entry in wrapper_tasks")
        return self

    @property
    def n_queries(self) -> int:
        return self.episodes * self.batch_size

    def resolve_paths(self, base: Union[str, Path]) -> "ExperimentConfig":
        """Make relative input paths relative to ``base`` (the config file's directory)."""
        base = Path(base)

        def fix(p: Optional[str]) -> Optional[str]:
            if p is None or Path(p).is_absolute():
                return p
            return str(base / p)

        return self.model_copy(
            update={
                "data_path": fix(self.data_path),
                "views_path": fix(self.views_path),
                "wrapper_tasks": [fix(p) for p in self.wrapper_tasks],
            }
        )


def _read_json(path: Union[str, Path]) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    raw = _read_json(path)
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config.resolve_paths(Path(path).parent)


def load_model(path: Union[str, Path], model: type[BaseModel]) -> BaseModel:
    """Validate a JSON file against any pydantic model (generator specs)."""
    raw = _read_json(path)
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from None
