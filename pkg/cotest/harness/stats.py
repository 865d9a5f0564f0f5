"""Paired t-tests over learning curves and win/tie/loss summaries."""
from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import betainc, betaincinv

from cotest.errors import ComparisonError

CURVE_COLUMNS = ["algorithm", "fold", "labeled_count", "accuracy"]


@dataclass(frozen=True)
class LearningCurve:
    """Test accuracy after every episode of one (algorithm, fold) run."""

    algorithm: str
    fold: str
    points: tuple[tuple[int, float], ...]
    seed: int = 0

    def __post_init__(self):
        counts = [c for c, _ in self.points]
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError(f"{self.algorithm}/{self.fold}: labeled counts must strictly increase")
        if any(not 0.0 <= acc <= 1.0 for _, acc in self.points):
            raise ValueError(f"{self.algorithm}/{self.fold}: accuracies must lie in [0, 1]")

    @property
    def labeled_counts(self) -> list[int]:
        return [c for c, _ in self.points]

    @property
    def accuracies(self) -> list[float]:
        return [a for _, a in self.points]


def write_curves(curves: Iterable[LearningCurve], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for curve in curves:
            for count, accuracy in curve.points:
                writer.writerow([curve.algorithm, curve.fold, count, f"{accuracy:.6f}"])


def read_curves(path: Union[str, Path]) -> list[LearningCurve]:
    grouped: "OrderedDict[tuple[str, str], list[tuple[int, float]]]" = OrderedDict()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CURVE_COLUMNS:
            raise ComparisonError(f"{path}: expected columns {CURVE_COLUMNS}, got {reader.fieldnames}")
        for row in reader:
            key = (row["algorithm"], row["fold"])
            grouped.setdefault(key, []).append((int(row["labeled_count"]), float(row["accuracy"])))
    return [LearningCurve(alg, fold, tuple(points)) for (alg, fold), points in grouped.items()]


# ---------------------------------------------------------------- t distribution

def t_cdf(t: float, df: float) -> float:
    """Student t CDF through the regularized incomplete beta function."""
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return 1.0 - tail if t > 0 else tail


def t_two_tailed_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def t_quantile(q: float, df: float) -> float:
    """Inverse of t_cdf for q in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if q == 0.5:
        return 0.0
    x = float(betaincinv(df / 2.0, 0.5, 2.0 * min(q, 1.0 - q)))
    t = math.sqrt(df * (1.0 - x) / x)
    return t if q > 0.5 else -t


# ---------------------------------------------------------------- reports

class Verdict(str, Enum):
    WIN = "win"
    TIE = "tie"
    LOSS = "loss"


class PointComparison(BaseModel):
    labeled_count: int
    mean_difference: float
    t_statistic: Optional[float] = Field(None, description="None when every fold has the same difference")
    p_value: float
    verdict: Verdict


class ComparisonReport(BaseModel):
    algorithm_a: str
    algorithm_b: str
    alpha: float
    folds: int
    points: list[PointComparison]
    wins: int = 0
    ties: int = 0
    losses: int = 0

    @model_validator(mode="after")
    def _count(self):
        self.wins = sum(p.verdict is Verdict.WIN for p in self.points)
        self.ties = sum(p.verdict is Verdict.TIE for p in self.points)
        self.losses = sum(p.verdict is Verdict.LOSS for p in self.points)
        return self

    def save(self, path: Union[str, Path]) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.model_dump_json(indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ComparisonReport":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


def _by_fold(curves: Sequence[LearningCurve]) -> dict[str, LearningCurve]:
    out = {}
    for curve in curves:
        if curve.fold in out:
            raise ComparisonError(f"fold {curve.fold} appears twice for {curve.algorithm}")
        out[curve.fold] = curve
    return out


def _name(curves: Sequence[LearningCurve]) -> str:
    names = sorted({c.algorithm for c in curves})
    if len(names) != 1:
        raise ComparisonError(f"expected curves of a single algorithm, got {names}")
    return names[0]


def compare_point(differences: Sequence[float], alpha: float) -> tuple[float, Optional[float], float, Verdict]:
    """Paired two-tailed t-test on per-fold differences a - b.

    When all differences are equal the statistic is undefined: a positive
    common difference is a win, a negative one a loss and zero a tie.
    """
    d = np.asarray(differences, dtype=float)
    n = len(d)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0 or np.allclose(d, d[0], rtol=0.0, atol=1e-12):
        if abs(mean) <= 1e-12:
            return 0.0, None, 1.0, Verdict.TIE
        return mean, None, 0.0, Verdict.WIN if mean > 0 else Verdict.LOSS
    t = mean / (sd / math.sqrt(n))
    p = t_two_tailed_p(t, n - 1)
    if p < alpha:
        return mean, t, p, Verdict.WIN if t > 0 else Verdict.LOSS
    return mean, t, p, Verdict.TIE


def comparison_indices(n_points: int, points: Union[Literal["second-half", "all"], Sequence[int]]) -> list[int]:
    if points == "all":
        return list(range(n_points))
    if points == "second-half":
        return list(range(n_points // 2, n_points))
    return sorted(set(int(i) for i in points))


def paired_t_test(
    a: Sequence[LearningCurve],
    b: Sequence[LearningCurve],
    points: Union[Literal["second-half", "all"], Sequence[int]] = "second-half",
    alpha: float = 0.05,
) -> ComparisonReport:
    """Compare two algorithms point by point across the folds they share."""
    folds_a, folds_b = _by_fold(a), _by_fold(b)
    if set(folds_a) != set(folds_b):
        raise ComparisonError(
            f"fold structures differ: {sorted(set(folds_a) ^ set(folds_b))} appear on one side only"
        )
    folds = sorted(folds_a)
    if len(folds) < 2:
        raise ComparisonError(f"a paired t-test needs at least 2 folds, got {len(folds)}")
    schedule = folds_a[folds[0]].labeled_counts
    for fold in folds:
        if folds_a[fold].labeled_counts != schedule or folds_b[fold].labeled_counts != schedule:
            raise ComparisonError(f"fold {fold}: episode schedules differ")

    results = []
    for i in comparison_indices(len(schedule), points):
        if not 0 <= i < len(schedule):
            raise ComparisonError(f"comparison point {i} outside a {len(schedule)}-point curve")
        diffs = [folds_a[f].accuracies[i] - folds_b[f].accuracies[i] for f in folds]
        mean, t, p, verdict = compare_point(diffs, alpha)
        results.append(PointComparison(labeled_count=schedule[i], mean_difference=mean, t_statistic=t, p_value=p, verdict=verdict))
    return ComparisonReport(algorithm_a=_name(a), algorithm_b=_name(b), alpha=alpha, folds=len(folds), points=results)


@dataclass
class SummaryRow:
    algorithm_a: str
    algorithm_b: str
    losses: int = 0
    ties: int = 0
    wins: int = 0


def summarize(reports: Sequence[ComparisonReport]) -> list[SummaryRow]:
    """Sum loss/tie/win counts per (a, b) pair, in first-seen order."""
    if not reports:
        raise ComparisonError("nothing to summarize")
    rows: "OrderedDict[tuple[str, str], SummaryRow]" = OrderedDict()
    for report in reports:
        key = (report.algorithm_a, report.algorithm_b)
        row = rows.setdefault(key, SummaryRow(*key))
        row.losses += report.losses
        row.ties += report.ties
        row.wins += report.wins
    return list(rows.values())


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["algorithm_a", "algorithm_b", "loss", "tie", "win"])
    for r in rows:
        writer.writerow([r.algorithm_a, r.algorithm_b, r.losses, r.ties, r.wins])
    return buffer.getvalue()


def summary_text(rows: Sequence[SummaryRow]) -> str:
    header = ("Comparison", "Loss", "Tie", "Win")
    body = [(f"{r.algorithm_a} vs {r.algorithm_b}", str(r.losses), str(r.ties), str(r.wins)) for r in rows]
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(4)]
    lines = [" | ".join(cell.ljust(widths[0]) if i == 0 else cell.rjust(widths[i]) for i, cell in enumerate(line)) for line in [header, *body]]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
