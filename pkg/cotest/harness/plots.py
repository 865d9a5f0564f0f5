"""Static SVG learning-curve plots."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from cotest.harness.stats import LearningCurve  # noqa: E402

FIG_WIDTH = 6.0
ASPECT_RATIO = (math.sqrt(5) - 1.0) / 2.0


def plot_curves(curves_by_algorithm: dict[str, Sequence[LearningCurve]], path: Union[str, Path], title: str = "") -> Path:
    """Plot the fold-averaged accuracy of each algorithm against the labeled count."""
    plt.rcParams["svg.hashsalt"] = "cotest"  # stable element ids
    fig = plt.figure(figsize=(FIG_WIDTH, FIG_WIDTH * ASPECT_RATIO))
    ax = fig.add_subplot(1, 1, 1)
    for algorithm in sorted(curves_by_algorithm):
        curves = curves_by_algorithm[algorithm]
        if not curves:
            continue
        counts = curves[0].labeled_counts
        mean = [sum(c.accuracies[i] for c in curves) / len(curves) for i in range(len(counts))]
        ax.plot(counts, mean, label=algorithm, linewidth=1.2)
    ax.set_xlabel("labeled examples")
    ax.set_ylabel("accuracy")
    if title:
        ax.set_title(title)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
