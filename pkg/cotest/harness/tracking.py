"""Optional MLflow tracking of experiment runs.

Tracking is on only when MLFLOW_TRACKING_URI is set; failures are reported
and never abort an experiment.
"""
from __future__ import annotations

import os
from datetime import datetime
from typing import Sequence

import mlflow
from mlflow.exceptions import MlflowException

from cotest.harness.stats import LearningCurve


def tracking_enabled() -> bool:
    return bool(os.getenv("MLFLOW_TRACKING_URI"))


def _mean_curve(curves: Sequence[LearningCurve]) -> list[tuple[int, float]]:
    if not curves:
        return []
    schedule = curves[0].labeled_counts
    return [
        (count, sum(c.accuracies[i] for c in curves) / len(curves))
        for i, count in enumerate(schedule)
        if all(len(c.points) > i for c in curves)
    ]


def log_experiment(config, curves_by_algorithm: dict[str, list[LearningCurve]], extra_metrics: dict | None = None) -> None:
    """Log one MLflow run per algorithm: config params and the fold-averaged curve by step."""
    if not tracking_enabled():
        return

    tracking_uri = os.getenv("MLFLOW_TRACKING_URI")
    experiment = os.getenv("COTEST_MLFLOW_EXPERIMENT", "cotesting")
    print(f"🔍 MLflow Tracking URI: {tracking_uri}")
    try:
        mlflow.set_tracking_uri(tracking_uri)
        mlflow.set_experiment(experiment)
    except Exception as e:
        print(f"⚠️ Warning: Could not set MLflow experiment '{experiment}' (non-critical): {e}")
        return

    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    for algorithm in config.algorithms:
        curves = curves_by_algorithm.get(algorithm.name, [])
        try:
            with mlflow.start_run(run_name=f"{config.name}-{algorithm.name}-{stamp}"):
                mlflow.log_params(
                    {
                        "task": config.task.value,
                        "algorithm_kind": algorithm.kind.value,
                        "learner": algorithm.learner.kind.value,
                        "query": algorithm.query.value,
                        "output": algorithm.output.value,
                        "folds": config.folds,
                        "n_initial": config.n_initial,
                        "episodes": config.episodes,
                        "batch_size": config.batch_size,
                        "seed": config.seed,
                    }
                )
                mean = _mean_curve(curves)
                for step, (count, accuracy) in enumerate(mean, start=1):
                    mlflow.log_metrics({"accuracy": accuracy, "labeled_count": count}, step=step)
                if mean:
                    mlflow.log_metrics({"final_accuracy": mean[-1][1]})
                for key, value in (extra_metrics or {}).get(algorithm.name, {}).items():
                    mlflow.log_metrics({key: value})
                mlflow.set_tags({"experiment": config.name, "algorithm": algorithm.name})
                print(f"📊 MLflow run ID: {mlflow.active_run().info.run_id} ({algorithm.name})")
        except MlflowException as e:
            print(f"⚠️ Warning: MLflow logging failed for {algorithm.name} (non-critical): {e}")
        except Exception as e:
            print(f"⚠️ Warning: Unexpected tracking error for {algorithm.name} (non-critical): {e}")
