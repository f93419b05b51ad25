"""The model zoo: one small deterministic family per task.

ctr    -> logistic regression on the preprocessed feature matrix
rating -> biased matrix factorization, plus the global-mean baseline
top_n  -> item-based kNN and popularity, both over implicit interactions

The rating and top_n families use interactions only; feature columns are
never consumed by them (the run report logs this).
"""

from __future__ import annotations

from ..schema import TaskKind, TaskSpec
from .base import HyperParam, ModelSpec
from .factorization import (
    GlobalMeanModel,
    MfModel,
    interaction_loss_and_grad,
    train_global_mean,
    train_mf,
)
from .logreg import LogregModel, loss_and_grad, sigmoid, train_logreg
from .neighbors import ItemKnnModel, PopularityModel, train_item_knn, train_popularity

MODEL_SPECS: dict[str, ModelSpec] = {
    spec.model_id: spec
    for spec in (
        ModelSpec(
            model_id="logreg",
            tasks=frozenset({TaskKind.CTR}),
            params=(
                HyperParam("lr", grid=(0.3, 0.1, 0.03), default=0.1, low=0.01, high=0.5, scale="log"),
                HyperParam("l2", grid=(0.0, 1e-4, 1e-2), default=1e-4, low=1e-6, high=0.1, scale="log"),
            ),
            fixed=(("epochs", 100), ("batch", 32), ("patience", 5), ("min_delta", 1e-4)),
        ),
        ModelSpec(
            model_id="mf",
            tasks=frozenset({TaskKind.RATING}),
            params=(
                HyperParam("rank", grid=(4, 8, 16), default=8, low=2, high=32, integer=True),
                HyperParam("lr", grid=(0.05, 0.01), default=0.05, low=0.005, high=0.1, scale="log"),
                HyperParam("l2", grid=(1e-3, 1e-2), default=1e-3, low=1e-4, high=0.1, scale="log"),
            ),
            fixed=(("epochs", 60), ("patience", 5), ("min_delta", 1e-4)),
            requires_user_item=True,
        ),
        ModelSpec(
            model_id="global_mean",
            tasks=frozenset({TaskKind.RATING}),
            params=(),
        ),
        ModelSpec(
            model_id="popularity",
            tasks=frozenset({TaskKind.TOP_N}),
            params=(),
            requires_user_item=True,
        ),
        ModelSpec(
            model_id="item_knn",
            tasks=frozenset({TaskKind.TOP_N}),
            params=(
                HyperParam("k_neighbors", grid=(10, 50, 100), default=10, low=5, high=200, integer=True),
                HyperParam("shrinkage", grid=(0.0, 10.0), default=0.0, low=0.0, high=100.0),
            ),
            requires_user_item=True,
        ),
    )
}


def compatible_models(task: TaskSpec) -> list[ModelSpec]:
    """Specs usable for a resolved task, ascending by model_id."""
    has_ids = task.user_col is not None and task.item_col is not None
    return [
        spec
        for model_id, spec in sorted(MODEL_SPECS.items())
        if task.task in spec.tasks and (not spec.requires_user_item or has_ids)
    ]


__all__ = [
    "MODEL_SPECS",
    "ModelSpec",
    "HyperParam",
    "compatible_models",
    "LogregModel",
    "MfModel",
    "GlobalMeanModel",
    "PopularityModel",
    "ItemKnnModel",
    "train_logreg",
    "train_mf",
    "train_global_mean",
    "train_popularity",
    "train_item_knn",
    "loss_and_grad",
    "interaction_loss_and_grad",
    "sigmoid",
]
