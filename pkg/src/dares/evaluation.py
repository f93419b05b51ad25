"""Final test-set evaluation and the predictions output.

A labeled test set yields the task's full metric set plus predictions; an
unlabeled one yields predictions only, with every metric explicitly null and
a reason. Metric values are always finite or null-with-reason, never NaN.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics
from .dataset import Dataset
from .errors import AllLabelsMissing, EmptyInput, SchemaMismatch
from .preprocess import apply_plan, label_vector
from .schema import TaskKind, TaskSpec
from .tuning import FittedBundle, _group_interactions

TOP_N_KS = (5, 10, 20)

CTR_METRICS = ("auc_roc", "log_loss")
RATING_METRICS = ("rmse", "mae")
TOP_N_METRICS = tuple(f"{m}_at_{k}" for k in TOP_N_KS for m in ("precision", "recall"))


def _entry(value: Optional[float], reason: Optional[str] = None) -> dict:
    return {"value": value, "reason": reason}


def _all_null(names, reason: str) -> dict:
    return {name: _entry(None, reason) for name in names}


@dataclass
class TestEvaluation:
    metric_set: Optional[dict]
    predictions_header: tuple[str, ...]
    predictions_rows: list[tuple]
    notes: list[dict] = field(default_factory=list)


def _format(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def write_predictions(path: str, evaluation: TestEvaluation) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(evaluation.predictions_header)
        for row in evaluation.predictions_rows:
            writer.writerow([_format(v) for v in row])


def _ctr_eval(bundle: FittedBundle, test: Dataset, task: TaskSpec) -> TestEvaluation:
    X = apply_plan(bundle.plan, test)
    probs = bundle.model.predict_proba(X.data)
    rows = [(i, probs[i]) for i in range(test.row_count)]

    if task.label.name not in test.columns:
        return TestEvaluation(_all_null(CTR_METRICS, "unlabeled test set"), ("row_index", "prediction"), rows)
    try:
        y, mask = label_vector(bundle.label_plan, test)
    except AllLabelsMissing:
        return TestEvaluation(
            _all_null(CTR_METRICS, "label column has no usable values"), ("row_index", "prediction"), rows
        )
    keep = ~mask
    notes = []
    if int(mask.sum()):
        notes.append({"event": "test_rows_without_label", "count": int(mask.sum())})
    auc = metrics.auc_roc(y[keep], probs[keep])
    metric_set = {
        "auc_roc": _entry(auc) if auc is not None else _entry(None, "single class in test labels"),
        "log_loss": _entry(metrics.log_loss(y[keep], probs[keep])),
    }
    return TestEvaluation(metric_set, ("row_index", "prediction"), rows, notes)


def _rating_eval(bundle: FittedBundle, test: Dataset, task: TaskSpec) -> TestEvaluation:
    ucol = test.columns.get(task.user_col) if task.user_col else None
    icol = test.columns.get(task.item_col) if task.item_col else None
    users = ucol.values if ucol is not None else [None] * test.row_count
    items = icol.values if icol is not None else [None] * test.row_count
    preds = bundle.model.predict(users, items)
    rows = [(i, preds[i]) for i in range(test.row_count)]

    if task.label.name not in test.columns:
        return TestEvaluation(_all_null(RATING_METRICS, "unlabeled test set"), ("row_index", "prediction"), rows)
    try:
        y, mask = label_vector(bundle.label_plan, test)
    except AllLabelsMissing:
        return TestEvaluation(
            _all_null(RATING_METRICS, "label column has no usable values"), ("row_index", "prediction"), rows
        )
    keep = np.flatnonzero(~mask)
    notes = []
    if int(mask.sum()):
        notes.append({"event": "test_rows_without_label", "count": int(mask.sum())})
    metric_set = {
        "rmse": _entry(metrics.rmse(y[keep], preds[keep])),
        "mae": _entry(metrics.mae(y[keep], preds[keep])),
    }
    return TestEvaluation(metric_set, ("row_index", "prediction"), rows, notes)


def _top_n_eval(bundle: FittedBundle, test: Dataset, task: TaskSpec, top_k: int) -> TestEvaluation:
    relevant_all = _group_interactions(test, np.arange(test.row_count), task)
    train_hist = bundle.model.user_items
    scorable = {u: rel for u, rel in relevant_all.items() if u in train_hist}
    unseen = sorted(set(relevant_all) - set(scorable))

    notes = []
    if unseen:
        notes.append({"event": "test_users_without_training_history", "count": len(unseen)})

    rows = []
    for user in sorted(relevant_all):
        for rank, (item, score) in enumerate(bundle.model.recommend(user, top_k), start=1):
            rows.append((user, rank, item, score))

    header = ("user_id", "rank", "item_id", "score")
    if not scorable:
        return TestEvaluation(
            _all_null(TOP_N_METRICS, "no test user has training history"), header, rows, notes
        )
    recommended = {
        u: [item for item, _ in bundle.model.recommend(u, max(TOP_N_KS))] for u in scorable
    }
    metric_set = {}
    for k in TOP_N_KS:
        metric_set[f"precision_at_{k}"] = _entry(metrics.precision_at_k(recommended, scorable, k))
        metric_set[f"recall_at_{k}"] = _entry(metrics.recall_at_k(recommended, scorable, k))
    return TestEvaluation(metric_set, header, rows, notes)


def evaluate_test(
    bundle: FittedBundle, test: Dataset, task: TaskSpec, top_k: int = 10
) -> TestEvaluation:
    """Score the final model on a held-out test set.

    Raises EmptyInput for a test set with no rows and SchemaMismatch when the
    test data was loaded under a different schema than the model.
    """
    if test.row_count == 0:
        raise EmptyInput("test set has no rows")
    plan_schema = bundle.plan.schema if bundle.plan is not None else None
    if plan_schema is not None and test.schema != plan_schema:
        raise SchemaMismatch("test dataset schema differs from the training schema")

    if task.task is TaskKind.CTR:
        return _ctr_eval(bundle, test, task)
    if task.task is TaskKind.RATING:
        return _rating_eval(bundle, test, task)
    return _top_n_eval(bundle, test, task, top_k)
