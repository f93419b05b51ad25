"""Hyperparameter search, cross-validation, and model selection.

Splits are seeded k-fold by default, or a temporal holdout whenever the
schema binds a timestamp column. Preprocessing statistics are fitted inside
each training fold, never on the fold being scored.

Trials are independent and may run in parallel: every trial's seed is
master seed + enumeration index, and results are aggregated in enumeration
order, so any degree of parallelism yields the same winner.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics
from .dataset import Dataset
from .errors import DaresError, EmptyTrials, NoCompatibleModel, TooFewRows
from .models import (
    compatible_models,
    train_global_mean,
    train_item_knn,
    train_logreg,
    train_mf,
    train_popularity,
)
from .preprocess import (
    PreprocessOptions,
    apply_plan,
    fit_label_plan,
    fit_plan,
    label_vector,
)
from .schema import TaskKind, TaskSpec

DEFAULT_K_FOLDS = 5
DEFAULT_TEMPORAL_FRACTION = 0.2
SELECTION_RECALL_K = 10

# selection metric per task: (name, higher_is_better)
SELECTION_METRIC = {
    TaskKind.CTR: ("auc_roc", True),
    TaskKind.RATING: ("rmse", False),
    TaskKind.TOP_N: (f"recall_at_{SELECTION_RECALL_K}", True),
}


@dataclass
class SplitPlan:
    kind: str  # "kfold" | "temporal"
    folds: list[tuple[np.ndarray, np.ndarray]]  # (train rows, validation rows)
    usable_rows: np.ndarray
    excluded_rows: np.ndarray  # rows unusable for the task (missing label / ids)
    k: Optional[int] = None
    holdout_fraction: Optional[float] = None

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "folds": len(self.folds),
            "usable_rows": int(len(self.usable_rows)),
            "excluded_rows": [int(i) for i in self.excluded_rows],
        }
        if self.kind == "kfold":
            out["k"] = self.k
        else:
            out["holdout_fraction"] = self.holdout_fraction
        return out


def _usable_rows(data: Dataset, task: TaskSpec) -> tuple[np.ndarray, np.ndarray]:
    n = data.row_count
    ok = np.ones(n, dtype=bool)
    if task.task is TaskKind.TOP_N:
        for col_name in (task.user_col, task.item_col):
            missing = data.columns[col_name].missing
            ok &= ~np.asarray(missing, dtype=bool)
    else:
        ok &= ~np.asarray(data.columns[task.label.name].missing, dtype=bool)
    rows = np.arange(n)
    return rows[ok], rows[~ok]


def timestamps_for(data: Dataset, task: TaskSpec, rows) -> Optional[np.ndarray]:
    """Timestamp values for the given rows, or None when the schema has no
    timestamp or any of those rows lacks one."""
    if task.timestamp_col is None:
        return None
    col = data.columns[task.timestamp_col]
    values = [col.values[i] for i in rows]
    if any(v is None for v in values):
        return None
    return np.asarray(values, dtype=np.int64)


def make_splits(
    data: Dataset,
    task: TaskSpec,
    policy: str = "auto",
    k: int = DEFAULT_K_FOLDS,
    holdout_fraction: float = DEFAULT_TEMPORAL_FRACTION,
    seed: int = 0,
) -> SplitPlan:
    """Build cross-validation folds over the task's usable rows.

    policy "auto" picks a temporal holdout when a timestamp binding exists,
    else seeded k-fold. Temporal ordering sorts by (timestamp, row index)
    with missing timestamps first, so the validation side is always the
    latest data.
    """
    usable, excluded = _usable_rows(data, task)
    n = len(usable)
    if policy == "auto":
        policy = "temporal" if task.timestamp_col is not None else "kfold"

    if policy == "kfold":
        if n < k:
            raise TooFewRows(f"k-fold needs at least k={k} usable rows, have {n}")
        perm = np.random.default_rng(seed).permutation(usable)
        parts = np.array_split(perm, k)
        folds = []
        for i in range(k):
            val = np.sort(parts[i])
            train = np.sort(np.concatenate([parts[j] for j in range(k) if j != i]))
            folds.append((train, val))
        return SplitPlan("kfold", folds, usable, excluded, k=k)

    if n < 2:
        raise TooFewRows(f"temporal split needs at least 2 usable rows, have {n}")
    ts_col = data.columns[task.timestamp_col]
    keys = [((0, ts_col.values[i]) if not ts_col.missing[i] else (-1, 0), i) for i in usable]
    keys.sort()
    ordered = np.asarray([i for _, i in keys])
    n_val = min(n - 1, max(1, int(n * holdout_fraction + 0.5)))
    folds = [(np.sort(ordered[:-n_val]), np.sort(ordered[-n_val:]))]
    return SplitPlan("temporal", folds, usable, excluded, holdout_fraction=holdout_fraction)


@dataclass
class TrialResult:
    index: int
    model_id: str
    hyperparameters: dict  # searched parameters only (fixed ones live in the spec)
    fold_scores: list[Optional[float]]
    mean_score: Optional[float]
    seed: int
    failed: bool = False
    failure_reason: Optional[str] = None

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "model": self.model_id,
            "hyperparameters": self.hyperparameters,
            "fold_scores": self.fold_scores,
            "mean_score": self.mean_score,
            "seed": self.seed,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
        }


@dataclass
class FittedBundle:
    """Everything produced by fitting one configuration on one row set."""

    model: object
    plan: object = None  # PreprocessPlan (ctr only)
    label_plan: object = None
    train_rows: np.ndarray = None
    dropped_interactions: int = 0  # rating rows without user/item, unusable by MF


def interactions_from(data: Dataset, rows, task: TaskSpec, ratings: Optional[np.ndarray] = None):
    """(users, items[, ratings], kept_rows) for rows with both ids present.

    ``ratings`` is indexed by original dataset row when given.
    """
    ucol = data.columns[task.user_col]
    icol = data.columns[task.item_col]
    users, items, values, kept = [], [], [], []
    for i in rows:
        if ucol.missing[i] or icol.missing[i]:
            continue
        users.append(ucol.values[i])
        items.append(icol.values[i])
        if ratings is not None:
            values.append(ratings[i])
        kept.append(i)
    if ratings is not None:
        return users, items, np.asarray(values, dtype=float), np.asarray(kept, dtype=int)
    return users, items, np.asarray(kept, dtype=int)


def fit_configuration(
    data: Dataset,
    rows: np.ndarray,
    task: TaskSpec,
    model_id: str,
    hp: dict,
    options: PreprocessOptions,
) -> FittedBundle:
    """Train one model configuration on the given rows. Raises DaresError
    subclasses on unfit data (divergence, single class, nothing usable)."""
    rows = np.asarray(rows)
    ts = timestamps_for(data, task, rows)

    if task.task is TaskKind.CTR:
        train = data.subset(rows)
        plan = fit_plan(train, task, options)
        X = apply_plan(plan, train, drop_duplicate_rows=options.drop_duplicate_rows)
        y_all, mask = label_vector(plan.label, train)
        keep = ~mask[X.kept_row_index]
        X_data = X.data[keep]
        y = y_all[X.kept_row_index][keep]
        ts_kept = ts[X.kept_row_index][keep] if ts is not None else None
        model = train_logreg(X_data, y, hp, timestamps=ts_kept)
        return FittedBundle(model, plan=plan, label_plan=plan.label, train_rows=rows)

    if task.task is TaskKind.RATING:
        train = data.subset(rows)
        label_plan = fit_label_plan(train, task)
        y_all, mask = label_vector(label_plan, train)
        good = np.flatnonzero(~mask)
        if model_id == "global_mean":
            model = train_global_mean([], [], y_all[good])
            return FittedBundle(model, label_plan=label_plan, train_rows=rows)
        ratings_by_row = {int(i): y_all[i] for i in good}
        users, items, values, kept_local = interactions_from(train, good, task, y_all)
        ts_kept = None
        if ts is not None and len(kept_local):
            ts_kept = ts[kept_local]
        model = train_mf(users, items, values, hp, timestamps=ts_kept)
        dropped = len(good) - len(kept_local)
        return FittedBundle(model, label_plan=label_plan, train_rows=rows, dropped_interactions=dropped)

    # top_n: usable rows are guaranteed to have both ids
    train = data.subset(rows)
    users, items, _ = interactions_from(train, np.arange(train.row_count), task)
    if model_id == "popularity":
        model = train_popularity(users, items)
    else:
        model = train_item_knn(users, items, hp)
    return FittedBundle(model, train_rows=rows)


def _group_interactions(data: Dataset, rows, task: TaskSpec) -> dict:
    """user -> set of items, over the given rows."""
    ucol = data.columns[task.user_col]
    icol = data.columns[task.item_col]
    grouped: dict = {}
    for i in rows:
        if ucol.missing[i] or icol.missing[i]:
            continue
        grouped.setdefault(ucol.values[i], set()).add(icol.values[i])
    return grouped


def score_fold(
    bundle: FittedBundle, data: Dataset, val_rows: np.ndarray, task: TaskSpec
) -> Optional[float]:
    """The task's selection metric on held-out rows; None when undefined."""
    if task.task is TaskKind.CTR:
        val = data.subset(val_rows)
        Xv = apply_plan(bundle.plan, val)
        y_all, mask = label_vector(bundle.label_plan, val)
        keep = ~mask
        probs = bundle.model.predict_proba(Xv.data[keep])
        return metrics.auc_roc(y_all[keep], probs)

    if task.task is TaskKind.RATING:
        val = data.subset(val_rows)
        y_all, mask = label_vector(bundle.label_plan, val)
        good = np.flatnonzero(~mask)
        if len(good) == 0:
            return None
        ucol = val.columns.get(task.user_col) if task.user_col else None
        icol = val.columns.get(task.item_col) if task.item_col else None
        if ucol is not None and icol is not None:
            users = [ucol.values[i] for i in good]
            items = [icol.values[i] for i in good]
        else:
            users = items = [None] * len(good)
        preds = bundle.model.predict(users, items)
        return metrics.rmse(y_all[good], preds)

    # top_n: rank for every validation user that has training history
    train_hist = bundle.model.user_items
    relevant = {
        u: rel for u, rel in _group_interactions(data, val_rows, task).items() if u in train_hist
    }
    if not relevant:
        return None
    recommended = {
        u: [item for item, _ in bundle.model.recommend(u, SELECTION_RECALL_K)] for u in relevant
    }
    return metrics.recall_at_k(recommended, relevant, SELECTION_RECALL_K)


def enumerate_trials(
    task: TaskSpec, strategy: str, n_trials: int, seed: int
) -> list[tuple[str, dict]]:
    """The (model_id, searched-hyperparameters) list, in enumeration order."""
    specs = compatible_models(task)
    if not specs:
        raise NoCompatibleModel(f"no model family supports task {task.task.value} with this schema")
    if strategy == "grid":
        out = []
        for spec in specs:  # already ascending by model_id
            fixed = dict(spec.fixed)
            for assignment in spec.grid_assignments():
                searched = {k: v for k, v in assignment.items() if k not in fixed}
                out.append((spec.model_id, searched))
        return out
    if strategy != "random":
        raise ValueError(f"unknown strategy {strategy!r}")
    by_id = {spec.model_id: spec for spec in specs}
    ids = sorted(by_id)
    out = []
    for i in range(n_trials):
        rng = np.random.default_rng(seed + i)
        spec = by_id[ids[int(rng.integers(len(ids)))]]
        fixed = dict(spec.fixed)
        assignment = spec.sample_assignment(rng)
        searched = {k: v for k, v in assignment.items() if k not in fixed}
        out.append((spec.model_id, searched))
    return out


def _thread_count() -> int:
    raw = os.environ.get("DARES_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def run_search(
    data: Dataset,
    task: TaskSpec,
    plan: SplitPlan,
    strategy: str = "grid",
    n_trials: int = 20,
    seed: int = 0,
    options: PreprocessOptions = PreprocessOptions(),
    threads: Optional[int] = None,
) -> list[TrialResult]:
    """Run every trial over every fold and collect TrialResults.

    A trial whose training raises (divergence, degenerate fold) is recorded
    as failed with the worst possible score rather than aborting the run.
    """
    assignments = enumerate_trials(task, strategy, n_trials, seed)
    specs = {spec.model_id: spec for spec in compatible_models(task)}

    def run_one(index: int) -> TrialResult:
        model_id, searched = assignments[index]
        trial_seed = seed + index
        hp = {**dict(specs[model_id].fixed), **searched, "seed": trial_seed}
        fold_scores: list[Optional[float]] = []
        for train_rows, val_rows in plan.folds:
            try:
                bundle = fit_configuration(data, train_rows, task, model_id, hp, options)
                fold_scores.append(score_fold(bundle, data, val_rows, task))
            except DaresError as exc:
                return TrialResult(
                    index, model_id, searched, fold_scores, None, trial_seed,
                    failed=True, failure_reason=f"{exc.code}: {exc.message}",
                )
        defined = [s for s in fold_scores if s is not None]
        if not defined:
            return TrialResult(
                index, model_id, searched, fold_scores, None, trial_seed,
                failed=True, failure_reason="MetricUndefined: no fold produced a defined score",
            )
        return TrialResult(index, model_id, searched, fold_scores, float(np.mean(defined)), trial_seed)

    workers = threads if threads is not None else _thread_count()
    indices = range(len(assignments))
    if workers <= 1:
        results = [run_one(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, indices))
    results.sort(key=lambda t: t.index)
    return results


def select_best(trials: list[TrialResult], task: TaskSpec) -> TrialResult:
    """The winning trial: best mean score, ties broken by ascending model_id
    then enumeration index; failed trials rank below everything."""
    if not trials:
        raise EmptyTrials("no trials to select from")
    _, higher_better = SELECTION_METRIC[task.task]

    def key(t: TrialResult):
        if t.failed or t.mean_score is None:
            signed = float("inf")
        else:
            signed = -t.mean_score if higher_better else t.mean_score
        return (signed, t.model_id, t.index)

    return min(trials, key=key)
