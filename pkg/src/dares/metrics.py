"""Task evaluation metrics.

All functions are pure and deterministic. Choices that standard definitions
leave open are pinned here: AUC gives half credit to tied scores (rank-sum
formulation), log loss clips probabilities to [1e-15, 1 - 1e-15], and
precision@k divides by min(k, len(recommended)).
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence, Set

import numpy as np

from .errors import EmptyInput, LengthMismatch

PROB_CLIP = 1e-15


def _as_arrays(a, b, name: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"{name}: length {x.shape[0]} vs {y.shape[0]}")
    return x, y


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    n = len(sx)
    bounds = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]])
    ranks_sorted = np.empty(n, dtype=float)
    for a, b in zip(bounds, np.r_[bounds[1:], n]):
        ranks_sorted[a:b] = 0.5 * (a + 1 + b)
    ranks = np.empty(n, dtype=float)
    ranks[order] = ranks_sorted
    return ranks


def auc_roc(labels, scores) -> Optional[float]:
    """Probability that a random positive outranks a random negative.

    Returns None when only one class is present (the metric is undefined).
    """
    y, s = _as_arrays(labels, scores, "auc_roc")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(s)
    rank_sum = float(np.sum(ranks[y == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def log_loss(labels, probabilities) -> float:
    """Mean negative log likelihood of binary labels under predicted
    probabilities, clipped away from 0 and 1."""
    y, p = _as_arrays(labels, probabilities, "log_loss")
    if len(y) == 0:
        raise EmptyInput("log_loss needs at least one element")
    p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def rmse(labels, predictions) -> float:
    y, p = _as_arrays(labels, predictions, "rmse")
    if len(y) == 0:
        raise EmptyInput("rmse needs at least one element")
    return float(np.sqrt(np.mean((y - p) ** 2)))


def mae(labels, predictions) -> float:
    y, p = _as_arrays(labels, predictions, "mae")
    if len(y) == 0:
        raise EmptyInput("mae needs at least one element")
    return float(np.mean(np.abs(y - p)))


def _topk_means(
    recommended: Mapping, relevant: Mapping, k: int, per_user
) -> Optional[float]:
    if k < 1:
        raise EmptyInput(f"k must be >= 1, got {k}")
    values = []
    for user in relevant:
        rel = relevant[user]
        if not rel:
            continue  # users with nothing relevant are excluded
        recs = list(recommended.get(user, ()))[:k]
        values.append(per_user(recs, rel))
    if not values:
        return None
    return float(np.mean(values))


def precision_at_k(
    recommended: Mapping[object, Sequence], relevant: Mapping[object, Set], k: int
) -> Optional[float]:
    """Mean over users of |top-k hits| / min(k, len(recommended)).

    Users with an empty relevant set are excluded from the mean; None when no
    user has a nonempty relevant set.
    """

    def one(recs, rel):
        if not recs:
            return 0.0
        return len(set(recs) & set(rel)) / min(k, len(recs))

    return _topk_means(recommended, relevant, k, one)


def recall_at_k(
    recommended: Mapping[object, Sequence], relevant: Mapping[object, Set], k: int
) -> Optional[float]:
    """Mean over users of |top-k hits| / |relevant|."""

    def one(recs, rel):
        return len(set(recs) & set(rel)) / len(rel)

    return _topk_means(recommended, relevant, k, one)
