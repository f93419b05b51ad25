"""Model zoo plumbing: hyperparameter spaces and training helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..schema import TaskKind

HOLDOUT_FRACTION = 0.1  # early-stopping holdout carved from training data
MIN_ROWS_FOR_HOLDOUT = 10


@dataclass(frozen=True)
class HyperParam:
    """One tunable parameter: a pinned grid for grid search plus an optional
    bounded range for random search (grid values are sampled otherwise)."""

    name: str
    grid: tuple
    default: object
    low: Optional[float] = None
    high: Optional[float] = None
    scale: str = "linear"  # or "log"
    integer: bool = False

    def sample(self, rng: np.random.Generator):
        if self.low is None or self.high is None:
            return self.grid[int(rng.integers(len(self.grid)))]
        if self.scale == "log":
            value = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            value = rng.uniform(self.low, self.high)
        return int(round(value)) if self.integer else value


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    tasks: frozenset
    params: tuple[HyperParam, ...]
    # training constants that are not searched over
    fixed: tuple[tuple[str, object], ...] = ()
    requires_user_item: bool = False

    def defaults(self) -> dict:
        hp = {p.name: p.default for p in self.params}
        hp.update(dict(self.fixed))
        return hp

    def grid_assignments(self) -> list[dict]:
        """Cartesian product in declared order: first parameter varies
        slowest, values in declared order."""
        assignments = [dict(self.fixed)]
        for p in self.params:
            assignments = [{**a, p.name: v} for a in assignments for v in p.grid]
        return assignments

    def sample_assignment(self, rng: np.random.Generator) -> dict:
        hp = dict(self.fixed)
        for p in self.params:
            hp[p.name] = p.sample(rng)
        return hp


class EarlyStopper:
    """Stop when the validation objective fails to improve by min_delta for
    ``patience`` consecutive epochs. Tracks best epoch for snapshotting."""

    def __init__(self, patience: int, min_delta: float):
        self.patience = patience
        self.min_delta = min_delta
        self.best_loss = math.inf
        self.best_epoch = -1
        self.bad_epochs = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record an epoch's validation loss; True means keep training."""
        if self.best_loss - loss > self.min_delta:
            self.best_loss = loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        if loss < self.best_loss:  # improvement too small to reset patience
            self.best_loss = loss
            self.best_epoch = epoch
        self.bad_epochs += 1
        return self.bad_epochs < self.patience


def holdout_split(
    n: int, seed: int, timestamps=None
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Carve the early-stopping holdout out of n training rows.

    Latest rows by timestamp when timestamps are given, else a seeded random
    10%. Too few rows -> no holdout (second element None).
    """
    if n < MIN_ROWS_FOR_HOLDOUT:
        return np.arange(n), None
    n_val = max(1, int(round(HOLDOUT_FRACTION * n)))
    if timestamps is not None:
        order = np.lexsort((np.arange(n), np.asarray(timestamps)))
    else:
        order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[:-n_val]), np.sort(order[-n_val:])
