"""Rating prediction: biased matrix factorization and the global-mean
baseline it has to beat.

MF predicts mu + b_u + b_i + p_u . q_i and is trained by SGD on squared
error with L2 on the biases and factors (never on mu). Users or items unseen
in training fall back to mu plus whichever bias is known. Predictions are
clipped to the training rating range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyInteractions, NonFiniteLoss
from .base import EarlyStopper, holdout_split


def interaction_loss_and_grad(
    rating: float,
    mu: float,
    b_u: float,
    b_i: float,
    p_u: np.ndarray,
    q_i: np.ndarray,
    l2: float,
):
    """Single-interaction objective 0.5*err^2 + (l2/2)*(b_u^2 + b_i^2 +
    ||p_u||^2 + ||q_i||^2) and its gradient w.r.t. (b_u, b_i, p_u, q_i)."""
    err = rating - (mu + b_u + b_i + float(p_u @ q_i))
    loss = 0.5 * err * err + 0.5 * l2 * (b_u * b_u + b_i * b_i + float(p_u @ p_u) + float(q_i @ q_i))
    g_bu = -err + l2 * b_u
    g_bi = -err + l2 * b_i
    g_pu = -err * q_i + l2 * p_u
    g_qi = -err * p_u + l2 * q_i
    return loss, g_bu, g_bi, g_pu, g_qi


@dataclass
class MfModel:
    model_id: str
    mu: float
    user_index: dict
    item_index: dict
    b_user: np.ndarray
    b_item: np.ndarray
    p: np.ndarray
    q: np.ndarray
    rating_lo: float
    rating_hi: float
    hyperparameters: dict
    epochs_run: int
    best_epoch: int | None
    final_train_loss: float
    val_history: list[float] = field(default_factory=list)

    def predict_one(self, user, item) -> float:
        u = self.user_index.get(user)
        i = self.item_index.get(item)
        r = self.mu
        if u is not None:
            r += self.b_user[u]
        if i is not None:
            r += self.b_item[i]
        if u is not None and i is not None:
            r += float(self.p[u] @ self.q[i])
        return float(np.clip(r, self.rating_lo, self.rating_hi))

    def predict(self, users, items) -> np.ndarray:
        return np.array([self.predict_one(u, i) for u, i in zip(users, items)])

    def params_dump(self) -> dict:
        return {
            "mu": self.mu,
            "user_bias": self.b_user.tolist(),
            "item_bias": self.b_item.tolist(),
            "user_factors": self.p.tolist(),
            "item_factors": self.q.tolist(),
            "users": sorted(self.user_index, key=self.user_index.get),
            "items": sorted(self.item_index, key=self.item_index.get),
            "rating_range": [self.rating_lo, self.rating_hi],
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "final_train_loss": self.final_train_loss,
        }


def _rmse(preds: np.ndarray, ratings: np.ndarray) -> float:
    return float(np.sqrt(np.mean((preds - ratings) ** 2)))


def train_mf(users, items, ratings, hp: dict, timestamps=None) -> MfModel:
    """Fit biased MF on (user, item, rating) triples.

    hp keys: rank, lr, l2, epochs, patience, min_delta, seed. Factors start
    at seeded uniform(-0.01, 0.01); a 10% interaction holdout drives early
    stopping on RMSE and the best epoch's parameters are kept.
    """
    n = len(ratings)
    if n == 0:
        raise EmptyInteractions("matrix factorization needs at least one interaction")
    ratings = np.asarray(ratings, dtype=float)

    seed = int(hp.get("seed", 0))
    rank, lr, l2 = int(hp["rank"]), float(hp["lr"]), float(hp["l2"])
    epochs = int(hp["epochs"])

    uniq_users = sorted(set(users))
    uniq_items = sorted(set(items))
    user_index = {u: k for k, u in enumerate(uniq_users)}
    item_index = {i: k for k, i in enumerate(uniq_items)}
    u_idx = np.array([user_index[u] for u in users])
    i_idx = np.array([item_index[i] for i in items])

    rng = np.random.default_rng(seed)
    mu = float(np.mean(ratings))
    b_user = np.zeros(len(uniq_users))
    b_item = np.zeros(len(uniq_items))
    p = rng.uniform(-0.01, 0.01, size=(len(uniq_users), rank))
    q = rng.uniform(-0.01, 0.01, size=(len(uniq_items), rank))
    lo, hi = float(np.min(ratings)), float(np.max(ratings))

    train_rows, val_rows = holdout_split(n, seed, timestamps)
    stopper = EarlyStopper(int(hp["patience"]), float(hp["min_delta"]))
    best = None
    val_history: list[float] = []
    epochs_run = 0

    def raw_predict(rows) -> np.ndarray:
        return mu + b_user[u_idx[rows]] + b_item[i_idx[rows]] + np.sum(p[u_idx[rows]] * q[i_idx[rows]], axis=1)

    for epoch in range(epochs):
        for row in rng.permutation(train_rows):
            u, i = u_idx[row], i_idx[row]
            err = ratings[row] - (mu + b_user[u] + b_item[i] + float(p[u] @ q[i]))
            b_user[u] += lr * (err - l2 * b_user[u])
            b_item[i] += lr * (err - l2 * b_item[i])
            pu = p[u].copy()
            p[u] += lr * (err * q[i] - l2 * pu)
            q[i] += lr * (err * pu - l2 * q[i])
        epochs_run = epoch + 1
        if not (np.all(np.isfinite(b_user)) and np.all(np.isfinite(b_item)) and np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise NonFiniteLoss(f"factors diverged at epoch {epoch + 1} (lr={lr})")
        if val_rows is None:
            continue
        vloss = _rmse(np.clip(raw_predict(val_rows), lo, hi), ratings[val_rows])
        val_history.append(vloss)
        prev_best = stopper.best_epoch
        keep_going = stopper.update(epoch, vloss)
        if stopper.best_epoch == epoch and stopper.best_epoch != prev_best:
            best = (b_user.copy(), b_item.copy(), p.copy(), q.copy())
        if not keep_going:
            break

    if val_rows is not None and best is not None:
        b_user, b_item, p, q = best
        best_epoch = stopper.best_epoch
    else:
        best_epoch = None
    train_loss = _rmse(np.clip(raw_predict(np.arange(n)), lo, hi), ratings)
    if not np.isfinite(train_loss):
        raise NonFiniteLoss("final training loss is not finite")
    return MfModel(
        "mf", mu, user_index, item_index, b_user, b_item, p, q, lo, hi,
        dict(hp), epochs_run, best_epoch, train_loss, val_history,
    )


@dataclass
class GlobalMeanModel:
    model_id: str
    mu: float
    rating_lo: float
    rating_hi: float
    final_train_loss: float

    def predict_one(self, user, item) -> float:
        return self.mu

    def predict(self, users, items) -> np.ndarray:
        return np.full(len(list(users)), self.mu)

    def params_dump(self) -> dict:
        return {"mu": self.mu, "rating_range": [self.rating_lo, self.rating_hi]}


def train_global_mean(users, items, ratings, hp: dict | None = None, timestamps=None) -> GlobalMeanModel:
    """Predict the training mean rating for everything."""
    if len(ratings) == 0:
        raise EmptyInteractions("global mean needs at least one rating")
    ratings = np.asarray(ratings, dtype=float)
    mu = float(np.mean(ratings))
    return GlobalMeanModel("global_mean", mu, float(np.min(ratings)), float(np.max(ratings)), _rmse(np.full(len(ratings), mu), ratings))
