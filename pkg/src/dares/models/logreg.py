"""L2-regularized logistic regression trained by mini-batch gradient descent.

Deterministic for a given seed: initialization is zeros and the per-epoch
shuffle sequence is fixed by the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss, SingleClassLabels
from .base import EarlyStopper, holdout_split


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean log loss plus (l2/2)*||w||^2, and its exact gradient.

    The bias is not regularized. Computed in a numerically stable form so the
    loss stays finite for any weights.
    """
    z = X @ w + b
    # log(1 + e^-z) and log(1 + e^z) without overflow
    loss = float(np.mean(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)))
    loss += 0.5 * l2 * float(w @ w)
    residual = sigmoid(z) - y
    grad_w = X.T @ residual / len(y) + l2 * w
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


@dataclass
class LogregModel:
    model_id: str
    weights: np.ndarray
    bias: float
    hyperparameters: dict
    epochs_run: int
    best_epoch: int | None  # None when no holdout was used
    final_train_loss: float
    val_history: list[float] = field(default_factory=list)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(X @ self.weights + self.bias)

    def params_dump(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "final_train_loss": self.final_train_loss,
        }


def _val_loss(w, b, X, y) -> float:
    z = X @ w + b
    return float(np.mean(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)))


def train_logreg(X: np.ndarray, y: np.ndarray, hp: dict, timestamps=None) -> LogregModel:
    """Fit on a feature matrix and binary labels.

    hp keys: lr, l2, epochs, batch, patience, min_delta, seed. A 10% holdout
    (latest by timestamp when given, else seeded random) drives early
    stopping; the parameters from the best holdout epoch are kept.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    classes = np.unique(y)
    if len(classes) < 2:
        raise SingleClassLabels(f"labels contain a single class ({classes.tolist()})")

    seed = int(hp.get("seed", 0))
    lr, l2 = float(hp["lr"]), float(hp["l2"])
    epochs, batch = int(hp["epochs"]), int(hp["batch"])

    train_idx, val_idx = holdout_split(len(y), seed, timestamps)
    if val_idx is not None and len(np.unique(y[train_idx])) < 2:
        train_idx, val_idx = np.arange(len(y)), None  # degenerate split; train on everything
    Xtr, ytr = X[train_idx], y[train_idx]
    Xval = X[val_idx] if val_idx is not None else None
    yval = y[val_idx] if val_idx is not None else None

    d = X.shape[1]
    w = np.zeros(d)
    b = 0.0
    best = (w.copy(), b)
    stopper = EarlyStopper(int(hp["patience"]), float(hp["min_delta"]))
    rng = np.random.default_rng(seed)
    val_history: list[float] = []
    epochs_run = 0

    for epoch in range(epochs):
        perm = rng.permutation(len(ytr))
        for start in range(0, len(perm), batch):
            rows = perm[start : start + batch]
            _, gw, gb = loss_and_grad(w, b, Xtr[rows], ytr[rows], l2)
            w -= lr * gw
            b -= lr * gb
        epochs_run = epoch + 1
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise NonFiniteLoss(f"parameters diverged at epoch {epoch + 1} (lr={lr})")
        if Xval is None:
            continue
        vloss = _val_loss(w, b, Xval, yval)
        if not np.isfinite(vloss):
            raise NonFiniteLoss(f"validation loss diverged at epoch {epoch + 1} (lr={lr})")
        val_history.append(vloss)
        prev_best = stopper.best_epoch
        keep_going = stopper.update(epoch, vloss)
        if stopper.best_epoch == epoch and stopper.best_epoch != prev_best:
            best = (w.copy(), b)
        if not keep_going:
            break

    if Xval is not None:
        w, b = best
        best_epoch = stopper.best_epoch
    else:
        best_epoch = None
    train_loss, _, _ = loss_and_grad(w, b, X, y, l2)
    if not np.isfinite(train_loss):
        raise NonFiniteLoss("final training loss is not finite")
    return LogregModel("logreg", w, b, dict(hp), epochs_run, best_epoch, train_loss, val_history)
