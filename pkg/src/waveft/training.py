"""Deterministic single-layer training: Adam, step LR schedule, two losses.

The trainable state lives entirely in the adapter; the base matrix W0 is
frozen.  Runs are reproducible: the run seed fixes the shuffle order and
everything else is pure arithmetic in double precision.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .rng import derive_rng

__all__ = [
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "Adam",
    "step_lr",
    "mse",
    "cross_entropy",
    "train_linear",
]


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.01
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    gamma: float = 1.0
    step_epochs: int = 1
    epochs: int = 0
    batch_size: int = 64
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        b1, b2 = self.betas
        if not (0 < b1 < 1 and 0 < b2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.step_epochs < 1:
            raise ValueError("step_epochs must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in ("mse", "cross_entropy"):
            raise ValueError(f"unknown loss: {self.loss!r}")


@dataclass
class TrainReport:
    epoch_losses: list
    initial_loss: float
    final_loss: float
    final_metric: float
    wallclock_s: float
    seed: int
    config: TrainConfig = field(repr=False)


def step_lr(lr0, gamma, step_epochs, epoch):
    """Piecewise-constant decay: lr0 * gamma^(epoch // step_epochs)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr0 * gamma ** (epoch // step_epochs)


class Adam:
    """Standard Adam with bias correction over a dict of parameter arrays."""

    def __init__(self, params, betas=(0.9, 0.999), eps=1e-8):
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads, lr):
        """Update params in place from grads at learning rate lr."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for {k!r}")
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def mse(pred, target):
    """Mean squared error over all elements and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = pred - target
    loss = float(np.mean(diff ** 2))
    return loss, 2.0 * diff / diff.size


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy; logits are (classes,) or (classes, batch).

    Returns the loss and its gradient w.r.t. the logits,
    (softmax - onehot) / batch.
    """
    logits = np.asarray(logits, dtype=float)
    single = logits.ndim == 1
    Z = logits[:, None] if single else logits
    y = np.atleast_1d(np.asarray(labels, dtype=int))
    k, b = Z.shape
    if y.shape != (b,):
        raise ValueError(f"expected {b} labels, got shape {y.shape}")
    if y.min() < 0 or y.max() >= k:
        raise ValueError("label out of range")
    shifted = Z - Z.max(axis=0, keepdims=True)
    logsumexp = np.log(np.sum(np.exp(shifted), axis=0))
    loss = float(np.mean(logsumexp - shifted[y, np.arange(b)]))
    grad = np.exp(shifted - logsumexp)
    grad[y, np.arange(b)] -= 1.0
    grad /= b
    return loss, grad[:, 0] if single else grad


def _full_loss(W0, adapter, X, Y, loss_name):
    pred = adapter.forward(W0, X.T)
    if loss_name == "mse":
        return mse(pred, Y.T)[0]
    return cross_entropy(pred, Y)[0]


def train_linear(W0, adapter, dataset, config):
    """Train the adapter on a frozen linear layer y = (W0 + lam*delta) x.

    dataset is (X, Y) with X of shape (N, n) and Y either (N, m) targets for
    mse or (N,) integer labels for cross_entropy.  Only the adapter's
    trainable arrays change; the loss trajectory is a deterministic function
    of (dataset, config).
    """
    X, Y = dataset
    X = np.asarray(X, dtype=float)
    W0 = np.asarray(W0, dtype=float)
    N, n_in = X.shape
    m_out, n0 = W0.shape
    if n0 != n_in:
        raise ValueError(f"input dim {n_in} != layer width {n0}")
    if W0.shape != adapter.base_shape:
        raise ValueError("W0 shape inconsistent with adapter")
    if config.loss == "mse":
        Y = np.asarray(Y, dtype=float)
        if Y.shape != (N, m_out):
            raise ValueError(f"targets must be ({N}, {m_out}), got {Y.shape}")
    else:
        Y = np.asarray(Y, dtype=int)
        if Y.shape != (N,):
            raise ValueError(f"labels must be ({N},), got {Y.shape}")

    t_start = time.perf_counter()
    params = adapter.trainables()
    opt = Adam(params, betas=config.betas, eps=config.eps)
    shuffle_rng = derive_rng(config.seed)
    initial_loss = _full_loss(W0, adapter, X, Y, config.loss)

    epoch_losses = []
    for epoch in range(config.epochs):
        lr = step_lr(config.lr, config.gamma, config.step_epochs, epoch)
        order = shuffle_rng.permutation(N)
        batch_losses = []
        for start in range(0, N, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = X[idx].T
            pred = adapter.forward(W0, xb)
            if config.loss == "mse":
                loss, dpred = mse(pred, Y[idx].T)
            else:
                loss, dpred = cross_entropy(pred, Y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            try:
                opt.step(params, adapter.grad(xb, dpred), lr)
            except TrainingError as err:
                raise TrainingError(f"{err} at epoch {epoch}") from None
            batch_losses.append(loss)
        epoch_losses.append(float(np.mean(batch_losses)))

    final_loss = _full_loss(W0, adapter, X, Y, config.loss)
    if config.loss == "cross_entropy":
        pred = adapter.forward(W0, X.T)
        final_metric = float(np.mean(np.argmax(pred, axis=0) == Y))
    else:
        final_metric = final_loss
    return TrainReport(
        epoch_losses=epoch_losses,
        initial_loss=initial_loss,
        final_loss=final_loss,
        final_metric=final_metric,
        wallclock_s=time.perf_counter() - t_start,
        seed=config.seed,
        config=config,
    )
