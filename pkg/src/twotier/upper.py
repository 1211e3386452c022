"""Incremental classification head with elastic weight consolidation.

The head maps fixed lower-tier features to class logits: a single linear
layer by default, optionally one tanh hidden layer.  It trains by plain
stochastic gradient descent on softmax cross-entropy plus a quadratic
consolidation penalty

    L_total = L_ce + (lambda_ewc / 2) * sum_i F_i * (theta_i - anchor_i)^2

where F is a diagonal Fisher information estimate and the anchor is the
parameter vector captured when the previous task was consolidated.  The
Fisher is the empirical one: the mean over samples of the squared
per-sample gradient of the log-likelihood of the observed label,

    F_i = (1/N) * sum_n (d log p(y_n | x_n; theta) / d theta_i)^2.

Consolidation is the online variant: a single anchor (the most recent
parameters) and an accumulated Fisher, ``F <- F + F_task``, rather than one
penalty term per past task.

Update sign: incremental update rules are sometimes written additively as
``theta + eta * grad L``, which as stated climbs the loss surface.  The
intended procedure is gradient descent, so steps here subtract the
gradient.  All minibatch order comes from a caller-supplied seeded
generator; runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError
from .linalg import as_matrix


@dataclass(frozen=True)
class TaskBatch:
    """One task's featurized training data: rows of features plus labels."""

    x: np.ndarray  # N x h
    labels: np.ndarray  # N, integer class ids

    def __post_init__(self):
        object.__setattr__(self, "x", as_matrix(self.x, "features"))
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ShapeError(f"labels must be 1-D, got {labels.ndim}-D")
        if labels.shape[0] != self.x.shape[0]:
            raise ShapeError(f"row counts differ: features {self.x.shape[0]}, labels {labels.shape[0]}")
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class Head:
    """Softmax classification head over lower-tier features.

    ``hidden == 0`` gives the default single linear layer in_dim -> k;
    ``hidden == m > 0`` inserts one tanh layer in_dim -> m -> k.  Parameters
    live in named arrays but are also exposed as one flat vector so the
    consolidation machinery can treat them uniformly;
    ``set_flat(get_flat())`` is an exact round trip.
    """

    def __init__(self, in_dim: int, n_classes: int, hidden: int = 0):
        if in_dim < 1 or n_classes < 1:
            raise ValueError(f"dimensions must be positive, got in_dim={in_dim}, n_classes={n_classes}")
        if hidden < 0:
            raise ValueError(f"hidden must be non-negative, got {hidden}")
        self.in_dim = in_dim
        self.n_classes = n_classes
        self.hidden = hidden
        if hidden == 0:
            self._arrays = [np.zeros((in_dim, n_classes)), np.zeros(n_classes)]
        else:
            self._arrays = [
                np.zeros((in_dim, hidden)),
                np.zeros(hidden),
                np.zeros((hidden, n_classes)),
                np.zeros(n_classes),
            ]

    @classmethod
    def randomized(cls, in_dim: int, n_classes: int, hidden: int, rng: np.random.Generator) -> "Head":
        """Head with uniform fan-sum initialization from a seeded generator."""
        head = cls(in_dim, n_classes, hidden)
        for arr in head._arrays:
            if arr.ndim == 2:
                s = np.sqrt(6.0 / sum(arr.shape))
                arr[...] = rng.uniform(-s, s, size=arr.shape)
        return head

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self._arrays)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self._arrays])

    def set_flat(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ShapeError(f"flat vector has shape {theta.shape}, head expects ({self.n_params},)")
        offset = 0
        for arr in self._arrays:
            arr[...] = theta[offset : offset + arr.size].reshape(arr.shape)
            offset += arr.size

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = as_matrix(x, "features")
        if x.shape[1] != self.in_dim:
            raise ShapeError(f"features have {x.shape[1]} columns, head expects {self.in_dim}")
        return x

    def forward(self, x) -> np.ndarray:
        """Class logits for a batch, N x k."""
        x = self._check_input(x)
        if self.hidden == 0:
            w, b = self._arrays
            return x @ w + b
        w1, b1, w2, b2 = self._arrays
        return np.tanh(x @ w1 + b1) @ w2 + b2

    def loss_and_grad(self, batch: TaskBatch) -> tuple[float, np.ndarray]:
        """Mean cross-entropy and its flat gradient."""
        x = self._check_input(batch.x)
        n = batch.n_rows
        if n == 0:
            raise ValueError("batch is empty")
        if batch.labels.min() < 0 or batch.labels.max() >= self.n_classes:
            raise ValueError(
                f"labels must lie in [0, {self.n_classes}), got range "
                f"[{batch.labels.min()}, {batch.labels.max()}]"
            )
        if self.hidden == 0:
            w, b = self._arrays
            logits = x @ w + b
            log_p = _log_softmax(logits)
            loss = -float(log_p[np.arange(n), batch.labels].mean())
            dlogits = np.exp(log_p)
            dlogits[np.arange(n), batch.labels] -= 1.0
            dlogits /= n
            grad = np.concatenate([(x.T @ dlogits).ravel(), dlogits.sum(axis=0)])
            return loss, grad
        w1, b1, w2, b2 = self._arrays
        z = x @ w1 + b1
        a = np.tanh(z)
        logits = a @ w2 + b2
        log_p = _log_softmax(logits)
        loss = -float(log_p[np.arange(n), batch.labels].mean())
        dlogits = np.exp(log_p)
        dlogits[np.arange(n), batch.labels] -= 1.0
        dlogits /= n
        da = dlogits @ w2.T
        dz = da * (1.0 - a * a)
        grad = np.concatenate(
            [(x.T @ dz).ravel(), dz.sum(axis=0), (a.T @ dlogits).ravel(), dlogits.sum(axis=0)]
        )
        return loss, grad

    def fisher_diagonal(self, batch: TaskBatch) -> np.ndarray:
        """Mean squared per-sample log-likelihood gradient, flat and >= 0.

        For one tanh layer at most, the per-sample gradients factor into
        row/column terms, so the squared mean vectorizes without a sample
        loop.
        """
        x = self._check_input(batch.x)
        n = batch.n_rows
        if n == 0:
            raise ValueError("batch is empty")
        # d log p / d logits for sample n is (onehot_n - p_n).
        if self.hidden == 0:
            logits = self.forward(x)
            e = -_softmax(logits)
            e[np.arange(n), batch.labels] += 1.0
            fw = (x * x).T @ (e * e) / n
            fb = (e * e).mean(axis=0)
            return np.concatenate([fw.ravel(), fb])
        w1, b1, w2, b2 = self._arrays
        a = np.tanh(x @ w1 + b1)
        e = -_softmax(a @ w2 + b2)
        e[np.arange(n), batch.labels] += 1.0
        dz = (e @ w2.T) * (1.0 - a * a)
        fw1 = (x * x).T @ (dz * dz) / n
        fb1 = (dz * dz).mean(axis=0)
        fw2 = (a * a).T @ (e * e) / n
        fb2 = (e * e).mean(axis=0)
        return np.concatenate([fw1.ravel(), fb1, fw2.ravel(), fb2.ravel()])


@dataclass
class EwcState:
    """Online consolidation state: one anchor, one accumulated Fisher."""

    lambda_ewc: float
    anchor: np.ndarray
    fisher: np.ndarray
    consolidations: int = 0

    @classmethod
    def fresh(cls, n_params: int, lambda_ewc: float) -> "EwcState":
        lambda_ewc = float(lambda_ewc)
        if lambda_ewc < 0.0:
            raise ValueError(f"lambda_ewc must be non-negative, got {lambda_ewc}")
        return cls(lambda_ewc=lambda_ewc, anchor=np.zeros(n_params), fisher=np.zeros(n_params))

    def _check(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self.anchor.shape:
            raise ShapeError(f"parameter vector has shape {theta.shape}, state expects {self.anchor.shape}")
        return theta


def ewc_penalty(state: EwcState, theta: np.ndarray) -> float:
    """Quadratic consolidation penalty at theta. Zero before any consolidation."""
    theta = state._check(theta)
    if state.consolidations == 0:
        return 0.0
    d = theta - state.anchor
    return 0.5 * state.lambda_ewc * float(np.sum(state.fisher * d * d))


def ewc_penalty_grad(state: EwcState, theta: np.ndarray) -> np.ndarray:
    theta = state._check(theta)
    if state.consolidations == 0:
        return np.zeros_like(theta)
    return state.lambda_ewc * state.fisher * (theta - state.anchor)


def forward_loss(head: Head, batch: TaskBatch, state: EwcState) -> float:
    """Total training loss: mean cross-entropy plus the consolidation penalty."""
    loss, _ = head.loss_and_grad(batch)
    return loss + ewc_penalty(state, head.get_flat())


def sgd_step(head: Head, batch: TaskBatch, state: EwcState, eta: float) -> Head:
    """One descent step on the penalized loss; updates the head in place."""
    eta = float(eta)
    if not eta > 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    theta = head.get_flat()
    _, grad = head.loss_and_grad(batch)
    grad += ewc_penalty_grad(state, theta)
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NumericError(
            f"gradient is non-finite at parameter index {bad[0]}", param_index=int(bad[0])
        )
    head.set_flat(theta - eta * grad)
    return head


def estimate_fisher(
    head: Head, batch: TaskBatch, sample_cap: int = 0, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Empirical diagonal Fisher on a batch.

    ``sample_cap`` > 0 subsamples that many rows (without replacement,
    from ``rng``) before estimating; 0 uses the full batch.
    """
    if sample_cap < 0:
        raise ValueError(f"sample_cap must be non-negative, got {sample_cap}")
    if sample_cap and batch.n_rows > sample_cap:
        if rng is None:
            raise ValueError("sample_cap requires a generator for the subsample")
        idx = np.sort(rng.choice(batch.n_rows, size=sample_cap, replace=False))
        batch = TaskBatch(batch.x[idx], batch.labels[idx])
    return head.fisher_diagonal(batch)


def consolidate(state: EwcState, head: Head, task_fisher: np.ndarray) -> EwcState:
    """Anchor at the current parameters and fold in a task's Fisher.

    The penalty at the freshly anchored parameters is exactly zero.
    """
    task_fisher = np.asarray(task_fisher, dtype=np.float64)
    if task_fisher.shape != state.fisher.shape:
        raise ShapeError(
            f"fisher has shape {task_fisher.shape}, state expects {state.fisher.shape}"
        )
    if task_fisher.size and task_fisher.min() < 0.0:
        raise ValueError("fisher entries must be non-negative")
    state.anchor = head.get_flat()
    state.fisher = state.fisher + task_fisher
    state.consolidations += 1
    return state


@dataclass
class EpochRecord:
    """Per-epoch training telemetry."""

    task: int
    epoch: int
    train_loss: float
    ewc_penalty: float
    test_acc: float = field(default=float("nan"))


def train_on_task(
    head: Head,
    batch: TaskBatch,
    state: EwcState,
    eta: float,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
) -> list[tuple[float, float]]:
    """Run seeded-minibatch SGD for a fixed number of epochs.

    ``batch_size`` 0 means full-batch steps.  Returns one
    (mean cross-entropy, end-of-epoch penalty) pair per epoch.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be positive, got {epochs}")
    if batch_size < 0:
        raise ValueError(f"batch_size must be non-negative, got {batch_size}")
    n = batch.n_rows
    size = n if batch_size == 0 else min(batch_size, n)
    records = []
    for _ in range(epochs):
        order = rng.permutation(n)
        ce_sum = 0.0
        batches = 0
        for start in range(0, n, size):
            idx = order[start : start + size]
            mini = TaskBatch(batch.x[idx], batch.labels[idx])
            ce, _ = head.loss_and_grad(mini)
            sgd_step(head, mini, state, eta)
            ce_sum += ce
            batches += 1
        records.append((ce_sum / batches, ewc_penalty(state, head.get_flat())))
    return records
