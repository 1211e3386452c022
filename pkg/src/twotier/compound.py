"""Two-tier composition and the continual training sequence.

The lower tier (feature map plus closed-form ridge readout) is fit once,
in a single streamed pass over the first task's training split, then
frozen: nothing in the sequence below ever writes to it.  The head reads
the feature map's output directly (pass-through; the ridge readout is kept
as the tier's own single-pass classifier and serves as a baseline).

For each task t in the stream:

1. run the configured number of epochs of penalized SGD on the head,
2. estimate the task's Fisher on its training split and consolidate,
3. evaluate the head on the test split of every task seen so far,
   filling row t of the accuracy matrix.

The accuracy matrix ``a`` is T x T with NaN above the diagonal (task t is
never evaluated on tasks it has not seen).  Forgetting metrics follow the
usual conventions:

* average final accuracy: mean of the last row,
* forgetting of task tau: max_t a[t][tau] - a[T-1][tau] (zero for the
  final task),
* backward transfer: mean over tau < T-1 of a[T-1][tau] - a[tau][tau]
  (zero for a single-task stream).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .errors import StateError
from .lower import (
    FeatureMap,
    RidgeSolution,
    apply_features,
    fit_lower,
    init_feature_map,
    one_hot,
    predict,
)
from .seeding import TAG_FISHER, TAG_HEAD_INIT, TAG_TRAIN_SHUFFLE, component_rng
from .tasks import TaskStream
from .upper import (
    EpochRecord,
    EwcState,
    Head,
    TaskBatch,
    consolidate,
    estimate_fisher,
    train_on_task,
)


@dataclass
class CompoundModel:
    """Frozen lower tier plus adaptable head."""

    feature_map: FeatureMap
    ridge: RidgeSolution
    head: Head
    ewc: EwcState

    def lower_state_bytes(self) -> bytes:
        """Serialized lower-tier state; byte-stable across head training."""
        return self.feature_map.state_bytes() + self.ridge.state_bytes()

    def lower_checksum(self) -> str:
        return hashlib.sha256(self.lower_state_bytes()).hexdigest()


@dataclass
class SequenceResult:
    model: CompoundModel
    accuracy_matrix: np.ndarray  # T x T, NaN above the diagonal
    epochs: list[EpochRecord]


def build_and_fit_lower(stream: TaskStream, cfg: ExperimentConfig) -> CompoundModel:
    """Construct the model and fit the lower tier on task 0's training split."""
    if len(stream) == 0:
        raise StateError("task stream is empty")
    fmap = init_feature_map(stream.d_in, cfg.h, cfg.nonlinearity, cfg.seed)
    first = stream.tasks[0]
    ridge = fit_lower(
        fmap,
        first.train_x,
        one_hot(first.train_labels, stream.n_classes),
        cfg.lambda_ridge,
        cfg.chunk_rows,
        with_residual=True,
    )
    head = Head(cfg.h, stream.n_classes, cfg.head_hidden)
    if cfg.head_hidden > 0:
        # A zero hidden head is a stationary point of the loss; give layered
        # heads a small seeded initialization instead.
        head = Head.randomized(
            cfg.h, stream.n_classes, cfg.head_hidden, component_rng(cfg.seed, TAG_HEAD_INIT)
        )
    ewc = EwcState.fresh(head.n_params, cfg.lambda_ewc)
    return CompoundModel(feature_map=fmap, ridge=ridge, head=head, ewc=ewc)


def head_accuracy(model: CompoundModel, x: np.ndarray, labels: np.ndarray) -> float:
    """Head accuracy on raw inputs (featurized through the frozen tier)."""
    logits = model.head.forward(apply_features(model.feature_map, x))
    return float((np.argmax(logits, axis=1) == labels).mean())


def ridge_accuracy(model: CompoundModel, x: np.ndarray, labels: np.ndarray) -> float:
    """Accuracy of the lower tier's own ridge readout (baseline)."""
    _, picked = predict(model.feature_map, model.ridge, x)
    return float((picked == labels).mean())


def train_sequence(model: CompoundModel, stream: TaskStream, cfg: ExperimentConfig) -> SequenceResult:
    """Train the head across the stream, consolidating after each task."""
    n_tasks = len(stream)
    if n_tasks == 0:
        raise StateError("task stream is empty")
    train_rng = component_rng(cfg.seed, TAG_TRAIN_SHUFFLE)
    fisher_rng = component_rng(cfg.seed, TAG_FISHER)
    acc = np.full((n_tasks, n_tasks), np.nan)
    epochs: list[EpochRecord] = []

    for t, task in enumerate(stream.tasks):
        batch = TaskBatch(apply_features(model.feature_map, task.train_x), task.train_labels)
        records = train_on_task(
            model.head, batch, model.ewc, cfg.eta, cfg.epochs_per_task, cfg.batch_size, train_rng
        )
        test_acc = head_accuracy(model, task.test_x, task.test_labels)
        for e, (ce, penalty) in enumerate(records):
            epochs.append(
                EpochRecord(
                    task=t,
                    epoch=e,
                    train_loss=ce,
                    ewc_penalty=penalty,
                    test_acc=test_acc if e == len(records) - 1 else float("nan"),
                )
            )
        fisher = estimate_fisher(model.head, batch, cfg.fisher_sample_cap, fisher_rng)
        consolidate(model.ewc, model.head, fisher)
        for tau in range(t + 1):
            seen = stream.tasks[tau]
            acc[t, tau] = head_accuracy(model, seen.test_x, seen.test_labels)

    return SequenceResult(model=model, accuracy_matrix=acc, epochs=epochs)


@dataclass(frozen=True)
class ForgettingMetrics:
    avg_final_accuracy: float
    forgetting: np.ndarray  # per task
    backward_transfer: float


def forgetting_metrics(accuracy_matrix: np.ndarray) -> ForgettingMetrics:
    """Summarize a fully populated (lower-triangular) accuracy matrix."""
    a = np.asarray(accuracy_matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise StateError(f"accuracy matrix must be square and non-empty, got shape {a.shape}")
    t_final = a.shape[0] - 1
    lower = a[np.tril_indices_from(a)]
    if np.any(np.isnan(lower)):
        raise StateError("accuracy matrix has unevaluated cells on or below the diagonal")

    avg_final = float(a[t_final].mean())
    forgetting = np.zeros(a.shape[0])
    for tau in range(t_final):
        forgetting[tau] = float(np.max(a[tau:, tau]) - a[t_final, tau])
    bwt = 0.0
    if t_final > 0:
        bwt = float(np.mean([a[t_final, tau] - a[tau, tau] for tau in range(t_final)]))
    return ForgettingMetrics(avg_final_accuracy=avg_final, forgetting=forgetting, backward_transfer=bwt)
