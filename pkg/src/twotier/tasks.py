"""Synthetic task streams for continual-learning runs.

Three protocols, all built from seeded Gaussian class clusters:

* ``split_classes``: the k classes are partitioned contiguously across
  tasks (4 classes, 2 tasks -> {0,1} then {2,3}); each task samples only
  its own classes.  Labels keep their global ids.
* ``permuted_features``: one base dataset; each task sees the same rows
  with a fresh seeded permutation of the feature columns.
* ``drifting_blobs``: same classes every task, but the cluster means slide
  along a fixed random direction by a constant step per task, so earlier
  tasks' data goes off-distribution as training proceeds.

Each task carries its own seeded 80/20 train/test split.  Identical seed
and parameters reproduce the stream exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import TAG_TASK_STREAM, component_rng

STREAM_KINDS = ("split_classes", "permuted_features", "drifting_blobs")

# Cluster geometry. Centers separated enough to be learnable but not at
# ceiling; the drift step is several within-class deviations per task so a
# head trained naively on a shifted task degrades visibly on the original.
CENTER_SCALE = 1.0
CLUSTER_STD = 1.0
DRIFT_STEP = 5.0
TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class TaskData:
    """One task's split data. Labels are global class ids."""

    train_x: np.ndarray
    train_labels: np.ndarray
    test_x: np.ndarray
    test_labels: np.ndarray


@dataclass(frozen=True)
class TaskStream:
    kind: str
    seed: int
    d_in: int
    n_classes: int
    tasks: list[TaskData]
    # Per-task feature permutations (permuted_features only).
    permutations: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tasks)


def _split(x: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> TaskData:
    n = x.shape[0]
    order = rng.permutation(n)
    n_train = int(round(TRAIN_FRACTION * n))
    tr, te = order[:n_train], order[n_train:]
    return TaskData(x[tr], labels[tr], x[te], labels[te])


def _sample_clusters(
    centers: np.ndarray, class_ids: np.ndarray, n_rows: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    labels = class_ids[rng.integers(0, class_ids.size, size=n_rows)]
    x = centers[labels] + rng.normal(scale=CLUSTER_STD, size=(n_rows, centers.shape[1]))
    return x, labels


def gen_task_stream(
    kind: str,
    seed: int,
    d_in: int,
    k: int,
    n_tasks: int,
    samples_per_task: int,
    base_x: np.ndarray | None = None,
    base_labels: np.ndarray | None = None,
) -> TaskStream:
    """Build a task stream.

    ``base_x``/``base_labels`` replace the synthetic base dataset for the
    kinds that transform one (``split_classes``, ``permuted_features``);
    ``drifting_blobs`` is generative and rejects external data.
    """
    if kind not in STREAM_KINDS:
        raise ValueError(f"unknown stream kind {kind!r}, expected one of {STREAM_KINDS}")
    if n_tasks < 1:
        raise ValueError(f"n_tasks must be positive, got {n_tasks}")
    if samples_per_task < 5:
        raise ValueError(f"samples_per_task must be at least 5, got {samples_per_task}")
    if kind == "split_classes" and n_tasks > k:
        raise ValueError(f"split_classes needs at least one class per task: {n_tasks} tasks > {k} classes")
    external = base_x is not None
    if external and kind == "drifting_blobs":
        raise ValueError("drifting_blobs generates its own data and takes no base dataset")
    if external:
        base_x = np.asarray(base_x, dtype=np.float64)
        base_labels = np.asarray(base_labels, dtype=np.int64)
        d_in = base_x.shape[1]

    rng = component_rng(seed, TAG_TASK_STREAM)
    centers = rng.normal(scale=CENTER_SCALE, size=(k, d_in))
    tasks: list[TaskData] = []
    permutations: list[np.ndarray] = []

    if kind == "split_classes":
        per_task = k // n_tasks
        extra = k % n_tasks
        start = 0
        for t in range(n_tasks):
            width = per_task + (1 if t < extra else 0)
            class_ids = np.arange(start, start + width)
            start += width
            if external:
                mask = np.isin(base_labels, class_ids)
                x, labels = base_x[mask], base_labels[mask]
                if x.shape[0] < 5:
                    raise ValueError(f"task {t} has too few rows ({x.shape[0]}) for classes {class_ids.tolist()}")
            else:
                x, labels = _sample_clusters(centers, class_ids, samples_per_task, rng)
            tasks.append(_split(x, labels, rng))
    elif kind == "permuted_features":
        if external:
            x0, labels0 = base_x, base_labels
        else:
            x0, labels0 = _sample_clusters(centers, np.arange(k), samples_per_task, rng)
        for _ in range(n_tasks):
            perm = rng.permutation(d_in)
            permutations.append(perm)
            tasks.append(_split(x0[:, perm], labels0, rng))
    else:  # drifting_blobs
        direction = rng.normal(size=d_in)
        direction /= np.linalg.norm(direction)
        for t in range(n_tasks):
            shifted = centers + t * DRIFT_STEP * direction
            x, labels = _sample_clusters(shifted, np.arange(k), samples_per_task, rng)
            tasks.append(_split(x, labels, rng))

    return TaskStream(
        kind=kind, seed=seed, d_in=d_in, n_classes=k, tasks=tasks, permutations=permutations
    )
