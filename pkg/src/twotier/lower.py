"""Frozen random-feature tier fit in one closed-form pass.

The tier is a random projection with a pointwise nonlinearity.  Its readout
solves the regularized normal equations

    (Phi^T Phi + lambda I) W = Phi^T Y

where Phi is the feature matrix.  Training data is streamed through an
accumulator in chunks, so Phi is never materialized whole: the Gram matrix
``Phi^T Phi`` and the cross term ``Phi^T Y`` are built up chunk by chunk
and the system is solved once at the end.  Chunk order cannot change the
result because addition of the per-chunk contributions commutes.

Projection and bias entries are drawn uniformly from [-s, s] with
``s = sqrt(6 / (d_in + h))``, the usual fan-sum scaling that keeps tanh
features away from saturation at moderate input scale.  Construction is
bit-identical for identical (seed, dims, nonlinearity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ShapeError, StateError
from .linalg import add_scaled_identity, as_matrix, solve_spd
from .seeding import TAG_FEATURE_MAP, component_rng

NONLINEARITIES = ("tanh", "relu", "identity")


@dataclass(frozen=True)
class FeatureMap:
    """Frozen random projection: x -> nonlinearity(x @ projection + bias)."""

    projection: np.ndarray  # d_in x h
    bias: np.ndarray  # h
    nonlinearity: str
    seed: int

    @property
    def d_in(self) -> int:
        return self.projection.shape[0]

    @property
    def width(self) -> int:
        return self.projection.shape[1]

    def state_bytes(self) -> bytes:
        """Canonical serialization, used to verify the tier stays frozen."""
        return b"".join(
            (
                np.ascontiguousarray(self.projection).tobytes(),
                np.ascontiguousarray(self.bias).tobytes(),
                self.nonlinearity.encode(),
            )
        )


def init_feature_map(d_in: int, h: int, nonlinearity: str = "tanh", seed: int = 0) -> FeatureMap:
    if d_in < 1 or h < 1:
        raise ValueError(f"dimensions must be positive, got d_in={d_in}, h={h}")
    if nonlinearity not in NONLINEARITIES:
        raise ValueError(f"unknown nonlinearity {nonlinearity!r}, expected one of {NONLINEARITIES}")
    rng = component_rng(seed, TAG_FEATURE_MAP)
    s = math.sqrt(6.0 / (d_in + h))
    projection = rng.uniform(-s, s, size=(d_in, h))
    bias = rng.uniform(-s, s, size=h)
    return FeatureMap(projection=projection, bias=bias, nonlinearity=nonlinearity, seed=seed)


def apply_features(fmap: FeatureMap, x) -> np.ndarray:
    """Featurize a batch of rows: N x d_in -> N x h."""
    x = as_matrix(x, "input batch")
    if x.shape[1] != fmap.d_in:
        raise ShapeError(f"input has {x.shape[1]} columns, feature map expects {fmap.d_in}")
    z = x @ fmap.projection + fmap.bias
    if fmap.nonlinearity == "tanh":
        return np.tanh(z)
    if fmap.nonlinearity == "relu":
        return np.maximum(z, 0.0)
    return z


class NormalEqAccumulator:
    """Streaming accumulator for the normal equations.

    Single-writer: absorb chunks one at a time; accumulators over disjoint
    data can be merged (entrywise addition, associative).
    """

    def __init__(self, h: int, k: int):
        if h < 1 or k < 1:
            raise ValueError(f"dimensions must be positive, got h={h}, k={k}")
        self.gram = np.zeros((h, h))
        self.cross = np.zeros((h, k))
        self.count = 0

    @property
    def h(self) -> int:
        return self.gram.shape[0]

    @property
    def k(self) -> int:
        return self.cross.shape[1]

    def absorb(self, phi, y) -> "NormalEqAccumulator":
        """Add one chunk's contribution. Empty chunks are a no-op."""
        phi = as_matrix(phi, "feature chunk")
        y = as_matrix(y, "target chunk")
        if phi.shape[0] != y.shape[0]:
            raise ShapeError(f"chunk row counts differ: features {phi.shape[0]}, targets {y.shape[0]}")
        if phi.shape[0] == 0:
            return self
        if phi.shape[1] != self.h:
            raise ShapeError(f"feature chunk has {phi.shape[1]} columns, accumulator expects {self.h}")
        if y.shape[1] != self.k:
            raise ShapeError(f"target chunk has {y.shape[1]} columns, accumulator expects {self.k}")
        self.gram += phi.T @ phi
        self.cross += phi.T @ y
        self.count += phi.shape[0]
        return self

    def merge(self, other: "NormalEqAccumulator") -> "NormalEqAccumulator":
        """Fold another accumulator (over disjoint rows) into this one."""
        if other.h != self.h or other.k != self.k:
            raise ShapeError(
                f"accumulator shapes differ: {self.h}x{self.k} vs {other.h}x{other.k}"
            )
        self.gram += other.gram
        self.cross += other.cross
        self.count += other.count
        return self


@dataclass(frozen=True)
class RidgeSolution:
    """Readout weights from one closed-form solve.

    ``train_residual`` is the mean squared residual over all target entries,
    populated only when a second pass over the data was requested.
    """

    weights: np.ndarray  # h x k
    lambda_ridge: float
    train_residual: float | None = None

    def state_bytes(self) -> bytes:
        return np.ascontiguousarray(self.weights).tobytes()


def solve_ridge(
    acc: NormalEqAccumulator,
    lambda_ridge: float,
    residual_data: Iterable[tuple[np.ndarray, np.ndarray]] | None = None,
) -> RidgeSolution:
    """Solve the accumulated normal equations.

    ``residual_data``, when given, is re-iterated (a second pass) to report
    the training residual; the solve itself needs only the accumulator.
    """
    lambda_ridge = float(lambda_ridge)
    if not lambda_ridge > 0.0:
        raise ValueError(f"lambda_ridge must be positive, got {lambda_ridge}")
    if acc.count < 1:
        raise StateError("cannot solve: accumulator has absorbed no rows")
    w = solve_spd(add_scaled_identity(acc.gram, lambda_ridge), acc.cross)

    residual = None
    if residual_data is not None:
        sq_sum = 0.0
        entries = 0
        for phi, y in residual_data:
            phi = as_matrix(phi, "feature chunk")
            y = as_matrix(y, "target chunk")
            r = phi @ w - y
            sq_sum += float(np.sum(r * r))
            entries += r.size
        if entries == 0:
            raise StateError("residual pass saw no data")
        residual = sq_sum / entries
    return RidgeSolution(weights=w, lambda_ridge=lambda_ridge, train_residual=residual)


def fit_lower(
    fmap: FeatureMap,
    x: np.ndarray,
    y: np.ndarray,
    lambda_ridge: float,
    chunk_rows: int,
    with_residual: bool = False,
) -> RidgeSolution:
    """Stream (x, y) through an accumulator in chunks and solve once."""
    x = as_matrix(x, "input batch")
    y = as_matrix(y, "target batch")
    if chunk_rows < 1:
        raise ValueError(f"chunk_rows must be positive, got {chunk_rows}")
    acc = NormalEqAccumulator(fmap.width, y.shape[1])
    for start in range(0, x.shape[0], chunk_rows):
        stop = start + chunk_rows
        acc.absorb(apply_features(fmap, x[start:stop]), y[start:stop])
    residual_data = None
    if with_residual:
        residual_data = (
            (apply_features(fmap, x[s : s + chunk_rows]), y[s : s + chunk_rows])
            for s in range(0, x.shape[0], chunk_rows)
        )
    return solve_ridge(acc, lambda_ridge, residual_data)


def one_hot(labels, k: int) -> np.ndarray:
    """Integer labels -> N x k one-hot target matrix."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got {labels.ndim}-D")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def predict(fmap: FeatureMap, solution: RidgeSolution, x) -> tuple[np.ndarray, np.ndarray]:
    """Score a batch and pick labels.

    Returns (scores N x k, labels N).  Ties go to the smallest class index.
    """
    scores = apply_features(fmap, x) @ solution.weights
    return scores, np.argmax(scores, axis=1)
