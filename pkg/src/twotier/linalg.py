"""Dense kernels for the normal-equation solve path.

Matrices are C-order float64 numpy arrays throughout.  The symmetric
positive definite solver is a hand-rolled unpivoted Cholesky factorization
followed by forward/back substitution; explicit inverses are never formed.
The regularized systems this package feeds it are positive definite whenever
the ridge term is positive, so pivoting is unnecessary, and the simple
column-by-column kernel is the same shape as the fixed-point datapath that
emulates it.

Borderline factorizations get a second chance: a jitter of
``1e-10 * trace(a) / n`` is added to the diagonal and escalated tenfold, at
most three times, before the solver gives up and reports the failing pivot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefiniteError, ShapeError

JITTER_SCALE = 1e-10
JITTER_GROWTH = 10.0
JITTER_ATTEMPTS = 3


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Dense product a @ b with explicit inner-dimension checking."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"inner dimensions differ: left is {a.shape[0]}x{a.shape[1]}, "
            f"right is {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def add_scaled_identity(a, lam: float) -> np.ndarray:
    """Return ``a + lam * I`` without mutating ``a``."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"matrix must be square, got {a.shape[0]}x{a.shape[1]}")
    lam = float(lam)
    if not np.isfinite(lam):
        raise ValueError("lam must be finite")
    out = a.copy()
    out[np.diag_indices_from(out)] += lam
    return out


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor with the diagonal jitter that was applied.

    ``l @ l.T`` reconstructs the (possibly jittered) input.
    """

    l: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return self.l.shape[0]


def _try_factor(a: np.ndarray) -> tuple[np.ndarray | None, int]:
    """One factorization attempt. Returns (L, -1) or (None, failing pivot)."""
    n = a.shape[0]
    l = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - l[j, :j] @ l[j, :j]
        if not np.isfinite(d) or d <= 0.0:
            return None, j
        l[j, j] = np.sqrt(d)
        if j + 1 < n:
            l[j + 1 :, j] = (a[j + 1 :, j] - l[j + 1 :, :j] @ l[j, :j]) / l[j, j]
    return l, -1


def cholesky_spd(a) -> CholeskyFactor:
    """Factor a symmetric positive definite matrix as ``L @ L.T``.

    Only the lower triangle of ``a`` is read.  Raises
    NotPositiveDefiniteError (carrying the failing pivot index) if the
    matrix resists even the escalated jitter.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if n != a.shape[1]:
        raise ShapeError(f"matrix must be square, got {a.shape[0]}x{a.shape[1]}")
    if n == 0:
        return CholeskyFactor(l=np.zeros((0, 0)), jitter=0.0)

    l, pivot = _try_factor(a)
    if l is not None:
        return CholeskyFactor(l=l, jitter=0.0)

    jitter = JITTER_SCALE * float(np.trace(a)) / n
    if jitter <= 0.0:
        jitter = JITTER_SCALE
    for _ in range(JITTER_ATTEMPTS):
        l, pivot = _try_factor(add_scaled_identity(a, jitter))
        if l is not None:
            return CholeskyFactor(l=l, jitter=jitter)
        jitter *= JITTER_GROWTH
    raise NotPositiveDefiniteError(pivot)


def _forward_substitute(l: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Solves l @ z = b for lower-triangular l; b may have many columns.
    n = l.shape[0]
    z = np.empty_like(b)
    for i in range(n):
        z[i] = (b[i] - l[i, :i] @ z[:i]) / l[i, i]
    return z


def _back_substitute(l: np.ndarray, z: np.ndarray) -> np.ndarray:
    # Solves l.T @ x = z.
    n = l.shape[0]
    x = np.empty_like(z)
    for i in range(n - 1, -1, -1):
        x[i] = (z[i] - l[i + 1 :, i] @ x[i + 1 :]) / l[i, i]
    return x


def solve_cholesky(factor: CholeskyFactor, b) -> np.ndarray:
    """Solve ``A x = b`` given the Cholesky factor of A."""
    vector_input = np.ndim(b) == 1
    b = as_matrix(np.atleast_2d(b).T if vector_input else b, "right-hand side")
    if b.shape[0] != factor.n:
        raise ShapeError(
            f"right-hand side has {b.shape[0]} rows, matrix is {factor.n}x{factor.n}"
        )
    x = _back_substitute(factor.l, _forward_substitute(factor.l, b))
    return x[:, 0] if vector_input else x


def solve_spd(a, b) -> np.ndarray:
    """Solve a symmetric positive definite system by Cholesky + substitution.

    Accepts a 1-D right-hand side (returned 1-D) or a matrix of columns.
    """
    return solve_cholesky(cholesky_spd(a), b)
