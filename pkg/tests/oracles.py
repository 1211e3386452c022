"""Independent reference implementations used to check the library.

These deliberately use different algorithms from the code under test:
Gauss-Jordan elimination with partial pivoting instead of Cholesky, plain
gradient descent instead of the closed-form normal-equation solve, and
central finite differences instead of backpropagation.
"""

from __future__ import annotations

import numpy as np


def gauss_jordan_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b by Gauss-Jordan elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    if b.ndim == 1:
        b = b[:, None]
        squeeze = True
    else:
        squeeze = False
    aug = np.hstack([a, b])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        if aug[pivot, col] == 0.0:
            raise ZeroDivisionError(f"singular at column {col}")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] = aug[col] / aug[col, col]
        for row in range(n):
            if row != col and aug[row, col] != 0.0:
                aug[row] = aug[row] - aug[row, col] * aug[col]
    x = aug[:, n:]
    return x[:, 0] if squeeze else x


def random_spd(n: int, cond: float, rng: np.random.Generator) -> np.ndarray:
    """SPD matrix with the given condition number via a random rotation."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if n == 1:
        eigs = np.array([1.0])
    else:
        eigs = np.geomspace(1.0, cond, n)
    return (q * eigs) @ q.T


def ridge_objective(phi: np.ndarray, y: np.ndarray, w: np.ndarray, lam: float) -> float:
    """The regularized least-squares objective the closed form minimizes."""
    r = phi @ w - y
    return float(np.sum(r * r) + lam * np.sum(w * w))


def ridge_gradient_descent(
    phi: np.ndarray, y: np.ndarray, lam: float, steps: int
) -> np.ndarray:
    """Full-batch gradient descent on the ridge objective from zero.

    The step size 1/L with L the gradient's Lipschitz constant guarantees
    monotone convergence toward the unique minimizer.
    """
    gram = phi.T @ phi
    lipschitz = 2.0 * (float(np.linalg.eigvalsh(gram).max()) + lam)
    w = np.zeros((phi.shape[1], y.shape[1]))
    for _ in range(steps):
        grad = 2.0 * (gram @ w - phi.T @ y) + 2.0 * lam * w
        w = w - grad / lipschitz
    return w


def central_difference_grad(fn, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        up[i] += step
        down = theta.copy()
        down[i] -= step
        grad[i] = (fn(up) - fn(down)) / (2.0 * step)
    return grad
