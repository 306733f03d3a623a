"""Dense non-negative arithmetic and the regularized NMF cost functions.

Matrices are plain ``float64`` numpy arrays. Vectors are 1-D arrays and
column batches are 2-D arrays with one sample per column, so ``V`` is
``(f, n)``, ``W`` is ``(f, k)`` and ``H`` is ``(k, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, DimensionError

#: Every denominator in a multiplicative update is clamped to at least this.
EPS_DIV = 1e-12


@dataclass(frozen=True)
class RegParams:
    """L1 and L2 penalty weights on the coefficients."""

    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be a finite non-negative number, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def uniform(cls, lam: float) -> "RegParams":
        """Both penalties set to ``lam``."""
        return cls(lam, lam)


def as_nonneg(x, name: str = "array", ndim: int | None = None) -> np.ndarray:
    """Return ``x`` as a float64 array after checking it is finite and non-negative."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} is empty")
    # min() >= 0 is False for NaN as well as negatives
    if arr.min() >= 0 and arr.max() < np.inf:
        return arr
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    idx = tuple(int(i) for i in np.argwhere(arr < 0)[0])
    raise DataError(f"{name} has a negative entry at {idx}: {arr[idx]!r}")


def _check_inner(left: np.ndarray, right: np.ndarray, what: str):
    if left.shape[-1] != right.shape[0]:
        raise DimensionError(f"{what}: inner dimensions differ ({left.shape} vs {right.shape})")


def _check_same(x: np.ndarray, y: np.ndarray, what: str):
    if x.shape != y.shape:
        raise DimensionError(f"{what}: shapes differ ({x.shape} vs {y.shape})")


def hadamard(x, y) -> np.ndarray:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    _check_same(x, y, "hadamard")
    return x * y


def safe_divide(num, den, eps: float = EPS_DIV) -> np.ndarray:
    """Entrywise ``num / max(den, eps)``."""
    num, den = np.asarray(num, dtype=np.float64), np.asarray(den, dtype=np.float64)
    _check_same(num, den, "safe_divide")
    return num / np.maximum(den, eps)


def matvec(M, x) -> np.ndarray:
    M, x = np.asarray(M, dtype=np.float64), np.asarray(x, dtype=np.float64)
    if M.ndim != 2 or x.ndim != 1:
        raise DimensionError(f"matvec expects a matrix and a vector, got {M.shape} and {x.shape}")
    _check_inner(M, x, "matvec")
    return M @ x


def matmul(X, Y) -> np.ndarray:
    X, Y = np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise DimensionError(f"matmul expects two matrices, got {X.shape} and {Y.shape}")
    _check_inner(X, Y, "matmul")
    return X @ Y


def transpose(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {X.shape}")
    return np.ascontiguousarray(X.T)


def multiplicative_step(h: np.ndarray, num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``h * (num / den)`` with the denominator clamped.

    Shared by the MU solver and the unrolled layers so that both evaluate
    the ratio in the same floating point order.
    """
    return h * (num / np.maximum(den, EPS_DIV))


def column_cost(v, W, h, reg: RegParams = RegParams()) -> float:
    """``0.5*||v - W h||^2 + lambda1*||h||_1 + 0.5*lambda2*||h||^2`` for one sample."""
    v = np.asarray(v, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.ndim != 1 or h.ndim != 1 or W.ndim != 2:
        raise DimensionError(f"column_cost expects vectors and a matrix, got {v.shape}, {W.shape}, {h.shape}")
    if W.shape != (v.shape[0], h.shape[0]):
        raise DimensionError(f"W has shape {W.shape}, expected {(v.shape[0], h.shape[0])}")
    r = v - W @ h
    return float(0.5 * (r @ r) + reg.lambda1 * np.abs(h).sum() + 0.5 * reg.lambda2 * (h @ h))


def matrix_cost(V, W, H, reg: RegParams = RegParams()) -> float:
    """Regularized Frobenius cost; equals the sum of :func:`column_cost` over columns."""
    V = np.asarray(V, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if V.ndim != 2 or W.ndim != 2 or H.ndim != 2:
        raise DimensionError("matrix_cost expects three matrices")
    if W.shape[0] != V.shape[0] or H.shape[1] != V.shape[1] or W.shape[1] != H.shape[0]:
        raise DimensionError(f"incompatible shapes V{V.shape}, W{W.shape}, H{H.shape}")
    R = V - W @ H
    return float(
        0.5 * np.sum(R * R) + reg.lambda1 * np.abs(H).sum() + 0.5 * reg.lambda2 * np.sum(H * H)
    )


def mse_columns(X, Y) -> float:
    """Squared error per entry within each column, averaged over columns."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    _check_same(X, Y, "mse_columns")
    if X.ndim == 1:
        X, Y = X[:, None], Y[:, None]
    if X.ndim != 2 or X.size == 0:
        raise DimensionError(f"mse_columns expects non-empty matrices, got shape {X.shape}")
    D = X - Y
    return float(np.mean(np.mean(D * D, axis=0)))
