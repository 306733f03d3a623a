"""Lawson-Hanson active-set non-negative least squares.

The solver advances many right-hand sides at once so the row-wise
dictionary estimate is a single call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateDictionaryError, DimensionError, IterationLimitError
from .matrix import as_nonneg


@dataclass(frozen=True)
class NnlsConfig:
    """``max_iters`` caps the outer (variable-release) iterations; ``None`` means ``3 * p``.

    ``tol`` bounds the KKT violation: a zero variable may have a gradient
    no lower than ``-tol``.
    """

    max_iters: int | None = None
    tol: float = 1e-10

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ConfigurationError("max_iters must be positive")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")


def _solve_passive(G, C, passive, cols):
    """Normal-equation solves restricted to each column's passive set.

    Columns sharing a passive pattern share one factorization; singular
    subproblems fall back to a minimum-norm least-squares solve.
    """
    Z = np.zeros((G.shape[0], cols.size))
    patterns, inverse = np.unique(passive[:, cols].T, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    for g, pattern in enumerate(patterns):
        idx = np.flatnonzero(pattern)
        if idx.size == 0:
            continue
        members = np.flatnonzero(inverse == g)
        sub = G[np.ix_(idx, idx)]
        rhs = C[np.ix_(idx, cols[members])]
        try:
            sol = np.linalg.solve(sub, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(sub, rhs, rcond=None)[0]
        Z[np.ix_(idx, members)] = sol
    return Z


def lawson_hanson(M, B, cfg: NnlsConfig = NnlsConfig()) -> np.ndarray:
    """Solve ``min ||M x - b||`` over ``x >= 0`` for every column ``b`` of ``B``.

    All columns advance through the active-set iterations together. The
    passive-set subproblems use the normal equations; the release test uses
    the gradient recomputed from the residual ``b - M x``.
    """
    m, p = M.shape
    r = B.shape[1]
    max_iters = cfg.max_iters if cfg.max_iters is not None else 3 * p
    tol = cfg.tol
    X = np.zeros((p, r))
    passive = np.zeros((p, r), dtype=bool)
    # releases that failed numerically at the column's current iterate
    blocked = np.zeros((p, r), dtype=bool)
    G = M.T @ M
    C = M.T @ B
    # negative gradient of 0.5||Mx - b||^2
    grad = C.copy()
    releases = np.zeros(r, dtype=int)
    while True:
        score = np.where(passive | blocked, -np.inf, grad)
        j = np.argmax(score, axis=0)
        act = np.flatnonzero(score[j, np.arange(r)] > tol)
        if act.size == 0:
            break
        releases[act] += 1
        if np.any(releases[act] > max_iters):
            raise IterationLimitError(f"NNLS did not converge in {max_iters} iterations", best=X)
        ja = j[act]
        passive[ja, act] = True
        Z = _solve_passive(G, C, passive, act)
        bad = Z[ja, np.arange(act.size)] <= 0
        if bad.any():
            passive[ja[bad], act[bad]] = False
            blocked[ja[bad], act[bad]] = True
        cols, Z = act[~bad], Z[:, ~bad]
        inner = 0
        while cols.size:
            infeasible = np.any(passive[:, cols] & (Z <= 0), axis=0)
            if not infeasible.any():
                break
            inner += 1
            if inner > p:
                raise IterationLimitError("NNLS inner loop failed to restore feasibility", best=X)
            sub = cols[infeasible]
            Xs, Zs = X[:, sub], Z[:, infeasible]
            neg = passive[:, sub] & (Zs <= 0)
            ratio = np.divide(Xs, Xs - Zs, out=np.full_like(Xs, np.inf), where=neg)
            hit = np.argmin(ratio, axis=0)
            Xs = Xs + ratio[hit, np.arange(sub.size)] * (Zs - Xs)
            keep = passive[:, sub] & (Xs > 0)
            keep[hit, np.arange(sub.size)] = False
            Xs[~keep] = 0.0
            X[:, sub] = Xs
            passive[:, sub] = keep
            Z[:, infeasible] = _solve_passive(G, C, passive, sub)
        if cols.size:
            X[:, cols] = Z
            blocked[:, cols] = False
            grad[:, cols] = M.T @ (B[:, cols] - M @ Z)
    return X


def nnls_vector(M, b, cfg: NnlsConfig = NnlsConfig()) -> np.ndarray:
    """Solve ``min_{x >= 0} ||M x - b||_2``.

    Parameters
    ----------
    M : array_like, shape (m, p)
        Design matrix; entries may have any sign.
    b : array_like, shape (m,)
        Target vector.
    cfg : NnlsConfig

    Returns
    -------
    numpy.ndarray, shape (p,)

    Raises
    ------
    IterationLimitError
        If the active set does not settle within ``cfg.max_iters`` releases;
        the exception carries the best feasible iterate.
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if M.ndim != 2 or b.ndim != 1 or M.shape[0] != b.shape[0]:
        raise DimensionError(f"incompatible shapes M{M.shape}, b{b.shape}")
    try:
        return lawson_hanson(M, b[:, None], cfg)[:, 0]
    except IterationLimitError as exc:
        raise IterationLimitError(str(exc), best=exc.best[:, 0]) from None


def estimate_w(V, H, cfg: NnlsConfig = NnlsConfig()) -> np.ndarray:
    """Non-negative dictionary minimizing ``||V - W H||_F`` for fixed ``H``.

    The problem separates over rows of ``W``; each row is an independent
    NNLS solve against ``H^T``. Rows and ``H`` are rescaled to unit maximum
    before solving so ``cfg.tol`` is meaningful at any data scale.
    """
    V = as_nonneg(V, "V", ndim=2)
    H = as_nonneg(H, "H", ndim=2)
    if V.shape[1] != H.shape[1]:
        raise DimensionError(f"V has {V.shape[1]} columns but H has {H.shape[1]}")
    dead = np.flatnonzero(~np.any(H > 0, axis=1))
    if dead.size:
        raise DegenerateDictionaryError(f"coefficient rows {dead.tolist()} are all zero")
    f, k = V.shape[0], H.shape[0]
    h_scale = H.max()
    row_scale = V.max(axis=1)
    W = np.zeros((f, k))
    live = np.flatnonzero(row_scale > 0)
    targets = (V[live] / row_scale[live, None]).T
    W[live] = lawson_hanson(H.T / h_scale, targets, cfg).T * (row_scale[live, None] / h_scale)
    return W
