"""Multiplicative-update NMF with optional L1/L2 penalties on the coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError
from .matrix import EPS_DIV, RegParams, as_nonneg, matrix_cost, multiplicative_step

INIT_FIXED = "fixed"
INIT_RANDOM = "random"


@dataclass(frozen=True)
class MuConfig:
    """Iteration controls for :func:`factorize` and :func:`infer_h`.

    ``tol`` is a threshold on the relative change of the cost between two
    consecutive iterations; ``tol=0`` always runs ``max_iters`` iterations.
    With ``restarts > 1`` the first run uses ``init`` and the remaining runs
    draw uniform(0, 1] starting points from ``seed``.
    """

    max_iters: int = 200
    tol: float = 1e-8
    reg: RegParams = field(default_factory=RegParams)
    init_value: float = 1.0
    init: str = INIT_FIXED
    restarts: int = 1
    seed: int | None = 0

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not self.tol >= 0:
            raise ConfigurationError("tol must be >= 0")
        if not self.init_value > 0:
            raise ConfigurationError("init_value must be > 0")
        if self.init not in (INIT_FIXED, INIT_RANDOM):
            raise ConfigurationError(f"unknown init {self.init!r}")
        if int(self.restarts) < 1:
            raise ConfigurationError("restarts must be >= 1")


#: Fixed-W inference defaults (100 iterations).
INFER_CONFIG = MuConfig(max_iters=100)


@dataclass
class FactorizationResult:
    W: np.ndarray
    H: np.ndarray
    cost_trace: list[float]
    iters_run: int
    restart: int = 0


def _check_vwh(V, W, H):
    f, n = V.shape
    if W.shape[0] != f or H.shape[1] != n or W.shape[1] != H.shape[0]:
        raise DimensionError(f"incompatible shapes V{V.shape}, W{W.shape}, H{H.shape}")


def _h_step(H, WtV, WtW, reg):
    return multiplicative_step(H, WtV, WtW @ H + reg.lambda1 + reg.lambda2 * H)


def update_h(H, W, V, reg: RegParams = RegParams()) -> np.ndarray:
    """One regularized multiplicative update of the coefficients.

    ``H * (W^T V) / (W^T W H + lambda1 + lambda2 * H)``, computed for all
    columns at once. Accepts a single column as 1-D ``H`` and ``V``.
    """
    H = as_nonneg(H, "H")
    W = as_nonneg(W, "W", ndim=2)
    V = as_nonneg(V, "V")
    if H.ndim != V.ndim:
        raise DimensionError(f"H and V must both be vectors or both matrices, got {H.shape} and {V.shape}")
    if H.ndim == 1:
        return update_h(H[:, None], W, V[:, None], reg)[:, 0]
    _check_vwh(V, W, H)
    Wt = W.T
    return _h_step(H, Wt @ V, Wt @ W, reg)


def update_w(W, H, V) -> np.ndarray:
    """One multiplicative update of the dictionary, ``W * (V H^T) / (W H H^T)``."""
    W = as_nonneg(W, "W", ndim=2)
    H = as_nonneg(H, "H", ndim=2)
    V = as_nonneg(V, "V", ndim=2)
    _check_vwh(V, W, H)
    return _w_step(W, H, V)


def _w_step(W, H, V):
    Ht = H.T
    return multiplicative_step(W, V @ Ht, W @ (H @ Ht))


def _relative_change(prev: float, cur: float) -> float:
    return abs(prev - cur) / max(abs(prev), EPS_DIV)


def _initial_factors(f, k, n, cfg: MuConfig, restart: int):
    if restart == 0 and cfg.init == INIT_FIXED:
        return np.full((f, k), cfg.init_value), np.full((k, n), cfg.init_value)
    rng = np.random.default_rng(None if cfg.seed is None else [cfg.seed, restart])
    # 1 - U[0,1) lies in (0, 1]
    return 1.0 - rng.random((f, k)), 1.0 - rng.random((k, n))


def _factorize_once(V, k, cfg: MuConfig, restart: int) -> FactorizationResult:
    f, n = V.shape
    W, H = _initial_factors(f, k, n, cfg, restart)
    reg = cfg.reg
    trace = []
    prev = matrix_cost(V, W, H, reg)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        Wt = W.T
        H = _h_step(H, Wt @ V, Wt @ W, reg)
        W = _w_step(W, H, V)
        cost = matrix_cost(V, W, H, reg)
        trace.append(cost)
        if cfg.tol > 0 and _relative_change(prev, cost) < cfg.tol:
            break
        prev = cost
    return FactorizationResult(W=W, H=H, cost_trace=trace, iters_run=it, restart=restart)


def factorize(V, k: int, cfg: MuConfig = MuConfig()) -> FactorizationResult:
    """Factorize ``V ~ W H`` by alternating H and W multiplicative updates.

    Parameters
    ----------
    V : array_like, shape (f, n)
        Non-negative data.
    k : int
        Number of factors, at most ``min(f, n)``.
    cfg : MuConfig
        Iteration, regularization and restart settings. Only ``H`` is
        penalized.

    Returns
    -------
    FactorizationResult
        The lowest-cost run over all restarts (ties go to the earliest).
    """
    V = as_nonneg(V, "V", ndim=2)
    k = int(k)
    if k < 1 or k > min(V.shape):
        raise ConfigurationError(f"k={k} must lie in [1, min(f, n)] = [1, {min(V.shape)}]")
    best = None
    for r in range(cfg.restarts):
        res = _factorize_once(V, k, cfg, r)
        if best is None or res.cost_trace[-1] < best.cost_trace[-1]:
            best = res
    return best


def infer_h(V, W, cfg: MuConfig = INFER_CONFIG, return_trace: bool = False):
    """Estimate coefficients for ``V`` with the dictionary ``W`` held fixed.

    Starts from ``cfg.init_value`` everywhere and applies the regularized
    H update up to ``cfg.max_iters`` times. With ``return_trace`` the
    per-iteration costs are returned as well.
    """
    V = as_nonneg(V, "V")
    W = as_nonneg(W, "W", ndim=2)
    single = V.ndim == 1
    if single:
        V = V[:, None]
    if W.shape[0] != V.shape[0]:
        raise DimensionError(f"W has {W.shape[0]} rows but V has {V.shape[0]}")
    reg = cfg.reg
    H = np.full((W.shape[1], V.shape[1]), cfg.init_value)
    Wt = W.T
    WtV, WtW = Wt @ V, Wt @ W
    track = return_trace or cfg.tol > 0
    trace = []
    prev = matrix_cost(V, W, H, reg) if track else 0.0
    for _ in range(cfg.max_iters):
        H = _h_step(H, WtV, WtW, reg)
        if track:
            cost = matrix_cost(V, W, H, reg)
            trace.append(cost)
            if cfg.tol > 0 and _relative_change(prev, cost) < cfg.tol:
                break
            prev = cost
    if single:
        H = H[:, 0]
    return (H, trace) if return_trace else H
