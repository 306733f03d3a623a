"""Projected ADAM and the supervised / unsupervised training loops."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericError
from .matrix import as_nonneg
from .network import UnrolledModel, backward, forward
from .nnls import NnlsConfig, estimate_w

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return replace(self, m={k: a.copy() for k, a in self.m.items()},
                       v={k: a.copy() for k, a in self.v.items()})

    def to_arrays(self) -> dict:
        out = {"hyper": np.array([self.lr, self.beta1, self.beta2, self.eps]), "step": np.array(self.step)}
        for key, a in self.m.items():
            out[f"m/{key}"] = a
        for key, a in self.v.items():
            out[f"v/{key}"] = a
        return out

    @classmethod
    def from_arrays(cls, arrays: dict) -> "AdamState":
        lr, b1, b2, eps = (float(x) for x in arrays["hyper"])
        m = {k[2:]: np.array(a) for k, a in arrays.items() if k.startswith("m/")}
        v = {k[2:]: np.array(a) for k, a in arrays.items() if k.startswith("v/")}
        return cls(lr, b1, b2, eps, int(arrays["step"]), m, v)


def adam_step(params: dict, grads: dict, state: AdamState, floor: float = 0.0):
    """One bias-corrected ADAM update followed by projection onto ``[floor, inf)``.

    Returns the new parameter dict and a new :class:`AdamState`; the inputs
    are left untouched.
    """
    for key, g in grads.items():
        if key not in params:
            raise DimensionError(f"gradient for unknown parameter {key!r}")
        if np.shape(g) != np.shape(params[key]):
            raise DimensionError(f"gradient {key!r} has shape {np.shape(g)}, expected {np.shape(params[key])}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter group {key!r}")
    state = state.copy()
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new = {}
    for key, p in params.items():
        g = np.asarray(grads.get(key, np.zeros_like(p)), dtype=np.float64)
        m = state.beta1 * state.m.get(key, 0.0) + (1.0 - state.beta1) * g
        v = state.beta2 * state.v.get(key, 0.0) + (1.0 - state.beta2) * g * g
        state.m[key], state.v[key] = m, v
        p = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new[key] = np.maximum(p, floor)
    return new, state


@dataclass(frozen=True)
class TrainConfig:
    """``batch_size=None`` trains full-batch; ``patience`` stops after that many
    epochs without a new best training loss."""

    epochs: int = 500
    batch_size: int | None = None
    seed: int = 0
    floor: float = 0.0
    patience: int | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive")
        if self.floor < 0:
            raise ConfigurationError("floor must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ConfigurationError("patience must be positive")


@dataclass
class TrainTrace:
    loss: list = field(default_factory=list)
    metric: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def rows(self):
        for i, loss in enumerate(self.loss):
            metric = self.metric[i] if i < len(self.metric) else None
            yield {"epoch": i, "loss": loss, "metric": "" if metric is None else metric,
                   "seconds": self.seconds[i]}

    def write_csv(self, fh):
        writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "metric", "seconds"], lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def infer(model: UnrolledModel, V) -> np.ndarray:
    """Propagate every column of ``V`` through the network; returns ``H`` (k x n)."""
    return forward(model, V)[0]


def supervised_loss_grad(model: UnrolledModel, V, H_target):
    """Mean over columns of ``||h_out - h'||^2`` and its parameter gradients."""
    H_out, tape = forward(model, V)
    n = V.shape[1]
    diff = H_out - H_target
    loss = float(np.sum(diff * diff) / n)
    grads = backward(model, tape, V, 2.0 * diff / n)
    return loss, grads.as_dict(include_reg=model.learn_reg)


def unsupervised_loss_grad(model: UnrolledModel, V, W, forwarded=None):
    """Regularized cost averaged over columns, with ``W`` held constant.

    ``forwarded`` may supply a precomputed ``forward(model, V)`` result.
    """
    H, tape = forward(model, V) if forwarded is None else forwarded
    n = V.shape[1]
    reg = model.reg
    R = W @ H - V
    loss = (0.5 * np.sum(R * R) + reg.lambda1 * H.sum() + 0.5 * reg.lambda2 * np.sum(H * H)) / n
    grad_H = (W.T @ R + reg.lambda1 + reg.lambda2 * H) / n
    grads = backward(model, tape, V, grad_H)
    return float(loss), grads.as_dict(include_reg=False)


def _batches(n, cfg: TrainConfig, rng):
    if cfg.batch_size is None or cfg.batch_size >= n:
        yield np.arange(n)
        return
    order = rng.permutation(n)
    for start in range(0, n, cfg.batch_size):
        yield np.sort(order[start:start + cfg.batch_size])


def _run_epochs(model, n, cfg, adam, batch_loss_grad, on_epoch_start, on_step, monitor):
    trace = TrainTrace()
    rng = np.random.default_rng(cfg.seed)
    best, stale = np.inf, 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        on_epoch_start(model)
        total = 0.0
        for idx in _batches(n, cfg, rng):
            loss, grads = batch_loss_grad(model, idx)
            if not np.isfinite(loss):
                raise NumericError(f"training loss became non-finite at epoch {epoch}")
            total += loss * idx.size
            params, adam = adam_step(model.params(), grads, adam, cfg.floor)
            model = model.with_params(params)
            if on_step is not None:
                on_step(epoch, model)
        trace.loss.append(total / n)
        if monitor is not None:
            trace.metric.append(float(monitor(model)))
        trace.seconds.append(time.perf_counter() - t0)
        log.debug("epoch %d loss %.6g", epoch, trace.loss[-1])
        if cfg.patience is not None:
            if trace.loss[-1] < best:
                best, stale = trace.loss[-1], 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    log.info("early stop at epoch %d", epoch)
                    break
    return model, trace, adam


def train_supervised(V, H_target, model: UnrolledModel, cfg: TrainConfig = TrainConfig(),
                     adam: AdamState | None = None, on_step: Callable | None = None,
                     monitor: Callable | None = None, return_state: bool = False):
    """Fit the network so that it maps each column of ``V`` to the matching column of ``H_target``.

    Parameters
    ----------
    V : array_like, shape (f, n)
    H_target : array_like, shape (k, n)
    model : UnrolledModel
        Starting point; penalties are trained when ``model.learn_reg``.
    cfg : TrainConfig
    adam : AdamState, optional
        Optimizer state to continue from; a fresh one (lr 0.001) by default.
    on_step : callable, optional
        Called as ``on_step(epoch, model)`` after every optimizer step.
    monitor : callable, optional
        Called as ``monitor(model)`` after each epoch; recorded as the trace metric.

    Returns
    -------
    (model, trace) or (model, trace, adam) when ``return_state`` is set.
    """
    V = as_nonneg(V, "V", ndim=2)
    H_target = as_nonneg(H_target, "H_target", ndim=2)
    if V.shape[0] != model.f or H_target.shape != (model.k, V.shape[1]):
        raise DimensionError(f"V{V.shape} / H{H_target.shape} do not fit a model with f={model.f}, k={model.k}")
    adam = AdamState() if adam is None else adam

    def step(m, idx):
        return supervised_loss_grad(m, V[:, idx], H_target[:, idx])

    model, trace, adam = _run_epochs(model, V.shape[1], cfg, adam, step, lambda m: None, on_step, monitor)
    return (model, trace, adam) if return_state else (model, trace)


def train_unsupervised(V, model: UnrolledModel, cfg: TrainConfig = TrainConfig(),
                       adam: AdamState | None = None, nnls_cfg: NnlsConfig = NnlsConfig(),
                       on_step: Callable | None = None, monitor: Callable | None = None,
                       return_state: bool = False):
    """Fit the network from ``V`` alone, re-estimating the dictionary by NNLS every epoch.

    Each epoch forwards all columns to form ``H``, solves for ``W`` by NNLS,
    then takes optimizer steps on the layer matrices with ``W`` fixed. The
    penalties stay frozen at ``model.reg``.

    Returns
    -------
    model, trace, W
        ``W`` is the NNLS dictionary for the final model's ``H``. With
        ``return_state`` the optimizer state is appended.
    """
    V = as_nonneg(V, "V", ndim=2)
    if V.shape[0] != model.f:
        raise DimensionError(f"V has {V.shape[0]} rows, model expects {model.f}")
    model = replace(model, learn_reg=False)
    adam = AdamState() if adam is None else adam
    current = {}

    def refresh(m):
        current["forwarded"] = forward(m, V)
        current["W"] = estimate_w(V, current["forwarded"][0], nnls_cfg)

    def step(m, idx):
        if idx.size == V.shape[1]:
            return unsupervised_loss_grad(m, V, current["W"], current["forwarded"])
        return unsupervised_loss_grad(m, V[:, idx], current["W"])

    model, trace, adam = _run_epochs(model, V.shape[1], cfg, adam, step, refresh, on_step, monitor)
    refresh(model)
    W = current["W"]
    return (model, trace, W, adam) if return_state else (model, trace, W)
