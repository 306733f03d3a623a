"""The unrolled multiplicative-update network.

Each layer maps a coefficient estimate ``h`` to

    h * (A v) / (B h + lambda1 + lambda2 * h)

where ``A`` (k x f) and ``B`` (k x k) are free non-negative matrices learned
per layer and the two penalties are shared by all layers. Setting
``A = W^T`` and ``B = W^T W`` recovers one regularized MU step exactly.

All routines accept either one sample (1-D ``v`` of length f) or a batch
(``V`` of shape (f, n), one sample per column).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, DimensionError, StateError
from .matrix import EPS_DIV, RegParams, as_nonneg, multiplicative_step

MODEL_FORMAT = "dnmf-unrolled-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class LayerParams:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_nonneg(self.A, "A", ndim=2)
        B = as_nonneg(self.B, "B", ndim=2)
        if B.shape != (A.shape[0], A.shape[0]):
            raise DimensionError(f"B must be {A.shape[0]}x{A.shape[0]}, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @classmethod
    def from_dictionary(cls, W) -> "LayerParams":
        """The layer that performs one MU step for dictionary ``W``."""
        W = as_nonneg(W, "W", ndim=2)
        return cls(np.ascontiguousarray(W.T), W.T @ W)


@dataclass(frozen=True)
class UnrolledModel:
    """Ordered layers plus the shared penalties and the starting value of ``h``.

    ``learn_reg`` marks whether the penalties are trainable; ``h0_value`` is
    never trained.
    """

    layers: tuple
    reg: RegParams = field(default_factory=lambda: RegParams(1.0, 1.0))
    h0_value: float = 1.0
    learn_reg: bool = True

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("a model needs at least one layer")
        k, f = layers[0].A.shape
        for i, p in enumerate(layers):
            if p.A.shape != (k, f):
                raise DimensionError(f"layer {i} has A of shape {p.A.shape}, expected {(k, f)}")
        if not self.h0_value > 0:
            raise DataError("h0_value must be positive")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def initial(cls, f: int, k: int, n_layers: int = 10, value: float = 1.0,
                reg: RegParams | None = None, h0_value: float = 1.0, learn_reg: bool = True):
        """Every matrix entry set to ``value``; penalties default to ``value`` as well."""
        layers = tuple(LayerParams(np.full((k, f), value), np.full((k, k), value)) for _ in range(n_layers))
        if reg is None:
            reg = RegParams(value, value)
        return cls(layers, reg, h0_value, learn_reg)

    @classmethod
    def from_dictionary(cls, W, n_layers: int, reg: RegParams = RegParams(), h0_value: float = 1.0):
        """A model whose forward pass equals ``n_layers`` MU iterations with ``W`` fixed."""
        layer = LayerParams.from_dictionary(W)
        return cls((layer,) * n_layers, reg, h0_value, learn_reg=False)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def k(self) -> int:
        return self.layers[0].A.shape[0]

    @property
    def f(self) -> int:
        return self.layers[0].A.shape[1]

    def params(self) -> dict:
        """Trainable parameters as a flat dict of arrays (copies)."""
        out = {}
        for i, p in enumerate(self.layers):
            out[f"A{i}"] = p.A.copy()
            out[f"B{i}"] = p.B.copy()
        if self.learn_reg:
            out["lambda1"] = np.array(self.reg.lambda1)
            out["lambda2"] = np.array(self.reg.lambda2)
        return out

    def with_params(self, params: dict) -> "UnrolledModel":
        layers = tuple(LayerParams(params[f"A{i}"], params[f"B{i}"]) for i in range(self.n_layers))
        reg = self.reg
        if self.learn_reg:
            reg = RegParams(float(params["lambda1"]), float(params["lambda2"]))
        return replace(self, layers=layers, reg=reg)


@dataclass
class ForwardTape:
    """Per-layer intermediates of one forward pass, needed by :func:`backward`.

    ``inputs[l]`` is the layer input, ``numerators[l] = A_l v``,
    ``denominators[l] = B_l h + lambda1 + lambda2 h`` (unclamped) and
    ``outputs[l]`` the layer output.
    """

    inputs: list = field(default_factory=list)
    numerators: list = field(default_factory=list)
    denominators: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    model_id: int = 0

    def __len__(self):
        return len(self.outputs)

    def entry(self, layer: int):
        return self.inputs[layer], self.numerators[layer], self.denominators[layer], self.outputs[layer]


@dataclass
class LayerGrads:
    h: np.ndarray
    A: np.ndarray
    B: np.ndarray
    lambda1: float
    lambda2: float


@dataclass
class ParamGrads:
    A: list
    B: list
    lambda1: float
    lambda2: float
    h0: np.ndarray

    def as_dict(self, include_reg: bool = True) -> dict:
        out = {}
        for i, (gA, gB) in enumerate(zip(self.A, self.B)):
            out[f"A{i}"] = gA
            out[f"B{i}"] = gB
        if include_reg:
            out["lambda1"] = np.array(self.lambda1)
            out["lambda2"] = np.array(self.lambda2)
        return out


def _layer(h, v, p: LayerParams, reg: RegParams):
    u = p.A @ v
    d = p.B @ h + reg.lambda1 + reg.lambda2 * h
    return u, d, multiplicative_step(h, u, d)


def _check_sample(v, f):
    if v.ndim not in (1, 2) or v.shape[0] != f:
        raise DimensionError(f"expected input with {f} rows, got shape {v.shape}")


def layer_forward(h, v, p: LayerParams, reg: RegParams) -> np.ndarray:
    """One layer: ``h * (A v) / (B h + lambda1 + lambda2 h)``."""
    h = as_nonneg(h, "h")
    v = as_nonneg(v, "v")
    _check_sample(v, p.A.shape[1])
    if h.shape[0] != p.A.shape[0] or h.ndim != v.ndim:
        raise DimensionError(f"h has shape {h.shape}, expected {p.A.shape[0]} rows matching v")
    return _layer(h, v, p, reg)[2]


def forward(model: UnrolledModel, v):
    """Run ``v`` through every layer starting from ``h0_value`` everywhere.

    Returns
    -------
    h_out : numpy.ndarray
        Shape (k,) for one sample or (k, n) for a batch.
    tape : ForwardTape
    """
    v = as_nonneg(v, "v")
    _check_sample(v, model.f)
    h = np.full((model.k,) + v.shape[1:], model.h0_value)
    tape = ForwardTape(model_id=id(model))
    for p in model.layers:
        u, d, out = _layer(h, v, p, model.reg)
        tape.inputs.append(h)
        tape.numerators.append(u)
        tape.denominators.append(d)
        tape.outputs.append(out)
        h = out
    return h, tape


def layer_backward(entry, grad_out, v, p: LayerParams, reg: RegParams) -> LayerGrads:
    """Vector-Jacobian products of one layer.

    ``entry`` is ``(h, u, d, out)`` from :meth:`ForwardTape.entry`. With
    ``f_i = h_i u_i / d_i`` the partials are::

        df_i/dh_j      = delta_ij u_i/d_i - (h_i u_i / d_i^2) (B_ij + lambda2 delta_ij)
        df_i/dA_ij     = h_i v_j / d_i
        df_i/dB_ij     = -h_i u_i h_j / d_i^2
        df_i/dlambda1  = -h_i u_i / d_i^2
        df_i/dlambda2  = -h_i^2 u_i / d_i^2

    Denominator entries clamped at ``EPS_DIV`` pass no gradient to ``d``.
    Batched inputs sum parameter gradients over columns.
    """
    h, u, d, _ = entry
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != h.shape:
        raise DimensionError(f"grad_out has shape {g.shape}, expected {h.shape}")
    live = d >= EPS_DIV
    dc = np.where(live, d, EPS_DIV)
    ratio = u / dc
    # dL/dd, zero where the clamp is active
    gd = np.where(live, -g * h * ratio / dc, 0.0)
    gu = g * h / dc
    grad_h = g * ratio + p.B.T @ gd + reg.lambda2 * gd
    if h.ndim == 1:
        grad_A = np.outer(gu, v)
        grad_B = np.outer(gd, h)
    else:
        grad_A = gu @ v.T
        grad_B = gd @ h.T
    return LayerGrads(grad_h, grad_A, grad_B, float(gd.sum()), float((gd * h).sum()))


def backward(model: UnrolledModel, tape: ForwardTape, v, grad_h_out) -> ParamGrads:
    """Reverse sweep through all layers; penalty gradients are summed over layers."""
    if len(tape) != model.n_layers or tape.model_id != id(model):
        raise StateError("tape was not produced by a forward pass of this model")
    v = np.asarray(v, dtype=np.float64)
    g = np.asarray(grad_h_out, dtype=np.float64)
    grads_A = [None] * model.n_layers
    grads_B = [None] * model.n_layers
    l1 = l2 = 0.0
    for i in reversed(range(model.n_layers)):
        lg = layer_backward(tape.entry(i), g, v, model.layers[i], model.reg)
        grads_A[i], grads_B[i] = lg.A, lg.B
        l1 += lg.lambda1
        l2 += lg.lambda2
        g = lg.h
    return ParamGrads(grads_A, grads_B, l1, l2, g)


def _model_arrays(model: UnrolledModel) -> dict:
    return {
        "format": np.array(MODEL_FORMAT),
        "version": np.array(MODEL_VERSION),
        "dims": np.array([model.f, model.k, model.n_layers]),
        "reg": np.array([model.reg.lambda1, model.reg.lambda2]),
        "h0_value": np.array(model.h0_value),
        "learn_reg": np.array(model.learn_reg),
        "A": np.stack([p.A for p in model.layers]),
        "B": np.stack([p.B for p in model.layers]),
    }


def _model_from_arrays(z) -> UnrolledModel:
    if "format" not in z or str(z["format"]) != MODEL_FORMAT:
        raise DataError("not a DNMF model file")
    version = int(z["version"])
    if version != MODEL_VERSION:
        raise DataError(f"unsupported model version {version}")
    f, k, n_layers = (int(x) for x in z["dims"])
    A, B = z["A"], z["B"]
    if A.shape != (n_layers, k, f) or B.shape != (n_layers, k, k):
        raise DataError("layer arrays do not match the stored dimensions")
    layers = tuple(LayerParams(A[i], B[i]) for i in range(n_layers))
    lam = z["reg"]
    return UnrolledModel(layers, RegParams(lam[0], lam[1]), float(z["h0_value"]), bool(z["learn_reg"]))


def atomic_write_bytes(path, data: bytes):
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def save_model(model: UnrolledModel, path, extra: dict | None = None):
    """Write ``model`` (and optional extra arrays) as a versioned ``.npz`` container."""
    arrays = _model_arrays(model)
    for key, value in (extra or {}).items():
        arrays[f"extra/{key}"] = np.asarray(value)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    atomic_write_bytes(path, buf.getvalue())


def load_model(path, with_extra: bool = False):
    """Inverse of :func:`save_model`; round-trips bit-exactly."""
    with np.load(path, allow_pickle=False) as z:
        model = _model_from_arrays(z)
        extra = {key[len("extra/"):]: z[key] for key in z.files if key.startswith("extra/")}
    return (model, extra) if with_extra else model
