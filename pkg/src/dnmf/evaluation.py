"""Cross-validated comparison of DNMF and MU, plus inference timing."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import MutationCatalog, SplitPlan
from .errors import ConfigurationError
from .matrix import RegParams, mse_columns
from .mu import MuConfig, factorize, infer_h
from .network import UnrolledModel, forward
from .nnls import NnlsConfig
from .training import AdamState, TrainConfig, infer, train_supervised, train_unsupervised

log = logging.getLogger(__name__)

METHODS = ("dnmf", "mu")
SUPERVISED = "supervised"
UNSUPERVISED = "unsupervised"

#: MU penalty sweep used for the supervised comparison.
SUPERVISED_MU_LAMBDAS = (0.0, 0.1, 1.0, 10.0)
UNSUPERVISED_LAMBDAS = (0.0, 1.0, 2.0)


@dataclass(frozen=True)
class EvalSettings:
    """Everything except the data and the split that a comparison run depends on.

    ``mu_infer_iters=None`` picks 10 fixed-W iterations in supervised mode
    and 100 in unsupervised mode.
    """

    k: int
    layers: int = 10
    epochs: int = 500
    lr: float = 0.001
    seed: int = 0
    batch_size: int | None = None
    init_value: float = 1.0
    mu_train_iters: int = 200
    mu_infer_iters: int | None = None
    mu_tol: float = 1e-8
    mu_restarts: int = 1
    mu_init: str = "fixed"

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, seed=self.seed)

    def infer_iters(self, mode: str) -> int:
        if self.mu_infer_iters is not None:
            return self.mu_infer_iters
        return 10 if mode == SUPERVISED else 100


@dataclass
class EvalReport:
    """Per-fold test MSE for one method and one penalty setting."""

    method: str
    mode: str
    setting: str
    lambda1: float | None
    lambda2: float | None
    fold_mse: list = field(default_factory=list)
    fold_train_seconds: list = field(default_factory=list)
    fold_infer_seconds: list = field(default_factory=list)
    folds: list = field(default_factory=list)
    seed: int = 0
    layers: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_mse))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_mse, ddof=1)) if len(self.fold_mse) > 1 else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


REPORT_FIELDS = ["method", "mode", "setting", "lambda1", "lambda2", "layers", "fold", "mse",
                 "train_seconds", "infer_seconds"]


def report_rows(reports):
    """One row per fold followed by ``mean`` and ``std`` rows per report."""
    for rep in reports:
        base = {"method": rep.method, "mode": rep.mode, "setting": rep.setting,
                "lambda1": "" if rep.lambda1 is None else rep.lambda1,
                "lambda2": "" if rep.lambda2 is None else rep.lambda2,
                "layers": "" if rep.layers is None else rep.layers}
        for fold, mse, tt, it in zip(rep.folds, rep.fold_mse, rep.fold_train_seconds, rep.fold_infer_seconds):
            yield {**base, "fold": fold, "mse": mse, "train_seconds": tt, "infer_seconds": it}
        yield {**base, "fold": "mean", "mse": rep.mean, "train_seconds": float(np.mean(rep.fold_train_seconds)),
               "infer_seconds": float(np.mean(rep.fold_infer_seconds))}
        yield {**base, "fold": "std", "mse": rep.std, "train_seconds": "", "infer_seconds": ""}


def write_reports_csv(reports, fh):
    writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in report_rows(reports):
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_reports_jsonl(reports, fh):
    for rep in reports:
        fh.write(json.dumps(rep.to_dict(), sort_keys=True) + "\n")


def read_reports_jsonl(fh) -> list:
    return [EvalReport.from_dict(json.loads(line)) for line in fh if line.strip()]


def _fold_list(plan: SplitPlan, folds):
    return list(range(plan.folds)) if folds is None else [int(f) for f in folds]


def _mu_config(settings: EvalSettings, reg: RegParams, iters: int) -> MuConfig:
    return MuConfig(max_iters=iters, tol=settings.mu_tol, reg=reg, init_value=settings.init_value,
                    init=settings.mu_init, restarts=settings.mu_restarts, seed=settings.seed)


def _check_method(method):
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")


def evaluate_supervised(catalog: MutationCatalog, method: str, settings: EvalSettings, plan: SplitPlan,
                        lam: float | None = None, folds=None) -> EvalReport:
    """Test MSE between the true and estimated coefficients, per fold.

    DNMF is trained on the training columns against their true ``H`` and
    then applied to the test columns; its penalties start at
    ``settings.init_value`` and are learned, so ``lam`` is ignored. MU
    learns ``W`` by factorizing the training columns with penalty ``lam``
    on both terms and then infers test coefficients with ``W`` fixed.
    """
    _check_method(method)
    if catalog.H is None:
        raise ConfigurationError("supervised evaluation needs ground-truth H")
    if plan.n != catalog.shape[1]:
        raise ConfigurationError(f"split plan covers {plan.n} columns, catalog has {catalog.shape[1]}")
    V, H = catalog.counts, catalog.H
    f = V.shape[0]
    if method == "dnmf":
        report = EvalReport("dnmf", SUPERVISED, "learned", None, None, seed=plan.seed, layers=settings.layers)
        report.extra["learned_lambda1"] = []
        report.extra["learned_lambda2"] = []
    else:
        lam = 0.0 if lam is None else float(lam)
        report = EvalReport("mu", SUPERVISED, f"{lam:g}", lam, lam, seed=plan.seed)
    for fold in _fold_list(plan, folds):
        train, test = plan.split(fold)
        t0 = time.perf_counter()
        if method == "dnmf":
            model = UnrolledModel.initial(f, settings.k, settings.layers, settings.init_value,
                                          h0_value=settings.init_value)
            model, _ = train_supervised(V[:, train], H[:, train], model, settings.train_config(),
                                        AdamState(lr=settings.lr))
            t1 = time.perf_counter()
            H_hat = infer(model, V[:, test])
            report.extra["learned_lambda1"].append(model.reg.lambda1)
            report.extra["learned_lambda2"].append(model.reg.lambda2)
        else:
            reg = RegParams.uniform(lam)
            W = factorize(V[:, train], settings.k, _mu_config(settings, reg, settings.mu_train_iters)).W
            t1 = time.perf_counter()
            H_hat = infer_h(V[:, test], W, _mu_config(settings, reg, settings.infer_iters(SUPERVISED)))
        t2 = time.perf_counter()
        report.folds.append(fold)
        report.fold_mse.append(mse_columns(H[:, test], H_hat))
        report.fold_train_seconds.append(t1 - t0)
        report.fold_infer_seconds.append(t2 - t1)
        log.info("supervised %s %s fold %d mse %.6g", report.method, report.setting, fold, report.fold_mse[-1])
    return report


def evaluate_unsupervised(catalog: MutationCatalog, method: str, lam: float, settings: EvalSettings,
                          plan: SplitPlan, folds=None, nnls_cfg: NnlsConfig = NnlsConfig()) -> EvalReport:
    """Test reconstruction MSE ``mse_columns(V_test, W H_test)`` per fold.

    ``W`` comes from the training columns only: the final NNLS dictionary
    of unsupervised DNMF training, or the MU factorization. Test
    coefficients come from the trained network (DNMF) or from fixed-W MU
    iterations. Both penalties equal ``lam``.
    """
    _check_method(method)
    if plan.n != catalog.shape[1]:
        raise ConfigurationError(f"split plan covers {plan.n} columns, catalog has {catalog.shape[1]}")
    V = catalog.counts
    f = V.shape[0]
    lam = float(lam)
    reg = RegParams.uniform(lam)
    report = EvalReport(method, UNSUPERVISED, f"{lam:g}", lam, lam, seed=plan.seed,
                        layers=settings.layers if method == "dnmf" else None)
    for fold in _fold_list(plan, folds):
        train, test = plan.split(fold)
        t0 = time.perf_counter()
        if method == "dnmf":
            model = UnrolledModel.initial(f, settings.k, settings.layers, settings.init_value, reg=reg,
                                          h0_value=settings.init_value, learn_reg=False)
            model, _, W = train_unsupervised(V[:, train], model, settings.train_config(),
                                             AdamState(lr=settings.lr), nnls_cfg)
            t1 = time.perf_counter()
            H_test = infer(model, V[:, test])
        else:
            W = factorize(V[:, train], settings.k, _mu_config(settings, reg, settings.mu_train_iters)).W
            t1 = time.perf_counter()
            H_test = infer_h(V[:, test], W, _mu_config(settings, reg, settings.infer_iters(UNSUPERVISED)))
        t2 = time.perf_counter()
        report.folds.append(fold)
        report.fold_mse.append(mse_columns(V[:, test], W @ H_test))
        report.fold_train_seconds.append(t1 - t0)
        report.fold_infer_seconds.append(t2 - t1)
        log.info("unsupervised %s lambda=%g fold %d mse %.6g", method, lam, fold, report.fold_mse[-1])
    return report


def compare(catalog: MutationCatalog, mode: str, methods, lambdas, settings: EvalSettings,
            plan: SplitPlan, folds=None) -> list:
    """Run every requested (method, penalty) combination; DNMF supervised runs once."""
    reports = []
    for method in methods:
        _check_method(method)
        if mode == SUPERVISED:
            if method == "dnmf":
                reports.append(evaluate_supervised(catalog, "dnmf", settings, plan, folds=folds))
            else:
                reports.extend(evaluate_supervised(catalog, "mu", settings, plan, lam, folds) for lam in lambdas)
        elif mode == UNSUPERVISED:
            reports.extend(evaluate_unsupervised(catalog, method, lam, settings, plan, folds) for lam in lambdas)
        else:
            raise ConfigurationError(f"unknown mode {mode!r}")
    return reports


def depth_sweep(catalog: MutationCatalog, layer_counts, settings: EvalSettings, plan: SplitPlan,
                mode: str = SUPERVISED, lam: float = 1.0, folds=None) -> list:
    """DNMF test MSE as a function of network depth."""
    reports = []
    for n_layers in layer_counts:
        s = replace(settings, layers=int(n_layers))
        if mode == SUPERVISED:
            reports.append(evaluate_supervised(catalog, "dnmf", s, plan, folds=folds))
        else:
            reports.append(evaluate_unsupervised(catalog, "dnmf", lam, s, plan, folds))
    return reports


def _median_times(fns, repeats: int) -> list:
    """Median wall time of each callable; one untimed warm-up, then interleaved rounds."""
    for fn in fns:
        fn()
    samples = [[] for _ in fns]
    for _ in range(repeats):
        for fn, acc in zip(fns, samples):
            t0 = time.perf_counter()
            fn()
            acc.append(time.perf_counter() - t0)
    return [float(np.median(acc)) for acc in samples]


def benchmark_inference(V, W, model: UnrolledModel, repeats: int = 20, mu_iters=(10, 100),
                        max_columns: int = 50) -> list:
    """Median-of-``repeats`` inference time per column for DNMF and fixed-W MU.

    Each timed run infers the first ``max_columns`` columns one at a time;
    the reported time is that run divided by the column count. Methods are
    timed in interleaved rounds after one warm-up pass, so background load
    affects them alike. MU runs without cost tracking so only the update
    iterations are timed.
    """
    if repeats < 1:
        raise ConfigurationError("repeats must be >= 1")
    cols = [np.ascontiguousarray(V[:, j]) for j in range(min(max_columns, V.shape[1]))]
    n = len(cols)

    def run_dnmf():
        for v in cols:
            forward(model, v)

    def make_mu(iters):
        cfg = MuConfig(max_iters=iters, tol=0.0)

        def run_mu():
            for v in cols:
                infer_h(v, W, cfg)
        return run_mu

    labels = [("dnmf", model.n_layers)] + [("mu", iters) for iters in mu_iters]
    times = _median_times([run_dnmf] + [make_mu(iters) for iters in mu_iters], repeats)
    return [{"method": method, "iterations": iters, "repeats": repeats,
             "seconds_per_column": t / n, "columns": n}
            for (method, iters), t in zip(labels, times)]
