"""Command-line interface: ``dnmf {generate,train,infer,eval,depth,bench}``.

Report-producing commands write CSV (and JSON-lines where noted) plus a PNG
figure of the same data into ``--output-dir``. Set ``DNMF_LOG_LEVEL`` (e.g.
``INFO`` or ``DEBUG``) for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path


from . import data as data_mod
from .errors import ConfigurationError, DataError, DimensionError, DnmfError, NumericError, StateError
from .evaluation import (
    SUPERVISED, SUPERVISED_MU_LAMBDAS, UNSUPERVISED, UNSUPERVISED_LAMBDAS, EvalSettings,
    benchmark_inference, compare, depth_sweep, write_reports_csv, write_reports_jsonl,
)
from .matrix import RegParams
from .mu import MuConfig, factorize
from .network import UnrolledModel, atomic_write_bytes, load_model, save_model
from .training import AdamState, TrainConfig, infer, train_supervised, train_unsupervised

log = logging.getLogger("dnmf")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write_text(path: Path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _csv_text(rows, fields) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _load(args) -> data_mod.MutationCatalog:
    if not args.input:
        raise ConfigurationError("--input is required")
    return data_mod.load_catalog(args.input, args.format, h_path=getattr(args, "h_truth", None))


def _resolve_k(args, catalog) -> int:
    if args.k is not None:
        return args.k
    if catalog.H is not None:
        return catalog.H.shape[0]
    if catalog.W is not None:
        return catalog.W.shape[1]
    raise ConfigurationError("--k is required when the catalog has no ground truth")


def _settings(args, k: int) -> EvalSettings:
    return EvalSettings(k=k, layers=args.layers, epochs=args.epochs, lr=args.lr, seed=args.seed,
                        batch_size=args.batch_size, mu_restarts=args.restarts,
                        mu_init="random" if args.mu_random_init else "fixed")


def cmd_generate(args) -> int:
    catalog = data_mod.generate_synthetic(args.k, args.n, seed=args.seed, noise=args.noise, f=args.f,
                                          mutations_per_sample=args.mutations_per_sample)
    out = data_mod.ensure_dir(args.output_dir)
    for path in data_mod.save_catalog(catalog, out / f"{args.name}.csv"):
        print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    catalog = _load(args)
    if args.mode == SUPERVISED and catalog.H is None:
        raise ConfigurationError("supervised training needs ground-truth H (<stem>.H.csv sidecar or --h-truth)")
    k = _resolve_k(args, catalog)
    out = data_mod.ensure_dir(args.output_dir)
    V = catalog.counts
    lam = 1.0 if args.lam is None else args.lam
    adam = AdamState(lr=args.lr)
    if args.init_model:
        model, extra = load_model(args.init_model, with_extra=True)
        if any(key.startswith("adam/") for key in extra):
            adam = AdamState.from_arrays({key[5:]: a for key, a in extra.items() if key.startswith("adam/")})
        if (model.f, model.k) != (V.shape[0], k):
            raise DimensionError(f"model is {model.f}x{model.k}, data needs {V.shape[0]}x{k}")
    else:
        model = UnrolledModel.initial(V.shape[0], k, args.layers, reg=RegParams.uniform(lam),
                                      learn_reg=args.mode == SUPERVISED)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed, floor=args.floor)
    if args.mode == SUPERVISED:
        model, trace, adam = train_supervised(V, catalog.H, model, cfg, adam, return_state=True)
    else:
        model, trace, W, adam = train_unsupervised(V, model, cfg, adam, return_state=True)
        sig_ids = [f"SIG{i + 1}" for i in range(k)]
        atomic_write_bytes(out / "W.csv", data_mod._table_bytes(catalog.labels, sig_ids, W, "category"))
    extra = {f"adam/{key}": a for key, a in adam.to_arrays().items()}
    save_model(model, out / "model.npz", extra)
    buf = io.StringIO()
    trace.write_csv(buf)
    _write_text(out / "trace.csv", buf.getvalue())
    if not args.no_plots:
        from .plotting import plot_trace

        plot_trace(trace, out / "trace.png")
    print(f"trained {args.mode} model: {len(trace)} epochs, loss {trace.loss[0]:.6g} -> "
          f"{trace.loss[-1]:.6g}" if len(trace) else "trained model: 0 epochs")
    return EXIT_OK


def cmd_infer(args) -> int:
    catalog = _load(args)
    model = load_model(args.model)
    H = infer(model, catalog.counts)
    out = data_mod.ensure_dir(args.output_dir)
    sig_ids = [f"SIG{i + 1}" for i in range(model.k)]
    atomic_write_bytes(out / "H.csv", data_mod._table_bytes(sig_ids, catalog.sample_ids, H, "signature"))
    print(out / "H.csv")
    return EXIT_OK


def _report_outputs(args, reports, stem: str, plot):
    out = data_mod.ensure_dir(args.output_dir)
    buf = io.StringIO()
    write_reports_csv(reports, buf)
    _write_text(out / f"{stem}.csv", buf.getvalue())
    buf = io.StringIO()
    write_reports_jsonl(reports, buf)
    _write_text(out / f"{stem}.jsonl", buf.getvalue())
    if not args.no_plots:
        plot(reports, out / f"{stem}.png")
    for rep in reports:
        layers = f" L={rep.layers}" if rep.layers is not None else ""
        print(f"{rep.mode:12s} {rep.method:5s} lambda={rep.setting:8s}{layers} "
              f"mse={rep.mean:.6g} +- {rep.std:.3g}")


def cmd_eval(args) -> int:
    catalog = _load(args)
    if args.mode == SUPERVISED and catalog.H is None:
        raise ConfigurationError("supervised evaluation needs ground-truth H")
    settings = _settings(args, _resolve_k(args, catalog))
    plan = data_mod.make_split_plan(catalog.shape[1], args.folds, args.seed)
    methods = ("dnmf", "mu") if args.method == "both" else (args.method,)
    lambdas = args.lambdas
    if lambdas is None:
        lambdas = SUPERVISED_MU_LAMBDAS if args.mode == SUPERVISED else UNSUPERVISED_LAMBDAS
    reports = compare(catalog, args.mode, methods, lambdas, settings, plan)
    from .plotting import plot_comparison

    _report_outputs(args, reports, "eval",
                    lambda reps, path: plot_comparison(reps, path, f"{args.mode} test MSE"))
    return EXIT_OK


def cmd_depth(args) -> int:
    catalog = _load(args)
    if args.mode == SUPERVISED and catalog.H is None:
        raise ConfigurationError("supervised evaluation needs ground-truth H")
    settings = _settings(args, _resolve_k(args, catalog))
    plan = data_mod.make_split_plan(catalog.shape[1], args.folds, args.seed)
    lam = 1.0 if args.lam is None else args.lam
    reports = depth_sweep(catalog, args.depths, settings, plan, args.mode, lam)
    from .plotting import plot_depth

    _report_outputs(args, reports, "depth", plot_depth)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.input:
        catalog = _load(args)
    else:
        catalog = data_mod.generate_synthetic(args.k or 5, args.n, seed=args.seed)
    V = catalog.counts
    k = _resolve_k(args, catalog)
    W = catalog.W if catalog.W is not None and catalog.W.shape[1] == k else \
        factorize(V, k, MuConfig(max_iters=50, tol=0.0)).W
    model = load_model(args.model) if args.model else UnrolledModel.initial(V.shape[0], k, args.layers)
    rows = benchmark_inference(V, W, model, repeats=args.repeats)
    out = data_mod.ensure_dir(args.output_dir)
    fields = ["method", "iterations", "repeats", "columns", "seconds_per_column"]
    _write_text(out / "bench.csv", _csv_text(rows, fields))
    if not args.no_plots:
        from .plotting import plot_bench

        plot_bench(rows, out / "bench.png")
    for r in rows:
        print(f"{r['method']:5s} {r['iterations']:4d} iterations  {r['seconds_per_column'] * 1e3:.4f} ms/column")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnmf", description="Deep unrolled and multiplicative-update NMF.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        p.add_argument("--input", required=needs_input, help="catalog CSV (categories x samples)")
        p.add_argument("--format", choices=[data_mod.FORMAT_CATALOG, data_mod.FORMAT_MATRIX],
                       default=data_mod.FORMAT_CATALOG, help="'catalog' enforces 96 category rows")
        p.add_argument("--output-dir", default=".")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--k", type=int, default=None, help="number of signatures")

    def training(p):
        p.add_argument("--layers", type=int, default=10)
        p.add_argument("--epochs", type=int, default=500)
        p.add_argument("--lr", type=float, default=0.001)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--mode", choices=[SUPERVISED, UNSUPERVISED], default=SUPERVISED)
        p.add_argument("--h-truth", default=None, help="ground-truth H CSV (default <stem>.H.csv)")

    def reporting(p):
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    p = sub.add_parser("generate", help="write a synthetic catalog with ground truth")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--f", type=int, default=data_mod.N_CATEGORIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=["none", "poisson"], default="none")
    p.add_argument("--mutations-per-sample", type=float, default=1000.0)
    p.add_argument("--name", default="catalog")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a DNMF model")
    common(p)
    training(p)
    reporting(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="penalty value (initial value when supervised); default 1")
    p.add_argument("--floor", type=float, default=0.0, help="projection floor for parameters")
    p.add_argument("--init-model", default=None, help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="apply a trained model to a catalog")
    common(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_infer)

    for name, func, helptext in (("eval", cmd_eval, "cross-validated DNMF vs MU comparison"),
                                 ("depth", cmd_depth, "DNMF test MSE across network depths")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        training(p)
        reporting(p)
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--restarts", type=int, default=1, help="MU restarts (best cost kept)")
        p.add_argument("--mu-random-init", action="store_true", help="random instead of all-ones MU init")
        if name == "eval":
            p.add_argument("--method", choices=["dnmf", "mu", "both"], default="both")
            p.add_argument("--lambdas", type=_float_list, default=None,
                           help="comma-separated penalties (default 0,0.1,1,10 supervised; 0,1,2 unsupervised)")
        else:
            p.add_argument("--depths", type=_int_list, default=[2, 5, 10, 15, 20])
            p.add_argument("--lambda", dest="lam", type=float, default=None,
                           help="fixed penalty for unsupervised mode; default 1")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="inference timing of DNMF vs fixed-W MU")
    common(p, needs_input=False)
    reporting(p)
    p.add_argument("--n", type=int, default=200, help="columns of generated input when --input is absent")
    p.add_argument("--layers", type=int, default=10)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--model", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def _configure_logging():
    level = os.environ.get("DNMF_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"dnmf: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, StateError) as exc:
        print(f"dnmf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"dnmf: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"dnmf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DnmfError as exc:
        print(f"dnmf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
