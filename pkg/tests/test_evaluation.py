import io

import numpy as np
import pytest

from dnmf import evaluation
from dnmf.data import generate_synthetic, make_split_plan
from dnmf.errors import ConfigurationError
from dnmf.evaluation import (
    EvalReport, EvalSettings, benchmark_inference, compare, depth_sweep, evaluate_supervised,
    evaluate_unsupervised, read_reports_jsonl, report_rows, write_reports_csv, write_reports_jsonl,
)
from dnmf.network import UnrolledModel

FAST = EvalSettings(k=3, layers=4, epochs=20, mu_train_iters=30)


@pytest.fixture(scope="module")
def small():
    return generate_synthetic(3, 40, seed=0)


def test_infer_iters():
    assert FAST.infer_iters("supervised") == 10
    assert FAST.infer_iters("unsupervised") == 100
    assert EvalSettings(k=2, mu_infer_iters=7).infer_iters("supervised") == 7


class TestSupervised:
    def test_dnmf_report(self, small):
        plan = make_split_plan(40, 5, 0)
        rep = evaluate_supervised(small, "dnmf", FAST, plan)
        assert rep.setting == "learned" and rep.folds == [0, 1, 2, 3, 4]
        assert len(rep.fold_mse) == 5 and np.all(np.isfinite(rep.fold_mse))
        assert len(rep.extra["learned_lambda1"]) == 5

    def test_mu_sweep(self, small):
        plan = make_split_plan(40, 5, 0)
        reps = compare(small, "supervised", ["mu"], evaluation.SUPERVISED_MU_LAMBDAS, FAST, plan, folds=[0])
        assert [r.setting for r in reps] == ["0", "0.1", "1", "10"]
        assert all(r.lambda1 == r.lambda2 for r in reps)

    def test_requires_truth(self, small):
        cat = small.subset(range(40))
        cat.H = None
        with pytest.raises(ConfigurationError):
            evaluate_supervised(cat, "dnmf", FAST, make_split_plan(40))

    def test_unknown_method(self, small):
        with pytest.raises(ConfigurationError):
            evaluate_supervised(small, "hals", FAST, make_split_plan(40))

    def test_plan_mismatch(self, small):
        with pytest.raises(ConfigurationError):
            evaluate_supervised(small, "mu", FAST, make_split_plan(30))

    def test_deterministic(self, small):
        plan = make_split_plan(40, 5, 3)
        a = evaluate_supervised(small, "dnmf", FAST, plan, folds=[1])
        b = evaluate_supervised(small, "dnmf", FAST, plan, folds=[1])
        assert a.fold_mse == b.fold_mse

    def test_never_trains_on_test_columns(self, small, monkeypatch):
        plan = make_split_plan(40, 5, 2)
        seen = []
        real_train, real_factorize = evaluation.train_supervised, evaluation.factorize

        def spy_train(V, H, *args, **kwargs):
            seen.append(V)
            return real_train(V, H, *args, **kwargs)

        def spy_factorize(V, *args, **kwargs):
            seen.append(V)
            return real_factorize(V, *args, **kwargs)

        monkeypatch.setattr(evaluation, "train_supervised", spy_train)
        monkeypatch.setattr(evaluation, "factorize", spy_factorize)
        for method in ("dnmf", "mu"):
            seen.clear()
            evaluate_supervised(small, method, FAST, plan, lam=0.1)
            assert len(seen) == 5
            for fold, V in enumerate(seen):
                _, test = plan.split(fold)
                test_cols = {small.counts[:, j].tobytes() for j in test}
                assert all(V[:, j].tobytes() not in test_cols for j in range(V.shape[1]))
                assert V.shape[1] == 40 - len(test)


class TestUnsupervised:
    def test_exact_low_rank_both_small(self):
        cat = generate_synthetic(3, 100, seed=1)
        plan = make_split_plan(100, 5, 0)
        settings = EvalSettings(k=3, epochs=300, mu_train_iters=500, mu_init="random", mu_restarts=3)
        scale = np.mean(cat.counts ** 2)
        for method in ("dnmf", "mu"):
            rep = evaluate_unsupervised(cat, method, 0.0, settings, plan, folds=[0])
            assert rep.fold_mse[0] < 1e-2 * scale, method

    def test_three_lambdas(self, small):
        reps = compare(small, "unsupervised", ["dnmf", "mu"], [0, 1, 2], FAST, make_split_plan(40), folds=[0])
        assert [(r.method, r.setting) for r in reps] == [
            ("dnmf", "0"), ("dnmf", "1"), ("dnmf", "2"), ("mu", "0"), ("mu", "1"), ("mu", "2")]

    def test_minimal_scale(self):
        cat = generate_synthetic(1, 5, seed=0)
        rep = evaluate_unsupervised(cat, "dnmf", 1.0, EvalSettings(k=1, layers=3, epochs=5),
                                    make_split_plan(5, 5, 0), folds=[0])
        assert len(rep.fold_mse) == 1 and np.isfinite(rep.fold_mse[0])

    def test_never_trains_on_test_columns(self, small, monkeypatch):
        plan = make_split_plan(40, 4, 1)
        seen = []
        real = evaluation.train_unsupervised

        def spy(V, *args, **kwargs):
            seen.append(V)
            return real(V, *args, **kwargs)

        monkeypatch.setattr(evaluation, "train_unsupervised", spy)
        evaluate_unsupervised(small, "dnmf", 1.0, FAST, plan)
        for fold, V in enumerate(seen):
            train, _ = plan.split(fold)
            np.testing.assert_array_equal(V, small.counts[:, train])

    def test_unknown_mode(self, small):
        with pytest.raises(ConfigurationError):
            compare(small, "semi", ["mu"], [0], FAST, make_split_plan(40))


class TestReports:
    def _report(self):
        return EvalReport("mu", "supervised", "0.1", 0.1, 0.1, [1.0, 2.0, 4.0], [0.5, 0.5, 0.5],
                          [0.1, 0.1, 0.1], [0, 1, 2], seed=3, extra={"a": [1, 2]})

    def test_aggregates(self):
        rep = self._report()
        assert rep.mean == pytest.approx(7 / 3)
        assert rep.std == pytest.approx(np.std([1, 2, 4], ddof=1))

    def test_jsonl_round_trip(self):
        reps = [self._report(), EvalReport("dnmf", "unsupervised", "1", 1.0, 1.0, [0.25], [1.0], [0.1], [0],
                                           layers=10)]
        buf = io.StringIO()
        write_reports_jsonl(reps, buf)
        buf.seek(0)
        assert read_reports_jsonl(buf) == reps

    def test_csv_rows(self):
        rows = list(report_rows([self._report()]))
        assert [r["fold"] for r in rows] == [0, 1, 2, "mean", "std"]
        buf = io.StringIO()
        write_reports_csv([self._report()], buf)
        assert len(buf.getvalue().splitlines()) == 6


def test_depth_sweep(small):
    reps = depth_sweep(small, [1, 3], FAST, make_split_plan(40), folds=[0])
    assert [r.layers for r in reps] == [1, 3]


def test_benchmark_rows(rng):
    V, W = rng.random((96, 30)), rng.random((96, 4))
    rows = benchmark_inference(V, W, UnrolledModel.initial(96, 4, 10), repeats=1)
    assert [(r["method"], r["iterations"]) for r in rows] == [("dnmf", 10), ("mu", 10), ("mu", 100)]
    assert all(r["seconds_per_column"] > 0 and r["repeats"] == 1 for r in rows)
    with pytest.raises(ConfigurationError):
        benchmark_inference(V, W, UnrolledModel.initial(96, 4, 10), repeats=0)
