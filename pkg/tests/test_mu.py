import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dnmf.errors import ConfigurationError, DimensionError
from dnmf.matrix import RegParams, column_cost, matrix_cost
from dnmf.mu import INFER_CONFIG, MuConfig, factorize, infer_h, update_h, update_w

W_PAIR = np.array([[1.0], [1.0]])
V_PAIR = np.array([[1.0], [3.0]])


def _iterate_h(h, W, V, reg, n):
    for _ in range(n):
        h = update_h(h, W, V, reg)
    return h


def _slack(before):
    return 1e-10 * (1.0 + before)


class TestConfig:
    def test_defaults(self):
        cfg = MuConfig()
        assert (cfg.max_iters, cfg.tol, cfg.init_value, cfg.restarts) == (200, 1e-8, 1.0, 1)
        assert INFER_CONFIG.max_iters == 100

    @pytest.mark.parametrize("kwargs", [{"max_iters": 0}, {"tol": -1.0}, {"init_value": 0.0},
                                        {"restarts": 0}, {"init": "zeros"}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            MuConfig(**kwargs)


class TestUpdateH:
    def test_fixed_point_identity(self):
        H = np.array([[2.0], [3.0]])
        np.testing.assert_array_equal(update_h(H, np.eye(2), H.copy()), H)

    def test_one_factor_least_squares(self):
        np.testing.assert_allclose(update_h(np.ones((1, 1)), W_PAIR, V_PAIR), [[2.0]])

    def test_l1_step_and_limit(self):
        reg = RegParams(1.0, 0.0)
        np.testing.assert_allclose(update_h(np.ones((1, 1)), W_PAIR, V_PAIR, reg), [[4 / 3]])
        # minimizer of 0.5(1-h)^2 + 0.5(3-h)^2 + h is h = 1.5
        np.testing.assert_allclose(_iterate_h(np.ones((1, 1)), W_PAIR, V_PAIR, reg, 200), [[1.5]], atol=1e-9)

    def test_stationary_point_matches_grid(self):
        # independent oracle: brute-force the 1-D regularized cost
        reg = RegParams(0.7, 0.4)
        grid = np.linspace(0, 4, 400001)
        costs = 0.5 * ((1 - grid) ** 2 + (3 - grid) ** 2) + reg.lambda1 * grid + 0.5 * reg.lambda2 * grid**2
        h = _iterate_h(np.ones((1, 1)), W_PAIR, V_PAIR, reg, 300)
        assert abs(h[0, 0] - grid[np.argmin(costs)]) < 1e-4

    def test_vector_input(self):
        np.testing.assert_allclose(update_h(np.ones(1), W_PAIR, V_PAIR[:, 0]), [2.0])

    def test_zero_locking(self, rng):
        W, V = rng.random((5, 3)), rng.random((5, 4))
        H = rng.random((3, 4))
        H[1, 2] = 0.0
        H[0, 0] = 0.0
        out = update_h(H, W, V, RegParams(1, 1))
        assert out[1, 2] == 0.0 and out[0, 0] == 0.0

    def test_fixed_point_characterization(self, rng):
        # a scaled permutation keeps W^{-T} non-negative, so V below is feasible
        W = np.eye(4)[rng.permutation(4)] * (1 + rng.random(4))
        H = rng.random((4, 5))
        reg = RegParams(0.3, 0.2)
        target = W.T @ W @ H + reg.lambda1 + reg.lambda2 * H
        V = np.linalg.solve(W.T, target)
        assert np.all(V >= 0)
        np.testing.assert_allclose(update_h(H, W, V, reg), H, rtol=1e-13)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            update_h(np.ones((2, 1)), np.ones((3, 1)), np.ones((3, 1)))


class TestUpdateW:
    def test_fixed_point(self, rng):
        W = rng.random((3, 2))
        np.testing.assert_allclose(update_w(W, np.eye(2), W.copy()), W, rtol=1e-15)

    def test_scalar(self):
        np.testing.assert_allclose(update_w([[1.0]], [[1.0]], [[2.0]]), [[2.0]])

    def test_zero_row_stays_zero(self, rng):
        W = rng.random((4, 2))
        W[2] = 0.0
        out = update_w(W, rng.random((2, 5)), rng.random((4, 5)))
        np.testing.assert_array_equal(out[2], 0.0)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            update_w(np.ones((3, 2)), np.ones((3, 4)), np.ones((3, 4)))


@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8),
       st.sampled_from([0.0, 1.0, 2.0]), st.sampled_from([0.0, 1.0, 2.0]), st.integers(0, 2**31))
def test_monotone_property(f, k, n, l1, l2, seed):
    r = np.random.default_rng(seed)
    V, W, H = (1 - r.random((f, n)), 1 - r.random((f, k)), 1 - r.random((k, n)))
    reg = RegParams(l1, l2)
    before = matrix_cost(V, W, H, reg)
    H2 = update_h(H, W, V, reg)
    after_h = matrix_cost(V, W, H2, reg)
    assert after_h <= before + _slack(before)
    after_w = matrix_cost(V, update_w(W, H2, V), H2, reg)
    assert after_w <= after_h + _slack(after_h)
    assert np.all(H2 >= 0)


class TestFactorize:
    def test_rank_one_exact(self, rng):
        w, h = 1 - rng.random(6), 1 - rng.random(9)
        res = factorize(np.outer(w, h), 1, MuConfig(max_iters=200, tol=0))
        assert res.cost_trace[-1] < 1e-6
        assert res.iters_run == 200

    def test_full_rank_monotone(self, rng):
        V = rng.random((5, 4))
        res = factorize(V, 4, MuConfig(max_iters=50))
        assert res.cost_trace[-1] <= res.cost_trace[0]
        diffs = np.diff(res.cost_trace)
        assert np.all(diffs <= 1e-10 * (1 + np.abs(res.cost_trace[:-1])))
        assert np.all(res.W >= 0) and np.all(res.H >= 0)

    def test_large_l1_shrinks_h(self, rng):
        V = rng.random((8, 10)) * 5
        free = factorize(V, 3, MuConfig(max_iters=100, init="random"))
        heavy = factorize(V, 3, MuConfig(max_iters=100, init="random", reg=RegParams(1e6, 0)))
        assert np.abs(heavy.H).sum() < np.abs(free.H).sum()

    def test_k_too_large(self):
        with pytest.raises(ConfigurationError):
            factorize(np.ones((3, 2)), 3)
        with pytest.raises(ConfigurationError):
            factorize(np.ones((3, 2)), 0)

    def test_fixed_init_deterministic(self, rng):
        V = rng.random((6, 5))
        a, b = factorize(V, 2), factorize(V, 2)
        np.testing.assert_array_equal(a.W, b.W)
        assert a.cost_trace == b.cost_trace

    def test_restarts_keep_best(self, rng):
        V = rng.random((6, 8))
        cfg = MuConfig(max_iters=30, init="random", restarts=4, seed=3)
        best = factorize(V, 3, cfg)
        singles = [factorize(V, 3, MuConfig(max_iters=30, init="random", restarts=r + 1, seed=3))
                   for r in range(4)]
        assert best.cost_trace[-1] == min(s.cost_trace[-1] for s in singles)
        assert best.cost_trace[-1] == singles[-1].cost_trace[-1]

    def test_early_stop(self):
        V = np.outer([1.0, 2.0, 3.0], [1.0, 1.0])
        res = factorize(V, 1, MuConfig(max_iters=500, tol=1e-8))
        assert res.iters_run < 500
        assert len(res.cost_trace) == res.iters_run


class TestInferH:
    def test_recovers_coefficients(self, rng):
        W = 1 - rng.random((10, 3))
        h = rng.random(3) * 4
        out = infer_h(W @ h, W, MuConfig(max_iters=5000, tol=0))
        assert np.linalg.norm(W @ h - W @ out) < 1e-6

    def test_identity_dictionary(self, rng):
        V = rng.random((4, 3)) + 0.1
        np.testing.assert_allclose(infer_h(V, np.eye(4), MuConfig(max_iters=5, tol=0)), V, rtol=1e-14)

    def test_trace_contract(self, rng):
        V, W = rng.random((6, 4)), rng.random((6, 2))
        H, trace = infer_h(V, W, MuConfig(max_iters=100, tol=0), return_trace=True)
        assert len(trace) == 100
        assert np.all(np.diff(trace) <= 1e-10 * (1 + np.abs(trace[:-1])))
        _, trace = infer_h(V, W, MuConfig(max_iters=100, tol=1e-3), return_trace=True)
        assert len(trace) <= 100

    def test_per_column_cost_nonincreasing(self, rng):
        V, W = rng.random((6, 3)), rng.random((6, 2))
        reg = RegParams(0.5, 0.5)
        prev = None
        for iters in range(1, 15):
            H = infer_h(V, W, MuConfig(max_iters=iters, tol=0, reg=reg))
            costs = np.array([column_cost(V[:, j], W, H[:, j], reg) for j in range(3)])
            if prev is not None:
                assert np.all(costs <= prev + 1e-10 * (1 + prev))
            prev = costs

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            infer_h(np.ones((3, 2)), np.ones((4, 2)))
