import csv

import numpy as np
import pytest

from senns.backprop import GradientBuffer, grad_j1_pair
from senns.data import LabeledDataset, make_gaussians
from senns.errors import NumericError
from senns.grad_l1 import grad_j2_single
from senns.network import Network, init_random
from senns.objective import Hyperparams, pair_weights
from senns.pairs import build_full, build_heuristic
from senns.trainer import (
    finite_diff_grad,
    find_descent_rate,
    grad_total,
    is_non_increasing,
    max_relative_error,
    norm_relative_error,
    relative_change,
    sgd_step,
    train,
)


def hp(*lams, **kw):
    return Hyperparams.from_lambdas(lams, **kw)


def instance(seed=0, m=6, sizes=(2, 3, 2), kinds=("tanh", "linear")):
    rng = np.random.default_rng(seed)
    ds = LabeledDataset(rng.standard_normal((m, sizes[0])), np.arange(m) % 2)
    net = init_random(list(sizes), list(kinds), seed=seed)
    for b in net.biases:
        b[:] = rng.uniform(-0.5, 0.5, b.shape)
    net.biases[-1][:] += 2.0  # keep linear outputs away from 0
    return net, ds


def gaussians40():
    return make_gaussians(20, [[-1.0, 0.0], [1.0, 0.0]], sigma=0.7, seed=0)


class TestGradTotal:
    def test_pure_decay(self):
        net, ds = instance()
        g = grad_total(net, ds, build_full(ds), hp(0, 0, 0, 1))
        for dW, W in zip(g.dW, net.weights):
            np.testing.assert_array_equal(dW, W)
        for db in g.db:
            np.testing.assert_array_equal(db, 0.0)

    def test_identical_inputs_no_pair_gradient(self):
        net, _ = instance()
        ds = LabeledDataset(np.tile([0.3, -0.2], (4, 1)), [0, 1, 0, 1])
        g = grad_total(net, ds, build_full(ds), hp(1, 0, 0, 0))
        assert not np.any(g.flat())

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_finite_differences(self, seed):
        net, ds = instance(seed)
        h = hp(0.3, 0.3, 0.2, 0.2)
        p = build_full(ds)
        assert max_relative_error(grad_total(net, ds, p, h), finite_diff_grad(net, ds, p, h))[0] <= 1e-5

    def test_heuristic_pairs_match_finite_differences(self):
        net, ds = instance(3, m=8)
        p = build_heuristic(ds, 2)
        h = hp(0.3, 0.3, 0.2, 0.2)
        assert max_relative_error(grad_total(net, ds, p, h), finite_diff_grad(net, ds, p, h))[0] <= 1e-5

    def test_strict_equals_fast(self):
        net, ds = instance(1, m=7, sizes=(3, 4, 2), kinds=("sigmoid", "tanh"))
        p, h = build_full(ds), hp(0.2, 0.4, 0.3, 0.1)
        fast = grad_total(net, ds, p, h, mode="fast")
        strict = grad_total(net, ds, p, h, mode="strict")
        np.testing.assert_allclose(fast.flat(), strict.flat(), rtol=1e-12, atol=1e-15)

    def test_strict_follows_pair_sum_literally(self):
        net, ds = instance(2)
        p, h = build_full(ds), hp(0.3, 0.3, 0.2, 0.2)
        expected = GradientBuffer.zeros_like(net)
        for (t, u, _), s in zip(p, pair_weights(p, h)):
            expected.iadd(grad_j1_pair(net, ds.inputs[t], ds.inputs[u]), s)
        for x in ds.inputs:
            expected.iadd(grad_j2_single(net, x), h.lambda3 / ds.m)
        for dW, W in zip(expected.dW, net.weights):
            dW += h.lambda4 * W
        np.testing.assert_allclose(grad_total(net, ds, p, h, mode="strict").flat(), expected.flat(), rtol=1e-14)

    def test_threads_reproducible(self):
        net, ds = instance(4, m=8)
        p, h = build_full(ds), hp(0.3, 0.3, 0.2, 0.2)
        a = grad_total(net, ds, p, h, mode="strict", threads=3, reproducible=True)
        b = grad_total(net, ds, p, h, mode="strict", threads=3, reproducible=True)
        c = grad_total(net, ds, p, h, mode="strict", threads=1)
        assert np.array_equal(a.flat(), b.flat())
        np.testing.assert_allclose(a.flat(), c.flat(), rtol=1e-12, atol=1e-15)
        d = grad_total(net, ds, p, h, mode="strict", threads=3, reproducible=False)
        np.testing.assert_allclose(d.flat(), c.flat(), rtol=1e-12, atol=1e-15)

    def test_decomposition_by_lambda(self):
        net, ds = instance(5, m=7)
        p = build_full(ds)
        lams = (0.1, 0.2, 0.3, 0.4)
        total = grad_total(net, ds, p, hp(*lams)).flat()
        parts = np.zeros_like(total)
        for i, lam in enumerate(lams):
            only = [0.0] * 4
            only[i] = 1.0
            parts += lam * grad_total(net, ds, p, hp(*only)).flat()
        np.testing.assert_allclose(parts, total, rtol=1e-12, atol=1e-15)

    def test_unknown_mode(self):
        net, ds = instance()
        with pytest.raises(ValueError):
            grad_total(net, ds, build_full(ds), Hyperparams(), mode="turbo")


class TestSgdStep:
    def test_arithmetic(self):
        net = Network([1, 1], [np.array([[1.0]])], [np.array([1.0])], ["linear"])
        g = GradientBuffer([np.array([[0.5]])], [np.array([0.5])])
        new = sgd_step(net, g, 0.1)
        assert new.weights[0][0, 0] == pytest.approx(0.95)
        assert new.biases[0][0] == pytest.approx(0.95)
        assert net.weights[0][0, 0] == 1.0

    @pytest.mark.parametrize("alpha,zero", [(0.1, True), (0.0, False)])
    def test_no_change(self, alpha, zero):
        net, _ = instance()
        g = GradientBuffer.zeros_like(net) if zero else GradientBuffer([w + 1 for w in net.weights], [b + 1 for b in net.biases])
        new = sgd_step(net, g, alpha)
        for a, b in zip(net.weights + net.biases, new.weights + new.biases):
            assert np.array_equal(a, b)


class TestTrain:
    def test_history_length_and_convergence_flag(self):
        net, ds = instance()
        rep = train(net, ds, build_full(ds), hp(0.3, 0.3, 0.2, 0.2, alpha=0.01, max_iters=25))
        assert len(rep.history) == rep.iterations_run + 1
        assert rep.iterations_run == 25 and not rep.converged

    def test_converged_implies_small_change(self):
        net, ds = instance()
        rep = train(net, ds, build_full(ds), hp(0, 0, 0, 1, alpha=0.5, max_iters=500, tol=1e-6))
        assert rep.converged and rep.iterations_run < 500
        assert relative_change(rep.history[-2].j_total, rep.final.j_total) <= 1e-6

    def test_infinite_tol_runs_nothing(self):
        net, ds = instance()
        rep = train(net, ds, build_full(ds), hp(0.3, 0.3, 0.2, 0.2, tol=float("inf")))
        assert rep.iterations_run == 0 and len(rep.history) == 1 and rep.converged

    def test_pure_decay_closed_form(self):
        net, ds = instance(7)
        alpha, k = 0.05, 50
        rep = train(net, ds, build_full(ds), hp(0, 0, 0, 1, alpha=alpha, max_iters=k, tol=1e-300))
        assert rep.iterations_run == k
        for W0, W in zip(net.weights, rep.network.weights):
            np.testing.assert_allclose(W, W0 * (1 - alpha) ** k, rtol=1e-10, atol=0)
        for b0, b in zip(net.biases, rep.network.biases):
            np.testing.assert_array_equal(b, b0)

    def test_deterministic(self):
        net, ds = instance(8)
        h = hp(0.3, 0.3, 0.2, 0.2, max_iters=20)
        a = train(net, ds, build_full(ds), h)
        b = train(net, ds, build_full(ds), h)
        assert [v.j_total for v in a.history] == [v.j_total for v in b.history]

    def test_divergence_names_iteration(self):
        net, ds = instance(0)
        with pytest.raises(NumericError, match="iteration") as info:
            train(net, ds, build_full(ds), hp(0, 1, 0, 0, alpha=1e200, max_iters=50))
        assert info.value.iteration >= 1

    def test_halving_safeguard_never_increases(self):
        net, ds = instance(2)
        rep = train(net, ds, build_full(ds), hp(0.3, 0.3, 0.2, 0.2, alpha=5.0, max_iters=40), halve_on_increase=True)
        assert is_non_increasing(rep.history)
        assert rep.alphas[-1] < 5.0

    def test_telemetry(self, tmp_path):
        net, ds = instance()
        rep = train(net, ds, build_full(ds), hp(0.3, 0.3, 0.2, 0.2, max_iters=3))
        path = tmp_path / "t.csv"
        rep.write_telemetry(path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["iter", "J", "J1", "J2", "J3"]
        assert len(rows) == 5
        assert float(rows[-1][1]) == rep.final.j_total

    def test_descent_on_gaussians(self):
        ds = gaussians40()
        net = init_random([2, 4, 2], seed=0)
        alpha, rep = find_descent_rate(net, ds, build_full(ds), hp(0.3, 0.3, 0.2, 0.2), iters=200)
        assert alpha is not None and rep.iterations_run == 200
        assert is_non_increasing(rep.history)


class TestFiniteDiff:
    def test_half_square(self):
        net = Network([1, 1], [np.array([[3.0]])], [np.array([0.0])], ["linear"])
        ds = LabeledDataset([[0.0]], [0])
        g = finite_diff_grad(net, ds, build_full(ds), hp(0, 0, 0, 1))
        assert g.dW[0][0, 0] == pytest.approx(3.0, abs=1e-8)

    def test_shapes_mirror_network(self):
        net, ds = instance(sizes=(3, 5, 4, 2), kinds=("tanh", "sigmoid", "linear"))
        g = finite_diff_grad(net, ds, build_full(ds), Hyperparams())
        assert [w.shape for w in g.dW] == [w.shape for w in net.weights]
        assert [b.shape for b in g.db] == [b.shape for b in net.biases]

    def test_richardson_second_order(self):
        net, ds = instance(3, sizes=(2, 3, 2), kinds=("tanh", "tanh"))
        p, h = build_full(ds), hp(0.4, 0.3, 0.0, 0.3)
        exact = grad_total(net, ds, p, h).flat()
        e1 = np.abs(finite_diff_grad(net, ds, p, h, h=1e-2).flat() - exact).max()
        e2 = np.abs(finite_diff_grad(net, ds, p, h, h=5e-3).flat() - exact).max()
        assert 3.0 < e1 / e2 < 5.0

    def test_rejects_non_positive_step(self):
        net, ds = instance()
        with pytest.raises(ValueError):
            finite_diff_grad(net, ds, build_full(ds), Hyperparams(), h=0.0)


class TestErrorMetrics:
    def test_max_relative_error_names_coordinate(self):
        net, _ = instance()
        a = GradientBuffer.zeros_like(net)
        b = GradientBuffer.zeros_like(net)
        b.db[1][1] = 1.0
        err, where = max_relative_error(a, b)
        assert err == 1.0 and where == "b[2][1]"

    def test_norm_relative_error(self):
        net, _ = instance()
        a = GradientBuffer([np.ones_like(w) for w in net.weights], [np.ones_like(b) for b in net.biases])
        assert norm_relative_error(a, a) == 0.0
        assert norm_relative_error(a, a.scaled(2.0)) == pytest.approx(0.5)
