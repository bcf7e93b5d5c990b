"""Tests for the dense-network substrate: init, forward, backprop, optimizers."""
import math

import numpy as np
import pytest

from suntrack import neural
from suntrack.neural import (
    Gradients,
    Mlp,
    OptimState,
    backward,
    backward_batch,
    forward,
    forward_batch,
    gradient_check,
    mlp_from_dict,
    mlp_new,
    mlp_to_dict,
    step,
)

from oracles import mlp_forward_reference


def quadratic_loss(target):
    """loss_fn factory: squared distance to a fixed target, with its gradient."""
    t = np.asarray(target, dtype=np.float64)

    def loss_fn(y):
        r = y - t
        return float(r @ r), 2.0 * r

    return loss_fn


def input_away_from_kinks(m, rng, margin=1e-3):
    """Sample inputs, rejecting any that put a hidden pre-activation near 0.

    Finite differences are only trustworthy away from the ReLU kinks.
    """
    for _ in range(200):
        x = rng.normal(size=m.n_in)
        a = x.copy()
        ok = True
        for l in range(len(m.weights) - 1):
            z = a @ m.weights[l] + m.biases[l]
            if np.min(np.abs(z)) < margin:
                ok = False
                break
            a = np.maximum(z, 0.0)
        if ok:
            return x
    raise RuntimeError("could not find an input away from ReLU kinks")


class TestMlpNew:

    def test_biases_zero(self):
        """Fresh networks start with all-zero biases."""
        m = mlp_new([3, 1], seed=7)
        for b in m.biases:
            assert np.all(b == 0.0)

    def test_deterministic_per_seed(self):
        """Same sizes and seed give bit-identical parameters."""
        m1 = mlp_new([5, 8, 2], seed=123)
        m2 = mlp_new([5, 8, 2], seed=123)
        for w1, w2 in zip(m1.weights, m2.weights):
            assert np.array_equal(w1, w2)

    def test_different_seeds_differ(self):
        m1 = mlp_new([5, 8, 2], seed=1)
        m2 = mlp_new([5, 8, 2], seed=2)
        assert not np.array_equal(m1.weights[0], m2.weights[0])

    def test_weights_within_uniform_bound(self):
        """Every weight obeys the +-sqrt(6/(fan_in+fan_out)) bound."""
        m = mlp_new([4, 8, 2], seed=11)
        for w, (fi, fo) in zip(m.weights, [(4, 8), (8, 2)]):
            bound = math.sqrt(6.0 / (fi + fo))
            assert np.max(np.abs(w)) <= bound

    def test_shapes_chain(self):
        m = mlp_new([7, 5, 3, 2], seed=0)
        assert [w.shape for w in m.weights] == [(7, 5), (5, 3), (3, 2)]
        assert [b.shape for b in m.biases] == [(5,), (3,), (2,)]

    def test_rejects_single_layer(self):
        with pytest.raises(ValueError):
            mlp_new([4], seed=0)

    def test_rejects_zero_size(self):
        with pytest.raises(ValueError):
            mlp_new([4, 0, 2], seed=0)


class TestForward:

    def test_zero_parameters_zero_output(self):
        m = mlp_new([3, 4, 2], seed=0)
        for w in m.weights:
            w[:] = 0.0
        assert np.all(forward(m, np.ones(3)) == 0.0)

    def test_identity_single_layer_adds_bias(self):
        """A [2,2] identity-weight layer computes x + b."""
        m = Mlp((2, 2), [np.eye(2)], [np.array([0.5, -1.0])])
        y = forward(m, np.array([2.0, 3.0]))
        assert y == pytest.approx([2.5, 2.0])

    def test_matches_straight_line_reference(self):
        """Library forward agrees with a loop-based re-implementation to 1e-12."""
        rng = np.random.default_rng(42)
        for seed in range(5):
            m = mlp_new([6, 10, 7, 3], seed=seed)
            x = rng.normal(size=6)
            expected = mlp_forward_reference(
                [w.tolist() for w in m.weights], [b.tolist() for b in m.biases], x)
            assert forward(m, x) == pytest.approx(expected, abs=1e-12)

    def test_batch_rows_match_single(self):
        """Tolerance covers backends whose batched matmul rounds differently."""
        m = mlp_new([4, 6, 2], seed=3)
        rng = np.random.default_rng(0)
        xs = rng.normal(size=(5, 4))
        ys = forward_batch(m, xs)
        for i in range(5):
            assert ys[i] == pytest.approx(forward(m, xs[i]), rel=1e-12, abs=1e-13)

    def test_dimension_mismatch_rejected(self):
        m = mlp_new([4, 2], seed=0)
        with pytest.raises(ValueError):
            forward(m, np.ones(5))

    def test_bitwise_deterministic(self):
        """Repeated evaluation of the same value is bit-identical."""
        m = mlp_new([8, 16, 4], seed=9)
        x = np.random.default_rng(1).normal(size=8)
        y1 = forward(m, x)
        y2 = forward(m, x)
        assert y1.tobytes() == y2.tobytes()


class TestBackward:

    def test_zero_cotangent_zero_gradients(self):
        m = mlp_new([3, 5, 2], seed=0)
        g = backward(m, np.ones(3), np.zeros(2))
        for arr in g.weights + g.biases:
            assert np.all(arr == 0.0)

    def test_linear_layer_closed_form(self):
        """For y = W^T x + b the weight gradient is the outer product x d^T."""
        rng = np.random.default_rng(5)
        w = rng.normal(size=(3, 2))
        b = rng.normal(size=2)
        m = Mlp((3, 2), [w], [b])
        x = rng.normal(size=3)
        d = rng.normal(size=2)
        g = backward(m, x, d)
        assert g.weights[0] == pytest.approx(np.outer(x, d), abs=1e-14)
        assert g.biases[0] == pytest.approx(d, abs=1e-14)

    def test_matches_finite_differences(self):
        """Backprop gradients track central differences on a random net."""
        m = mlp_new([5, 9, 4], seed=17)
        rng = np.random.default_rng(17)
        x = input_away_from_kinks(m, rng)
        err = gradient_check(m, x, quadratic_loss(np.zeros(4)))
        assert err < 1e-4

    def test_relu_dead_unit_gets_no_gradient(self):
        """Weights feeding a unit held at 0 receive zero gradient."""
        m = mlp_new([2, 2, 1], seed=0)
        m.weights[0][:] = np.array([[1.0, -1.0], [1.0, -1.0]])
        m.biases[0][:] = 0.0
        g = backward(m, np.array([1.0, 1.0]), np.array([1.0]))
        # second hidden unit has pre-activation -2, so column 1 is dead
        assert np.all(g.weights[0][:, 1] == 0.0)
        assert g.biases[0][1] == 0.0

    def test_shape_mismatch_rejected(self):
        m = mlp_new([3, 2], seed=0)
        with pytest.raises(ValueError):
            backward(m, np.ones(3), np.ones(3))

    def test_batch_sums_per_row_gradients(self):
        m = mlp_new([4, 6, 3], seed=2)
        rng = np.random.default_rng(2)
        xs = rng.normal(size=(4, 4))
        ds = rng.normal(size=(4, 3))
        g_batch = backward_batch(m, xs, ds)
        acc_w = [np.zeros_like(w) for w in m.weights]
        acc_b = [np.zeros_like(b) for b in m.biases]
        for i in range(4):
            g = backward(m, xs[i], ds[i])
            for l in range(len(acc_w)):
                acc_w[l] += g.weights[l]
                acc_b[l] += g.biases[l]
        for l in range(len(acc_w)):
            assert g_batch.weights[l] == pytest.approx(acc_w[l], abs=1e-12)
            assert g_batch.biases[l] == pytest.approx(acc_b[l], abs=1e-12)


class TestStep:

    def test_zero_gradient_keeps_parameters(self):
        m = mlp_new([3, 4, 2], seed=1)
        g = Gradients([np.zeros_like(w) for w in m.weights],
                      [np.zeros_like(b) for b in m.biases])
        m2, _ = step(m, g, OptimState.sgd(0.1))
        for a, b in zip(m.weights + m.biases, m2.weights + m2.biases):
            assert np.array_equal(a, b)

    def test_sgd_unit_gradient(self):
        """lr=1 with all-ones gradients decrements every parameter by 1."""
        m = mlp_new([2, 3], seed=0)
        g = Gradients([np.ones_like(w) for w in m.weights],
                      [np.ones_like(b) for b in m.biases])
        m2, _ = step(m, g, OptimState.sgd(1.0))
        assert m2.weights[0] == pytest.approx(m.weights[0] - 1.0, abs=0)
        assert m2.biases[0] == pytest.approx(m.biases[0] - 1.0, abs=0)

    def test_zero_learning_rate_is_identity(self):
        m = mlp_new([3, 3], seed=4)
        g = Gradients([np.full_like(w, 2.5) for w in m.weights],
                      [np.full_like(b, -1.0) for b in m.biases])
        for opt in (OptimState.sgd(0.0), OptimState.adam(0.0, like=m)):
            m2, _ = step(m, g, opt)
            for a, b in zip(m.weights + m.biases, m2.weights + m2.biases):
                assert np.array_equal(a, b)

    def test_adam_first_step_magnitude(self):
        """First Adam step moves each parameter by ~lr in the -sign(g) direction.

        With zero moments, the bias-corrected update reduces to
        lr * g / (|g| + eps), so the magnitude is lr for any g well above eps.
        """
        m = mlp_new([2, 2], seed=0)
        rng = np.random.default_rng(8)
        gw = rng.normal(size=(2, 2)) + np.sign(rng.normal(size=(2, 2)))  # keep |g| >> eps
        gb = rng.normal(size=2) + 1.0
        g = Gradients([gw], [gb])
        lr = 0.01
        m2, o2 = step(m, g, OptimState.adam(lr, like=m))
        delta = m2.weights[0] - m.weights[0]
        assert np.abs(delta) == pytest.approx(np.full((2, 2), lr), rel=1e-5)
        assert np.sign(delta) == pytest.approx(-np.sign(gw))
        assert o2.t == 1

    def test_adam_matches_hand_rolled_two_steps(self):
        """Two Adam updates agree with an explicit reference computation."""
        m = mlp_new([1, 1], seed=0)
        w0 = float(m.weights[0][0, 0])
        g1, g2 = 0.3, -0.2
        lr = 0.05
        b1, b2, eps = 0.9, 0.999, 1e-8

        mm, vv, wref = 0.0, 0.0, w0
        for t, grad in ((1, g1), (2, g2)):
            mm = b1 * mm + (1 - b1) * grad
            vv = b2 * vv + (1 - b2) * grad * grad
            wref -= lr * (mm / (1 - b1 ** t)) / (math.sqrt(vv / (1 - b2 ** t)) + eps)

        opt = OptimState.adam(lr, like=m)
        for grad in (g1, g2):
            g = Gradients([np.array([[grad]])], [np.zeros(1)])
            m, opt = step(m, g, opt)
        assert float(m.weights[0][0, 0]) == pytest.approx(wref, abs=1e-15)

    def test_shape_mismatch_rejected(self):
        m = mlp_new([3, 2], seed=0)
        g = Gradients([np.zeros((2, 2))], [np.zeros(2)])
        with pytest.raises(ValueError):
            step(m, g, OptimState.sgd(0.1))


class TestGradientCheck:

    def test_linear_net_quadratic_loss_tight(self):
        """Exact for quadratics, so the relative error is at roundoff level."""
        m = mlp_new([4, 3], seed=21)
        x = np.random.default_rng(21).normal(size=4)
        err = gradient_check(m, x, quadratic_loss(np.array([1.0, -1.0, 0.5])))
        assert err < 1e-7

    def test_twenty_random_relu_nets(self):
        """Gradient check stays under 1e-4 across seeded nets and inputs."""
        for seed in range(20):
            m = mlp_new([6, 12, 5, 2], seed=seed)
            rng = np.random.default_rng(1000 + seed)
            x = input_away_from_kinks(m, rng)
            err = gradient_check(m, x, quadratic_loss(np.zeros(2)))
            assert err < 1e-4, f"seed {seed}: {err}"

    def test_subset_sampling_on_large_net(self):
        """Nets above the sample limit still check a 200-parameter subset."""
        m = mlp_new([30, 40, 10], seed=3)
        rng = np.random.default_rng(3)
        x = input_away_from_kinks(m, rng)
        err = gradient_check(m, x, quadratic_loss(np.zeros(10)), sample_limit=200)
        assert err < 1e-4

    def test_detects_corrupted_gradient(self):
        """A deliberately broken backward is flagged with a large error."""
        m = mlp_new([3, 4, 2], seed=6)
        rng = np.random.default_rng(6)
        x = input_away_from_kinks(m, rng)

        real_backward = neural.backward
        def broken(mm, xx, dd):
            g = real_backward(mm, xx, dd)
            g.weights[0] = g.weights[0] * 3.0 + 0.1
            return g

        try:
            neural.backward = broken
            err = gradient_check(m, x, quadratic_loss(np.zeros(2)))
        finally:
            neural.backward = real_backward
        assert err > 1e-2


class TestCheckpoint:

    def test_roundtrip(self):
        m = mlp_new([5, 7, 3], seed=13)
        m2 = mlp_from_dict(mlp_to_dict(m))
        assert m2.layer_sizes == m.layer_sizes
        for a, b in zip(m.weights + m.biases, m2.weights + m2.biases):
            assert np.array_equal(a, b)

    def test_dict_has_format_version(self):
        d = mlp_to_dict(mlp_new([2, 2], seed=0))
        assert d["format_version"] == 1

    def test_rejects_unknown_version(self):
        d = mlp_to_dict(mlp_new([2, 2], seed=0))
        d["format_version"] = 2
        with pytest.raises(ValueError):
            mlp_from_dict(d)

    def test_rejects_inconsistent_shapes(self):
        d = mlp_to_dict(mlp_new([3, 4, 2], seed=0))
        d["layer_sizes"] = [3, 5, 2]
        with pytest.raises(ValueError):
            mlp_from_dict(d)

    def test_rejects_non_finite(self):
        d = mlp_to_dict(mlp_new([2, 2], seed=0))
        d["weights"][0][0][0] = float("nan")
        with pytest.raises(ValueError):
            mlp_from_dict(d)
