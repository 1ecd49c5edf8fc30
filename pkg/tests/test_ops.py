"""Layer primitive tests: forward values forced by the math, backward
passes against the finite-difference oracle, and mask/clip contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dropguard.exceptions import ShapeError
from dropguard.ops import (
    bernoulli_mask,
    clip01,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2_backward,
    maxpool2_forward,
    relu_backward,
    relu_forward,
    softmax_xent,
    softmax_xent_backward,
)
from dropguard.rng import SeedStream

from finite_diff import numerical_gradient, rel_error

TOL = 1e-4


def margin_ok(x, margin=1e-3):
    """True if no element sits within `margin` of the ReLU kink at zero."""
    return np.all(np.abs(x) > margin)


class TestConv2d:
    def test_identity_kernel(self):
        rng = SeedStream(1)
        x = rng.random((5, 7, 3))
        kernels = np.zeros((1, 1, 3, 3))
        for c in range(3):
            kernels[0, 0, c, c] = 1.0
        out, _ = conv2d_forward(x, kernels, np.zeros(3))
        np.testing.assert_array_equal(out, x)

    def test_output_shape(self):
        x = np.zeros((28, 28, 1))
        out, _ = conv2d_forward(x, np.zeros((3, 3, 1, 32)), np.zeros(32))
        assert out.shape == (26, 26, 32)

    def test_channel_mismatch_names_axis(self):
        with pytest.raises(ShapeError, match="channel"):
            conv2d_forward(np.zeros((6, 6, 2)), np.zeros((3, 3, 3, 4)), np.zeros(4))

    def test_too_small_input(self):
        with pytest.raises(ShapeError, match="spatial"):
            conv2d_forward(np.zeros((2, 2, 1)), np.zeros((3, 3, 1, 4)), np.zeros(4))

    @pytest.mark.parametrize("trial", range(5))
    def test_gradients_match_finite_differences(self, trial):
        rng = SeedStream(100 + trial)
        x = rng.child("x").normal((6, 6, 2))
        k = rng.child("k").normal((3, 3, 2, 4), scale=0.5)
        b = rng.child("b").normal((4,), scale=0.1)
        dout = rng.child("d").normal((4, 4, 4))

        out, cache = conv2d_forward(x, k, b)
        dx, dk, db = conv2d_backward(dout, cache)

        def loss_x(xx):
            return float((conv2d_forward(xx, k, b)[0] * dout).sum())

        def loss_k(kk):
            return float((conv2d_forward(x, kk, b)[0] * dout).sum())

        def loss_b(bb):
            return float((conv2d_forward(x, k, bb)[0] * dout).sum())

        assert rel_error(dx, numerical_gradient(loss_x, x)) < TOL
        assert rel_error(dk, numerical_gradient(loss_k, k)) < TOL
        assert rel_error(db, numerical_gradient(loss_b, b)) < TOL

    def test_batch_matches_single(self):
        rng = SeedStream(7)
        xb = rng.child("x").normal((3, 5, 5, 2))
        k = rng.child("k").normal((3, 3, 2, 4))
        b = rng.child("b").normal((4,))
        batched, _ = conv2d_forward(xb, k, b)
        for i in range(3):
            single, _ = conv2d_forward(xb[i], k, b)
            np.testing.assert_allclose(batched[i], single, rtol=0, atol=1e-12)


class TestDense:
    def test_identity(self):
        x = np.array([0.3, -1.2, 4.0])
        out, _ = dense_forward(x, np.eye(3), np.zeros(3))
        np.testing.assert_array_equal(out, x)

    def test_forced_affine_example(self):
        out, _ = dense_forward(
            np.array([1.0, 1.0]),
            np.array([[1.0, 2.0], [3.0, 4.0]]),
            np.array([1.0, 1.0]),
        )
        np.testing.assert_array_equal(out, [4.0, 8.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError, match="axis"):
            dense_forward(np.zeros(3), np.zeros((2, 4)), np.zeros(2))

    @pytest.mark.parametrize("trial", range(5))
    def test_gradients_match_finite_differences(self, trial):
        rng = SeedStream(200 + trial)
        x = rng.child("x").normal((5,))
        w = rng.child("w").normal((3, 5))
        b = rng.child("b").normal((3,))
        dout = rng.child("d").normal((3,))

        _, cache = dense_forward(x, w, b)
        dx, dw, db = dense_backward(dout, cache)

        assert rel_error(dx, numerical_gradient(
            lambda xx: float((dense_forward(xx, w, b)[0] * dout).sum()), x)) < TOL
        assert rel_error(dw, numerical_gradient(
            lambda ww: float((dense_forward(x, ww, b)[0] * dout).sum()), w)) < TOL
        assert rel_error(db, numerical_gradient(
            lambda bb: float((dense_forward(x, w, bb)[0] * dout).sum()), b)) < TOL


class TestRelu:
    def test_forced_values(self):
        out, _ = relu_forward(np.array([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out, [0.0, 0.0, 2.0])

    def test_all_negative_zero_everything(self):
        x = -1.0 - np.arange(6.0).reshape(2, 3)
        out, cache = relu_forward(x)
        assert not out.any()
        assert not relu_backward(np.ones_like(x), cache).any()

    @pytest.mark.parametrize("trial", range(5))
    def test_gradient_away_from_kink(self, trial):
        rng = SeedStream(300 + trial)
        x = rng.child("x").normal((8,))
        x = np.where(np.abs(x) < 2e-3, x + 5e-3, x)  # off the kink
        assert margin_ok(x)
        dout = rng.child("d").normal((8,))
        _, cache = relu_forward(x)
        dx = relu_backward(dout, cache)
        num = numerical_gradient(
            lambda xx: float((relu_forward(xx)[0] * dout).sum()), x)
        assert rel_error(dx, num) < TOL


class TestMaxpool2:
    def test_constant_input(self):
        out, _ = maxpool2_forward(np.full((4, 4, 2), 3.5))
        np.testing.assert_array_equal(out, np.full((2, 2, 2), 3.5))

    def test_single_window(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1)
        out, cache = maxpool2_forward(x)
        assert out.reshape(()) == 4.0
        dx = maxpool2_backward(np.full((1, 1, 1), 7.0), cache)
        expected = np.zeros((2, 2, 1))
        expected[1, 1, 0] = 7.0
        np.testing.assert_array_equal(dx, expected)

    def test_tie_routes_to_first_in_scan_order(self):
        x = np.full((2, 2, 1), 1.0)
        _, cache = maxpool2_forward(x)
        dx = maxpool2_backward(np.ones((1, 1, 1)), cache)
        expected = np.zeros((2, 2, 1))
        expected[0, 0, 0] = 1.0
        np.testing.assert_array_equal(dx, expected)

    def test_odd_extent_rejected(self):
        with pytest.raises(ShapeError, match="even"):
            maxpool2_forward(np.zeros((3, 4, 1)))

    @pytest.mark.parametrize("trial", range(5))
    def test_gradient_with_clear_maxima(self, trial):
        rng = SeedStream(400 + trial)
        x = rng.child("x").normal((4, 6, 2))
        x += np.linspace(0, 1, x.size).reshape(x.shape)  # break near-ties
        dout = rng.child("d").normal((2, 3, 2))
        _, cache = maxpool2_forward(x)
        dx = maxpool2_backward(dout, cache)
        num = numerical_gradient(
            lambda xx: float((maxpool2_forward(xx)[0] * dout).sum()), x)
        assert rel_error(dx, num) < TOL


class TestSoftmaxXent:
    def test_uniform_logits(self):
        probs, loss = softmax_xent(np.zeros(5), 2)
        np.testing.assert_allclose(probs, np.full(5, 0.2), atol=1e-12)
        assert loss == pytest.approx(np.log(5.0))

    def test_probabilities_sum_to_one(self):
        rng = SeedStream(5)
        logits = rng.normal((40, 10), scale=30.0)
        probs, _ = softmax_xent(logits, np.zeros(40, dtype=int))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    @given(st.floats(-100, 100))
    @settings(max_examples=25, deadline=None)
    def test_shift_invariance(self, c):
        logits = np.array([0.5, -1.0, 2.0, 0.0])
        p1, _ = softmax_xent(logits, 0)
        p2, _ = softmax_xent(logits + c, 0)
        np.testing.assert_allclose(p1, p2, atol=1e-12)

    def test_extreme_logits_stay_finite(self):
        probs, loss = softmax_xent(np.array([1000.0, -1000.0, 0.0]), 1)
        assert np.all(np.isfinite(probs))
        assert np.isfinite(loss) and loss > 100

    @pytest.mark.parametrize("trial", range(5))
    def test_gradient_matches_finite_differences(self, trial):
        rng = SeedStream(500 + trial)
        logits = rng.normal((6,))
        grad = softmax_xent_backward(softmax_xent(logits, 3)[0], 3)
        num = numerical_gradient(lambda z: softmax_xent(z, 3)[1], logits)
        assert rel_error(grad, num) < 1e-5


class TestBernoulliMask:
    def test_keep_prob_one_is_all_ones(self):
        mask = bernoulli_mask((50, 20), 1.0, SeedStream(0))
        assert mask.all()

    def test_empirical_mean_within_three_standard_errors(self):
        p = 0.5
        n = 100_000
        mask = bernoulli_mask((n,), p, SeedStream(12).child("mean"))
        se = np.sqrt(p * (1 - p) / n)
        assert abs(mask.mean() - p) < 3 * se

    def test_same_seed_same_mask(self):
        a = bernoulli_mask((40, 7), 0.3, SeedStream(9).child("m"))
        b = bernoulli_mask((40, 7), 0.3, SeedStream(9).child("m"))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("p", [0.0, -0.5, 1.2])
    def test_invalid_keep_prob(self, p):
        with pytest.raises(ValueError, match="keep_prob"):
            bernoulli_mask((3,), p, SeedStream(0))

    def test_values_are_binary(self):
        mask = bernoulli_mask((1000,), 0.25, SeedStream(3))
        assert set(np.unique(mask)) <= {0.0, 1.0}


class TestClip01:
    def test_forced_example(self):
        np.testing.assert_array_equal(
            clip01(np.array([-0.1, 0.5, 1.2])), [0.0, 0.5, 1.0]
        )

    def test_in_range_unchanged(self):
        x = np.array([0.0, 0.25, 1.0])
        np.testing.assert_array_equal(clip01(x), x)

    @given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_idempotent_and_bounded(self, values):
        x = np.array(values)
        once = clip01(x)
        assert once.min() >= 0.0 and once.max() <= 1.0
        np.testing.assert_array_equal(clip01(once), once)
