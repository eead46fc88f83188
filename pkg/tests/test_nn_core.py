import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptfm.errors import DomainError, ShapeError
from ptfm.nn_core import (
    ActivationKind,
    LossKind,
    PerceptronNet,
    backward,
    bce_loss,
    forward,
    gradient_check,
    hidden_size,
    huber_loss,
    log_sigmoid,
    sigmoid,
    softplus,
)

from conftest import random_net

finite = st.floats(min_value=-700, max_value=700, allow_nan=False)

# values below were evaluated with mpmath at 30 significant digits


class TestActivations:
    def test_sigmoid_values(self):
        assert sigmoid(0.0) == 0.5
        assert abs(sigmoid(100.0) - 1.0) <= 1e-12
        assert sigmoid(1.0) == pytest.approx(0.7310585786300049, abs=1e-12)

    def test_softplus_values(self):
        assert softplus(0.0) == pytest.approx(math.log(2), abs=1e-15)
        assert 0 <= softplus(-100.0) <= 1e-40
        assert softplus(5.0) == pytest.approx(5.006715348489118, abs=1e-12)

    def test_log_sigmoid_values(self):
        assert log_sigmoid(0.0) == pytest.approx(-math.log(2), abs=1e-15)
        assert log_sigmoid(3.0) == pytest.approx(-0.04858735157374206, abs=1e-12)

    def test_log_sigmoid_is_negated_softplus(self, rng):
        x = rng.normal(0, 20, 1000)
        npt.assert_array_equal(log_sigmoid(x), -softplus(-x))

    def test_no_overflow_at_extremes(self):
        x = np.array([-700.0, -50.0, 0.0, 50.0, 700.0])
        with np.errstate(over="raise"):
            for f in (sigmoid, softplus, log_sigmoid):
                assert np.all(np.isfinite(f(x)))
        assert softplus(700.0) == 700.0

    @given(finite)
    def test_sigmoid_symmetry(self, x):
        assert abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-12

    @given(finite)
    def test_softplus_difference_identity(self, x):
        assert abs(softplus(x) - softplus(-x) - x) <= 1e-10

    @pytest.mark.parametrize("kind", list(ActivationKind))
    def test_derivative_matches_finite_difference(self, kind, rng):
        x = rng.normal(0, 3, 50)
        h = 1e-6
        fd = (kind.value_of(x + h) - kind.value_of(x - h)) / (2 * h)
        npt.assert_allclose(kind.derivative(x), fd, rtol=1e-6, atol=1e-9)


class TestForward:
    def test_zero_net_gives_zero_output(self, rng):
        net = PerceptronNet.zeros(4, 3, 2)
        out, _ = forward(net, rng.normal(size=4))
        npt.assert_array_equal(out, np.zeros(2))

    def test_unit_sigmoid_net(self):
        net = PerceptronNet([[1.0]], [0.0], [[1.0]], [0.0], ActivationKind.SIGMOID)
        out, cache = forward(net, [0.0])
        npt.assert_array_equal(out, [0.5])
        npt.assert_array_equal(cache.hidden_post, sigmoid(cache.hidden_pre))

    def test_matches_hand_composition(self, rng):
        net = random_net(rng, 4, 2, 1, ActivationKind.SOFTPLUS)
        x = rng.normal(size=4)
        hidden = []
        for i in range(2):
            pre = sum(net.W1[i, j] * x[j] for j in range(4)) + net.b1[i]
            hidden.append(math.log1p(math.exp(pre)))
        expected = sum(net.W2[0, i] * hidden[i] for i in range(2)) + net.b2[0]
        out, _ = forward(net, x)
        assert abs(out[0] - expected) < 1e-12

    def test_batch_rows_match_single_rows(self, rng):
        net = random_net(rng, 5, 3, 2, ActivationKind.LOG_SIGMOID)
        X = rng.normal(size=(7, 5))
        batch, _ = forward(net, X)
        for i in range(7):
            npt.assert_allclose(batch[i], forward(net, X[i])[0], rtol=0, atol=1e-14)

    def test_pure_function(self, rng):
        net = random_net(rng, 3, 2, 1)
        x = rng.normal(size=3)
        assert forward(net, x)[0].tobytes() == forward(net, x)[0].tobytes()

    def test_wrong_length_names_both_sizes(self):
        net = PerceptronNet.zeros(3, 2, 1)
        with pytest.raises(ShapeError, match="3.*\\(4,\\)"):
            forward(net, np.zeros(4))

    def test_net_is_read_only(self):
        net = PerceptronNet.zeros(2, 2, 1)
        with pytest.raises(ValueError):
            net.W1[0, 0] = 1.0

    def test_rejects_non_finite_weights(self):
        with pytest.raises(DomainError):
            PerceptronNet([[np.nan]], [0.0], [[1.0]], [0.0])


class TestLosses:
    def test_huber_zero_error(self):
        loss, grad = huber_loss([1.0, -2.0], [1.0, -2.0])
        assert loss == 0.0
        npt.assert_array_equal(grad, [0.0, 0.0])

    def test_huber_branches(self):
        assert huber_loss([0.5], [0.0])[0] == pytest.approx(0.125)
        assert huber_loss([2.0], [0.0])[0] == pytest.approx(1.5)

    def test_huber_continuous_at_one(self):
        below = huber_loss([1.0 - 1e-12], [0.0])[0]
        at = huber_loss([1.0], [0.0])[0]
        assert at == 0.5
        assert abs(below - at) < 1e-11

    def test_huber_rejects_bad_input(self):
        with pytest.raises(ShapeError):
            huber_loss([1.0, 2.0], [1.0])
        with pytest.raises(ShapeError):
            huber_loss([], [])

    def test_bce_values(self):
        loss, grad = bce_loss(0.0, 1.0)
        assert loss == pytest.approx(math.log(2), abs=1e-15)
        assert grad == -0.5
        loss, grad = bce_loss(0.0, 0.0)
        assert loss == pytest.approx(0.6931471806, abs=1e-10)
        assert grad == 0.5
        assert bce_loss(60.0, 1.0)[0] < 1e-25

    def test_bce_matches_probability_form(self, rng):
        z = rng.normal(0, 3, 100)
        t = (rng.random(100) < 0.5).astype(float)
        p = 1 / (1 + np.exp(-z))
        direct = -(t * np.log(p) + (1 - t) * np.log(1 - p))
        assert bce_loss(z, t)[0] == pytest.approx(direct.mean(), rel=1e-12)

    def test_bce_rejects_soft_targets(self):
        with pytest.raises(DomainError):
            bce_loss(0.3, 0.5)

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(-50, 50))
    def test_losses_nonnegative(self, preds, shift):
        p = np.array(preds)
        assert huber_loss(p, p + shift)[0] >= 0
        t = (p > 0).astype(float)
        assert bce_loss(p, t)[0] >= 0


class TestBackward:
    def test_zero_upstream(self, rng):
        net = random_net(rng, 3, 2, 1)
        out, cache = forward(net, rng.normal(size=3))
        for g in backward(net, cache, np.zeros_like(out)).as_tuple():
            assert not np.any(g)

    def test_hand_chain_rule(self):
        net = PerceptronNet([[1.0]], [0.0], [[1.0]], [0.0], ActivationKind.IDENTITY)
        _, cache = forward(net, [2.0])
        g = backward(net, cache, np.array([1.0]))
        npt.assert_array_equal(g.dW2, [[2.0]])
        npt.assert_array_equal(g.dW1, [[2.0]])
        npt.assert_array_equal(g.db1, [1.0])
        npt.assert_array_equal(g.db2, [1.0])

    def test_shape_mismatch(self, rng):
        net = random_net(rng, 3, 2, 1)
        _, cache = forward(net, rng.normal(size=3))
        with pytest.raises(ShapeError):
            backward(net, cache, np.zeros(2))

    @pytest.mark.parametrize("shape", [(3, 2, 1), (10, 6, 1), (18, 10, 1)])
    @pytest.mark.parametrize("kind", list(ActivationKind))
    @pytest.mark.parametrize("loss", [LossKind.huber(), LossKind.bce()])
    def test_gradient_check(self, shape, kind, loss, rng):
        net = random_net(rng, *shape, hidden=kind)
        X = rng.normal(size=(20, shape[0]))
        if loss.tag == "huber":
            y = rng.normal(0, 3, size=(20, 1))
        else:
            y = (rng.random((20, 1)) < 0.5).astype(float)
        assert gradient_check(net, loss, (X, y), h=1e-5) < 1e-5

    def test_gradient_check_zero_case(self):
        net = PerceptronNet.zeros(2, 2, 1)
        err = gradient_check(net, LossKind.huber(), (np.ones((3, 2)), np.zeros((3, 1))))
        assert err == 0.0

    def test_gradient_check_balanced_saturation(self):
        # every residual sits in the linear Huber zone with opposite signs,
        # so db2 is exactly zero and the numeric side must agree closely
        net = PerceptronNet([[0.5]], [0.0], [[1.0]], [0.0], ActivationKind.IDENTITY)
        X = np.array([[1.0], [-1.0]])
        y = np.array([[-4.0], [3.5]])
        assert gradient_check(net, LossKind.huber(), (X, y)) < 1e-5

    def test_gradient_check_detects_wrong_backprop(self, rng, monkeypatch):
        import ptfm.nn_core as nn

        real = nn.backward

        def skewed(net, cache, d):
            g = real(net, cache, d)
            return nn.Gradients(g.dW1 * 1.001, g.db1, g.dW2, g.db2)

        monkeypatch.setattr(nn, "backward", skewed)
        net = random_net(rng, 3, 2, 1)
        y = rng.normal(size=(5, 1))
        assert gradient_check(net, LossKind.huber(), (rng.normal(size=(5, 3)), y)) > 5e-4

    def test_gradient_check_rejects_big_step(self, rng):
        with pytest.raises(DomainError):
            gradient_check(random_net(rng, 2, 1, 1), LossKind.huber(), (np.ones(2), np.ones(1)), h=0.1)


@pytest.mark.parametrize("n_in,n_out,expected", [(18, 1, 10), (1, 1, 1), (20, 2, 11), (11, 1, 6), (15, 1, 8)])
def test_hidden_size(n_in, n_out, expected):
    assert hidden_size(n_in, n_out) == expected


def test_hidden_size_rejects_zero():
    with pytest.raises(DomainError):
        hidden_size(0, 1)
