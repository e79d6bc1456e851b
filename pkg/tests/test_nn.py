"""Network engine: layer oracles, loss, optimizer, gradient integrity."""

import numpy as np
import pytest

from kinemotion.errors import ContractError
from kinemotion.nn import (
    LSTM,
    Adam,
    Conv1D,
    Dense,
    Dropout,
    MaxPool1D,
    Network,
    ReLU,
    gradient_check,
    load_checkpoint,
    max_relative_error,
    save_checkpoint,
    softmax,
    softmax_cross_entropy,
)


def brute_force_conv1d(x, w, b, stride):
    """Triple-loop direct convolution; the reference for Conv1D.forward."""
    out_ch, in_ch, k = w.shape
    l_out = (x.shape[1] - k) // stride + 1
    out = np.zeros((out_ch, l_out))
    for o in range(out_ch):
        for t in range(l_out):
            acc = 0.0
            for c in range(in_ch):
                for j in range(k):
                    acc += w[o, c, j] * x[c, t * stride + j]
            out[o, t] = acc + b[o]
    return out


class TestConv1D:
    def test_identity_kernel_passes_input_through(self):
        conv = Conv1D(3, 3, kernel=1, stride=1)
        conv.params["w"] = np.eye(3)[:, :, None].astype(float)
        conv.params["b"] = np.zeros(3)
        x = np.random.default_rng(0).normal(size=(3, 10))
        np.testing.assert_array_equal(conv.forward(x), x)

    @pytest.mark.parametrize("stride", [1, 2, 3])
    def test_matches_brute_force(self, stride):
        rng = np.random.default_rng(stride)
        conv = Conv1D(4, 5, kernel=3, stride=stride, rng=rng)
        x = rng.normal(size=(4, 17))
        expected = brute_force_conv1d(x, conv.params["w"], conv.params["b"], stride)
        np.testing.assert_allclose(conv.forward(x), expected, rtol=1e-12)

    def test_wrong_channel_count_names_layer(self):
        conv = Conv1D(4, 5, kernel=3)
        with pytest.raises(ContractError, match="Conv1D"):
            conv.forward(np.zeros((3, 17)))

    def test_too_short_input_rejected(self):
        conv = Conv1D(2, 2, kernel=8)
        with pytest.raises(ContractError):
            conv.forward(np.zeros((2, 5)))


class TestMaxPool:
    def test_values_and_tie_breaking(self):
        pool = MaxPool1D(kernel=2, stride=2)
        x = np.array([[1.0, 3.0, 5.0, 5.0], [2.0, 2.0, 0.0, -1.0]])
        out = pool.forward(x)
        np.testing.assert_array_equal(out, [[3.0, 5.0], [2.0, 0.0]])
        # the tied window routed its gradient to the earliest position
        dx = pool.backward(np.ones((2, 2)))
        np.testing.assert_array_equal(dx, [[0, 1, 1, 0], [1, 0, 1, 0]])


class TestDropout:
    def test_eval_mode_is_identity(self):
        drop = Dropout(0.5)
        x = np.random.default_rng(0).normal(size=(4, 6))
        np.testing.assert_array_equal(drop.forward(x, train=False), x)

    def test_train_mode_needs_rng(self):
        with pytest.raises(ContractError):
            Dropout(0.5).forward(np.zeros((2, 2)), train=True)

    def test_inverted_scaling_preserves_expectation(self):
        # mean over 10^4 masks approaches the input within 2% per entry
        drop = Dropout(0.5)
        rng = np.random.default_rng(123)
        x = np.array([1.0, -2.0, 3.5, 0.7, -1.2])
        acc = np.zeros_like(x)
        n = 10_000
        for _ in range(n):
            acc += drop.forward(x, train=True, rng=rng)
        np.testing.assert_allclose(acc / n, x, rtol=0.02)


class TestLSTM:
    def test_zero_weights_give_zero_hidden(self):
        # gates sigmoid(0)=0.5, candidate tanh(0)=0, so c and h stay 0
        lstm = LSTM(3, 4)
        for key in lstm.params:
            lstm.params[key] = np.zeros_like(lstm.params[key])
        out = lstm.forward(np.ones((3, 5)))
        np.testing.assert_array_equal(out, np.zeros(4))

    def test_single_step_matches_scalar_reference(self):
        lstm = LSTM(2, 2, rng=np.random.default_rng(8))
        x = np.array([[0.3], [-1.2]])
        out = lstm.forward(x)

        def sigmoid(v):
            return 1.0 / (1.0 + np.exp(-v))

        gates = x[:, 0] @ lstm.params["wx"] + lstm.params["b"]
        i, f, g, o = gates[0:2], gates[2:4], gates[4:6], gates[6:8]
        c = sigmoid(i) * np.tanh(g)
        expected = sigmoid(o) * np.tanh(c)
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_forget_gate_bias_initialized_to_one(self):
        lstm = LSTM(3, 5)
        b = lstm.params["b"]
        np.testing.assert_array_equal(b[5:10], np.ones(5))
        np.testing.assert_array_equal(b[:5], np.zeros(5))
        np.testing.assert_array_equal(b[10:], np.zeros(10))

    def test_empty_sequence_rejected(self):
        lstm = LSTM(3, 4)
        with pytest.raises(ContractError):
            lstm.forward(np.zeros((3, 0)))


class TestDense:
    def test_hand_computed_gradients(self):
        dense = Dense(2, 2)
        dense.params["w"] = np.array([[1.0, 2.0], [3.0, 4.0]])
        dense.params["b"] = np.array([0.5, -0.5])
        x = np.array([2.0, -1.0])
        out = dense.forward(x)
        np.testing.assert_array_equal(out, [2 - 3 + 0.5, 4 - 4 - 0.5])
        dout = np.array([1.0, -2.0])
        dx = dense.backward(dout)
        np.testing.assert_array_equal(dense.grads["w"], np.outer(x, dout))
        np.testing.assert_array_equal(dense.grads["b"], dout)
        np.testing.assert_array_equal(dx, dout @ dense.params["w"].T)

    def test_backward_restores_2d_input_shape(self):
        dense = Dense(6, 2, rng=np.random.default_rng(0))
        x = np.arange(6.0).reshape(2, 3)
        dense.forward(x)
        dx = dense.backward(np.array([1.0, -1.0]))
        assert dx.shape == (2, 3)


class TestSoftmaxCrossEntropy:
    def test_uniform_scores_give_log4(self):
        loss, _ = softmax_cross_entropy(np.zeros(4), 0)
        assert loss == pytest.approx(np.log(4.0), rel=1e-12)

    def test_saturated_case(self):
        loss, _ = softmax_cross_entropy(np.array([100.0, 0.0, 0.0, 0.0]), 0)
        assert loss < 1e-6

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            scores = rng.normal(size=4) * 3
            weights = rng.uniform(0.5, 2.0, size=4)
            target = int(rng.integers(4))
            loss, dscores = softmax_cross_entropy(scores, target, weights)

            exp = [np.exp(s) for s in scores]
            z = sum(exp)
            probs = [e / z for e in exp]
            ref_loss = -weights[target] * np.log(probs[target])
            ref_grad = [
                weights[target] * (probs[j] - (1.0 if j == target else 0.0))
                for j in range(4)
            ]
            assert abs(loss - ref_loss) < 1e-12
            np.testing.assert_allclose(dscores, ref_grad, atol=1e-12)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            p = softmax(rng.normal(size=4) * 10)
            assert np.all(p > 0) and np.all(p < 1)
            assert abs(p.sum() - 1.0) < 1e-12

    def test_target_out_of_range(self):
        with pytest.raises(ContractError):
            softmax_cross_entropy(np.zeros(4), 4)


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        params = {"w": np.array([1.0, -2.0])}
        grads = {"w": np.zeros(2)}
        opt = Adam()
        opt.step(params, grads)
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])
        assert opt.t == 1

    def test_first_step_closed_form(self):
        # g=1: m_hat = v_hat = 1, so the update is -lr / (1 + eps)
        params = {"w": np.array([0.0])}
        opt = Adam(lr=1e-3)
        opt.step(params, {"w": np.array([1.0])})
        expected = -1e-3 / (1.0 + 1e-8)
        assert params["w"][0] == pytest.approx(expected, rel=1e-12)

    def test_descends_quadratic(self):
        params = {"theta": np.array([1.0])}
        opt = Adam(lr=1e-3)
        previous = abs(params["theta"][0])
        for _ in range(10):
            grads = {"theta": 2.0 * params["theta"]}
            opt.step(params, grads)
            current = abs(params["theta"][0])
            assert current < previous
            previous = current

    def test_shape_mismatch_rejected(self):
        opt = Adam()
        with pytest.raises(ContractError):
            opt.step({"w": np.zeros(3)}, {"w": np.zeros(2)})


def toy_network(seed, input_len=12):
    rng = np.random.default_rng(seed)
    return Network(
        [
            Conv1D(3, 4, kernel=3, stride=1, rng=rng),
            ReLU(),
            LSTM(4, 5, rng=rng),
            Dense(5, 4, rng=rng),
        ]
    )


class TestGradientCheck:
    def test_toy_stack(self):
        rng = np.random.default_rng(0)
        net = toy_network(0)
        x = rng.normal(size=(3, 12))
        assert gradient_check(net, x, target=2) < 1e-4

    def test_linear_model_is_nearly_exact(self):
        # a pure dense layer has no kinks, so central differences agree
        # with the analytic gradient almost to roundoff
        rng = np.random.default_rng(1)
        net = Network([Dense(6, 4, rng=rng)])
        x = rng.normal(size=6)
        assert gradient_check(net, x, target=1) < 1e-7

    def test_detects_perturbed_gradient(self):
        rng = np.random.default_rng(3)
        net = toy_network(3)
        x = rng.normal(size=(3, 12))
        scores = net.forward(x, train=True, rng=np.random.default_rng(0))
        _, dscores = softmax_cross_entropy(scores, 2)
        analytic = {k: v.copy() for k, v in net.backward(dscores).items()}
        # corrupt the largest entry by 1%; the checker must flag >= 0.9%
        key = max(analytic, key=lambda k: np.abs(analytic[k]).max())
        flat = analytic[key].ravel()
        idx = int(np.abs(flat).argmax())
        perturbed = {k: v.copy() for k, v in analytic.items()}
        perturbed[key].ravel()[idx] *= 1.01
        assert max_relative_error(analytic, perturbed) >= 0.009

    def test_includes_pool_and_dropout_layers(self):
        rng = np.random.default_rng(5)
        net = Network(
            [
                Conv1D(3, 4, kernel=3, stride=1, rng=rng),
                ReLU(),
                MaxPool1D(kernel=2, stride=2),
                Dropout(0.3),
                LSTM(4, 4, rng=rng),
                Dense(4, 4, rng=rng),
            ]
        )
        x = rng.normal(size=(3, 14))
        assert gradient_check(net, x, target=0, rng_seed=7) < 1e-4


class TestNetworkDeterminism:
    def test_eval_forward_is_bit_identical(self):
        rng = np.random.default_rng(10)
        net = toy_network(10)
        x = rng.normal(size=(3, 12))
        a = net.forward(x)
        b = net.forward(x)
        np.testing.assert_array_equal(a, b)

    def test_backward_shapes_match_parameters(self):
        rng = np.random.default_rng(11)
        net = toy_network(11)
        x = rng.normal(size=(3, 12))
        scores = net.forward(x, train=True, rng=rng)
        _, dscores = softmax_cross_entropy(scores, 0)
        grads = net.backward(dscores)
        params = net.parameters()
        assert set(grads) == set(params)
        for key in grads:
            assert grads[key].shape == params[key].shape


class TestCheckpoint:
    def test_round_trip_restores_forward(self, tmp_path):
        rng = np.random.default_rng(12)
        net = toy_network(12)
        x = rng.normal(size=(3, 12))
        expected = net.forward(x)
        path = tmp_path / "model.knm"
        save_checkpoint(path, net, seed=12, extra={"input_len": 12})
        ckpt = load_checkpoint(path)
        np.testing.assert_array_equal(ckpt.net.forward(x), expected)
        assert ckpt.seed == 12
        assert ckpt.extra == {"input_len": 12}
        assert path.read_bytes()[:4] == b"KNM1"

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "bogus.knm"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        from kinemotion.errors import InvalidDataError

        with pytest.raises(InvalidDataError):
            load_checkpoint(path)
