import numpy as np
import pytest

from eegemotion.core import LstmConfig
from eegemotion.errors import FormatError, ShapeError
from eegemotion.neural.checkpoint import load_checkpoint, save_checkpoint
from eegemotion.neural.lstm import (
    LstmLayerParams,
    layer_forward,
    lstm_cell_backward,
    lstm_cell_forward,
    lstm_cell_step,
    sigmoid,
)
from eegemotion.neural.model import (
    LstmModel,
    batchnorm_train,
    dropout_mask,
    forward,
    loss_and_grads,
    mse_grad,
    mse_loss,
)
from eegemotion.neural.optim import RmspropState, rmsprop_step

TINY = LstmConfig(hidden=(8, 4), dropout=(0.3, 0.5, 0.2), head_hidden=5, seq_len=3, batch_size=2)


def rel_err(a, n):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)


class TestCell:
    def test_zero_weights(self):
        p = LstmLayerParams(np.zeros((12, 2)), np.zeros((12, 3)), np.zeros(12))
        h, c = lstm_cell_forward(p, np.array([1.0, -2.0]), np.ones(3), np.zeros(3))
        assert np.all(h == 0) and np.all(c == 0)
        assert sigmoid(0.0) == 0.5

    def test_sigmoid_extremes(self):
        s = sigmoid(np.array([-800.0, 800.0]))
        assert np.all(np.isfinite(s)) and s[0] == 0.0 and s[1] == 1.0

    def test_gate_layout(self, rng):
        p = LstmLayerParams.init(2, 3, rng)
        x, h0, c0 = rng.normal(size=2), rng.normal(size=3), rng.normal(size=3)
        z = p.W @ x + p.U @ h0 + p.b
        i, f, o = sigmoid(z[:3]), sigmoid(z[3:6]), sigmoid(z[6:9])
        g = np.tanh(z[9:])
        c = f * c0 + i * g
        h, c_got = lstm_cell_forward(p, x, h0, c0)
        np.testing.assert_allclose(c_got, c, atol=1e-15)
        np.testing.assert_allclose(h, o * np.tanh(c), atol=1e-15)

    def test_shape_error(self, rng):
        p = LstmLayerParams.init(2, 3, rng)
        with pytest.raises(ShapeError):
            lstm_cell_forward(p, np.zeros(4), np.zeros(3), np.zeros(3))

    def test_cell_finite_differences(self, rng):
        p = LstmLayerParams.init(3, 4, rng)
        x, h0, c0 = rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
        wh, wc = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))

        def loss(W=p.W, x=x, h0=h0, c0=c0):
            h, c = lstm_cell_forward(LstmLayerParams(W, p.U, p.b), x, h0, c0)
            return np.sum(h * wh) + np.sum(c * wc)

        _, c_t, cache = lstm_cell_step(p, x, h0, c0)
        dx, dh0, dc0, (dW, _, _) = lstm_cell_backward(p, cache, wh, wc)
        for name, arr, analytic in (("W", p.W, dW), ("x", x, dx), ("h0", h0, dh0), ("c0", c0, dc0)):
            num = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                up, down = arr.copy(), arr.copy()
                up[idx] += 1e-5
                down[idx] -= 1e-5
                num[idx] = (loss(**{name: up}) - loss(**{name: down})) / 2e-5
            assert rel_err(analytic, num).max() < 1e-4, name


def test_full_model_gradients(rng):
    model = LstmModel.init(TINY, 3, seed=4)
    X = rng.normal(size=(3, 2, 3))
    Y = rng.integers(0, 2, (2, 2)).astype(float)

    def loss_only():
        return loss_and_grads(model, X, Y, np.random.default_rng(99), update_stats=False)[0]

    _, grads, _ = loss_and_grads(model, X, Y, np.random.default_rng(99), update_stats=False)
    assert set(grads) == set(model.params)
    worst = 0.0
    for name, arr in model.params.items():
        for idx in np.ndindex(arr.shape):
            keep = arr[idx]
            arr[idx] = keep + 1e-5
            up = loss_only()
            arr[idx] = keep - 1e-5
            down = loss_only()
            arr[idx] = keep
            worst = max(worst, rel_err(grads[name][idx], (up - down) / 2e-5))
    assert worst < 1e-4


class TestLoss:
    def test_values(self):
        assert mse_loss([1.0, 2.0], [0.0, 0.0]) == 2.5
        assert mse_loss([0.3, 0.7], [0.3, 0.7]) == 0

    def test_grad_finite_differences(self, rng):
        p, t = rng.random(6), rng.random(6)
        g = mse_grad(p, t)
        for i in range(6):
            e = np.zeros(6)
            e[i] = 1e-6
            num = (mse_loss(p + e, t) - mse_loss(p - e, t)) / 2e-6
            assert abs(g[i] - num) < 1e-6

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            mse_loss([1.0], [1.0, 2.0])


class TestRmsprop:
    def test_first_step(self):
        params = {"w": np.array([0.0])}
        rmsprop_step(RmspropState(), params, {"w": np.array([1.0])})
        assert params["w"][0] == pytest.approx(-0.001 / (np.sqrt(0.1) + 1e-8), rel=1e-12)
        assert params["w"][0] == pytest.approx(-0.0031623, abs=1e-7)

    def test_zero_gradient(self):
        params = {"w": np.array([1.5, -2.0])}
        rmsprop_step(RmspropState(), params, {"w": np.zeros(2)})
        np.testing.assert_array_equal(params["w"], [1.5, -2.0])

    def test_quadratic(self):
        # each step moves about lr once the average settles, so lr=1e-3
        # cannot cover a distance of 3 in 500 steps; 1e-2 can
        state = RmspropState(lr=0.01)
        params = {"p": np.array([0.0])}
        for _ in range(500):
            rmsprop_step(state, params, {"p": 2 * (params["p"] - 3)})
        assert abs(params["p"][0] - 3) < 0.1

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            rmsprop_step(RmspropState(), {"w": np.zeros(2)}, {"w": np.zeros(3)})


def test_dropout_expectation():
    rng = np.random.default_rng(5)
    x = np.linspace(0.5, 2.0, 8)
    total = np.zeros_like(x)
    for _ in range(10):
        masks = dropout_mask(rng, (10_000, 8), 0.3)
        total += (masks * x).sum(axis=0)
    np.testing.assert_allclose(total / 100_000, x, rtol=0.02)
    assert dropout_mask(rng, (3,), 0.0) is None


def test_batchnorm_moments(rng):
    x = rng.normal(4, 3, (64, 6))
    y, _, mean, var = batchnorm_train(x, np.ones(6), np.zeros(6), 1e-5)
    np.testing.assert_allclose(y.mean(axis=0), 0, atol=1e-6)
    np.testing.assert_allclose(y.var(axis=0), 1, atol=1e-4)
    np.testing.assert_allclose(var, x.var(axis=0))


class TestForward:
    def test_eval_range(self, rng):
        model = LstmModel.init(TINY, 3)
        out = forward(model, rng.normal(0, 100, (3, 16, 3)), "eval")
        assert out.shape == (16, 2)
        assert np.all((out > 0) & (out < 1))

    def test_no_dropout_train_equals_eval(self, rng):
        cfg = LstmConfig(hidden=(8, 4), dropout=(0.0, 0.0, 0.0), head_hidden=5)
        model = LstmModel.init(cfg, 3)
        X = rng.normal(size=(3, 6, 3))
        train_out = forward(model, X, "train", np.random.default_rng(0), update_stats=False)
        # eval with running statistics equal to this batch's statistics
        h = X
        for k in range(2):
            H, _ = layer_forward(model.layer(k), h)
            out = H[-1] if k == 1 else H
            flat = out.reshape(-1, out.shape[-1])
            model.buffers[f"bn{k}.running_mean"] = flat.mean(axis=0)
            model.buffers[f"bn{k}.running_var"] = flat.var(axis=0)
            h = ((out - flat.mean(axis=0)) / np.sqrt(flat.var(axis=0) + 1e-5))
        np.testing.assert_allclose(forward(model, X, "eval"), train_out, atol=1e-12)

    def test_seeded_train_pass_is_repeatable(self, rng):
        model = LstmModel.init(TINY, 3)
        X = rng.normal(size=(3, 4, 3))
        a = forward(model, X, "train", np.random.default_rng(8), update_stats=False)
        b = forward(model, X, "train", np.random.default_rng(8), update_stats=False)
        np.testing.assert_array_equal(a, b)

    def test_init_is_seeded(self):
        a, b = LstmModel.init(TINY, 3, seed=1), LstmModel.init(TINY, 3, seed=1)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


class TestCheckpoint:
    def test_lossless(self, tmp_path, rng):
        model = LstmModel.init(TINY, 3, seed=2)
        opt = RmspropState()
        X, Y = rng.normal(size=(3, 4, 3)), rng.random((4, 2))
        for _ in range(3):
            _, grads, _ = loss_and_grads(model, X, Y, rng)
            rmsprop_step(opt, model.params, grads)
        path = save_checkpoint(tmp_path / "m.lstm", model, opt, {"epoch": 3},
                               {"scaler.mean": np.arange(3.0)})
        m2, o2, meta, extra = load_checkpoint(path)
        assert meta["epoch"] == 3 and m2.config == model.config
        for k in model.params:
            assert m2.params[k].tobytes() == model.params[k].tobytes()
        for k in model.buffers:
            assert m2.buffers[k].tobytes() == model.buffers[k].tobytes()
        for k in opt.avg:
            assert o2.avg[k].tobytes() == opt.avg[k].tobytes()
        assert (o2.lr, o2.rho, o2.eps, o2.steps) == (opt.lr, opt.rho, opt.eps, 3)
        np.testing.assert_array_equal(extra["scaler.mean"], np.arange(3.0))
        Q = rng.normal(size=(3, 5, 3))
        assert forward(m2, Q, "eval").tobytes() == forward(model, Q, "eval").tobytes()

    def test_corrupt_files(self, tmp_path):
        model = LstmModel.init(TINY, 3)
        path = save_checkpoint(tmp_path / "m.lstm", model, RmspropState())
        raw = path.read_bytes()
        (tmp_path / "bad.lstm").write_bytes(b"NOPE" + raw[4:])
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "bad.lstm")
        (tmp_path / "short.lstm").write_bytes(raw[:-7])
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "short.lstm")
        (tmp_path / "long.lstm").write_bytes(raw + b"\0")
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "long.lstm")
