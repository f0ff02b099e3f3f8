import math

import numpy as np
import pytest

from stegainr.consensus import init_params
from stegainr.inr import (AdamState, ModelSpec, ParamSet, TrainConfig, TrainingDiverged,
                          adam_step, backward, fit, forward, loss_mse, parse_arch)
from stegainr.media import grid_for, image_tensor
from stegainr.metrics import psnr

from fixtures import gray_crop


def random_params(spec, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return ParamSet(spec, rng.uniform(-scale, scale, spec.n_params) / np.sqrt(max(spec.hidden_widths)))


def reference_forward(spec, params, u):
    """Scalar loops over the layer recurrence, no numpy linear algebra."""
    a = [float(v) for v in u]
    for layer, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = [sum(W[r][c] * a[c] for c in range(len(a))) + b[r] for r in range(len(b))]
        if layer == spec.n_layers - 1:
            return z
        a = [math.sin(spec.omega(layer) * v) for v in z]


def fd_gradient(spec, params, coords, targets, mask=None, h=1e-6):
    g = np.zeros(spec.n_params)
    for i in range(spec.n_params):
        p, m = params.copy(), params.copy()
        p.data[i] += h
        m.data[i] -= h
        g[i] = (loss_mse(forward(spec, p, coords, mask), targets)
                - loss_mse(forward(spec, m, coords, mask), targets)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)


class TestModelSpec:
    def test_counts(self):
        spec = parse_arch("2-256x4-3")
        assert spec.hidden_widths == (256, 256, 256, 256)
        assert spec.n_weights == 2 * 256 + 3 * 256 * 256 + 256 * 3
        assert spec.n_biases == 4 * 256 + 3
        assert parse_arch("2-16,8-1").layer_shapes == [(16, 2), (8, 16), (1, 8)]

    def test_weight_positions_bijective(self):
        spec = parse_arch("3-5,4-2")
        pos = spec.weight_positions()
        assert len(pos) == spec.n_weights == len(set(pos.tolist()))
        p = ParamSet(spec, np.arange(spec.n_params, dtype=float))
        flat = np.concatenate([w.ravel() for w in p.weights])
        assert np.array_equal(p.flat_weights(), flat)

    @pytest.mark.parametrize("bad", [dict(in_dim=0, out_dim=1, hidden_widths=(4,)),
                                     dict(in_dim=1, out_dim=1, hidden_widths=(0,)),
                                     dict(in_dim=1, out_dim=1, hidden_widths=(4,), omega0_first=0)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            ModelSpec(**bad)

    def test_bad_arch_string(self):
        with pytest.raises(ValueError):
            parse_arch("2x256")


class TestForward:
    spec = parse_arch("2-16,16-3")

    def test_zero_params_give_zero_output(self):
        out = forward(self.spec, ParamSet(self.spec), np.random.default_rng(0).uniform(-1, 1, (7, 2)))
        assert np.all(out == 0.0)

    def test_all_ones_mask_is_identity(self):
        p = random_params(self.spec, 1)
        x = grid_for((5, 5), "image")
        ones = np.ones(self.spec.n_weights)
        assert np.array_equal(forward(self.spec, p, x, ones), forward(self.spec, p, x))

    def test_matches_reference(self):
        p = random_params(self.spec, 2)
        got = forward(self.spec, p, [[0.25, -0.5]])[0]
        ref = reference_forward(self.spec, p, (0.25, -0.5))
        assert np.max(np.abs(got - ref)) < 1e-12

    def test_masked_equals_premultiplied(self):
        p = random_params(self.spec, 3)
        mask = np.random.default_rng(3).random(self.spec.n_weights) < 0.4
        pre = p.with_flat_weights(p.flat_weights() * mask)
        x = grid_for((6, 4), "image")
        np.testing.assert_array_equal(forward(self.spec, p, x, mask), forward(self.spec, pre, x))

    def test_deterministic(self):
        p = random_params(self.spec, 4)
        x = grid_for((9, 9), "image")
        assert forward(self.spec, p, x).tobytes() == forward(self.spec, p, x).tobytes()

    def test_shape_errors(self):
        p = random_params(self.spec, 5)
        with pytest.raises(ValueError):
            forward(self.spec, p, np.zeros((3, 3)))
        with pytest.raises(ValueError):
            forward(self.spec, p, np.zeros((3, 2)), np.ones(self.spec.n_weights - 1))


class TestLoss:
    def test_examples(self):
        t = np.array([0.3, -0.2, 0.9])
        assert loss_mse(t, t) == 0.0
        assert loss_mse(t + 0.5, t) == pytest.approx(0.25, abs=1e-15)
        assert loss_mse([0.0, 1.0], [1.0, 0.0]) == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            loss_mse([], [])
        with pytest.raises(ValueError):
            loss_mse([1.0, 2.0], [1.0])


class TestBackward:
    def test_zero_residual_zero_gradient(self):
        spec = parse_arch("2-8,8-3")
        p = random_params(spec, 0)
        x = grid_for((3, 3), "image")
        g = backward(spec, p, x, forward(spec, p, x))
        assert np.all(g.data == 0.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_single_coordinate_matches_finite_differences(self, seed):
        spec = parse_arch("2-12,12-3")
        p = random_params(spec, seed)
        rng = np.random.default_rng(seed)
        x, y = rng.uniform(-1, 1, (1, 2)), rng.uniform(-1, 1, (1, 3))
        g = backward(spec, p, x, y)
        assert rel_err(g.data, fd_gradient(spec, p, x, y)) < 1e-5

    def test_masked_gradient(self):
        spec = parse_arch("1-10,10-2", omega0_first=5.0)
        p = random_params(spec, 7)
        rng = np.random.default_rng(7)
        mask = rng.random(spec.n_weights) < 0.5
        mask[3] = False
        x, y = rng.uniform(-1, 1, (6, 1)), rng.uniform(-1, 1, (6, 2))
        g = backward(spec, p, x, y, mask)
        gw = g.flat_weights()
        assert gw[3] == 0.0
        assert np.all(gw[~mask] == 0.0)
        assert rel_err(g.data, fd_gradient(spec, p, x, y, mask)) < 1e-5

    def test_target_shape_error(self):
        spec = parse_arch("2-4-3")
        with pytest.raises(ValueError):
            backward(spec, ParamSet(spec), np.zeros((2, 2)), np.zeros((2, 2)))


class TestAdam:
    spec = parse_arch("1-1-1")  # 4 parameters: w0, b0, w1, b1

    def test_zero_gradients_leave_params(self):
        p = random_params(self.spec, 0)
        before = p.data.copy()
        adam_step(p, ParamSet(self.spec), AdamState.zeros(4), TrainConfig())
        assert np.array_equal(p.data, before)

    def test_empty_trainable_mask_is_bit_identical(self):
        p = random_params(self.spec, 1)
        before = p.data.tobytes()
        g = ParamSet(self.spec, np.ones(4))
        state = AdamState.zeros(4)
        adam_step(p, g, state, TrainConfig(), np.zeros(4, dtype=bool))
        assert p.data.tobytes() == before
        assert np.all(state.m == 0) and np.all(state.v == 0)

    def test_scalar_oracle(self):
        # m1 = 0.1, v1 = 0.001, bias-corrected both to 1: step = lr / (1 + eps).
        # Step two with g = 1 again: m2 = 0.19, v2 = 0.001999, corrected to 1 again.
        lr = 1e-4
        p = ParamSet(self.spec, np.array([0.5, 0.0, 0.0, 0.0]))
        g = ParamSet(self.spec, np.array([1.0, 0.0, 0.0, 0.0]))
        state = AdamState.zeros(4)
        cfg = TrainConfig(learning_rate=lr)
        adam_step(p, g, state, cfg, np.array([True, False, False, False]))
        assert p.data[0] == pytest.approx(0.5 - 0.000099999999, abs=1e-15)
        assert state.m[0] == pytest.approx(0.1) and state.v[0] == pytest.approx(0.001)
        adam_step(p, g, state, cfg, np.array([True, False, False, False]))
        assert p.data[0] == pytest.approx(0.5 - 2 * 0.000099999999, abs=1e-15)

    def test_frozen_moments_untouched(self):
        p = random_params(self.spec, 2)
        state = AdamState(np.full(4, 0.25), np.full(4, 0.5))
        train = np.array([True, False, True, False])
        adam_step(p, ParamSet(self.spec, np.ones(4)), state, TrainConfig(), train)
        assert np.all(state.m[~train] == 0.25) and np.all(state.v[~train] == 0.5)
        assert np.all(state.m[train] != 0.25)

    def test_non_finite_gradient_aborts(self):
        p = random_params(self.spec, 3)
        with pytest.raises(FloatingPointError, match="parameter 2"):
            adam_step(p, ParamSet(self.spec, np.array([0, 0, np.nan, 0.0])),
                      AdamState.zeros(4), TrainConfig())


def constant_image(size=16, level=0.4):
    coords = grid_for((size, size), "image")
    return coords, np.full((len(coords), 1), level)


class TestFit:
    spec = parse_arch("2-32,32-1")

    def test_zero_steps_returns_input(self):
        p = init_params(self.spec, 1)
        x, y = constant_image()
        res = fit(self.spec, p, x, y, TrainConfig(steps=0))
        assert res.params == p
        assert res.losses == []

    def test_constant_image_fits(self):
        spec = parse_arch("2-256x4-1")
        x, y = constant_image()
        res = fit(spec, init_params(spec, 1), x, y, TrainConfig(steps=200))
        assert res.final_loss < 1e-4
        assert res.losses[-1] < res.losses[0]

    def test_frozen_positions_bit_identical(self):
        p = init_params(self.spec, 2)
        train = np.random.default_rng(2).random(self.spec.n_params) < 0.5
        x, y = constant_image()
        res = fit(self.spec, p, x, y, TrainConfig(steps=50), trainable_mask=train)
        assert res.params.data[~train].tobytes() == p.data[~train].tobytes()
        assert not np.array_equal(res.params.data[train], p.data[train])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_step(self):
        x, y = constant_image()
        y[0, 0] = np.inf
        with pytest.raises(TrainingDiverged) as err:
            fit(self.spec, init_params(self.spec, 3), x, y, TrainConfig(steps=5))
        assert err.value.step == 0

    def test_minibatches_are_seeded(self):
        x, y = constant_image(20)
        cfg = TrainConfig(steps=20, batch=64, sampler_seed=9)
        a = fit(self.spec, init_params(self.spec, 4), x, y, cfg)
        b = fit(self.spec, init_params(self.spec, 4), x, y, cfg)
        c = fit(self.spec, init_params(self.spec, 4), x, y, TrainConfig(steps=20, batch=64, sampler_seed=10))
        assert a.params == b.params
        assert a.params != c.params


@pytest.mark.slow
def test_gray_32_reaches_30db():
    img = image_tensor(gray_crop(32))
    spec = parse_arch("2-256x4-1")
    res = fit(spec, init_params(spec, 11), img.coords, img.values, TrainConfig(steps=2000))
    out = img.with_values(forward(spec, res.params, img.coords))
    assert psnr(img, out) > 30.0
