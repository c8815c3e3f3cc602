import numpy as np
import pytest

from antiphon.errors import ShapeMismatchError
from antiphon.mixture import mixture_nll
from antiphon.network import (
    SIZE_PRESETS,
    LayerWeights,
    ModelConfig,
    RecurrentState,
    forward_sequence,
    forward_step,
    init_weights,
    lstm_step,
    param_count,
    reset_state,
)


def small_cfg(**kw):
    base = dict(dimension=3, units=8, layers=2, mixtures=3, seq_len=4)
    base.update(kw)
    return ModelConfig(**base)


def random_inputs(cfg, batch, steps, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    x = np.empty((batch, steps, cfg.dimension), dtype=dtype)
    x[:, :, 0] = rng.uniform(0.01, 0.5, size=(batch, steps))
    x[:, :, 1:] = rng.uniform(0, 1, size=(batch, steps, cfg.dimension - 1))
    return x


class TestParamCount:
    def test_hand_arithmetic_tiny(self):
        cfg = ModelConfig(dimension=2, units=2, layers=1, mixtures=1)
        assert param_count(cfg) == 55

    def test_preset_s(self):
        cfg = ModelConfig.from_preset("s", dimension=3, mixtures=5, layers=2)
        assert param_count(cfg) == 52_707

    def test_preset_xl(self):
        cfg = ModelConfig.from_preset("xl", dimension=3, mixtures=5, layers=2)
        assert param_count(cfg) == 3_173_923

    @pytest.mark.parametrize("size", sorted(SIZE_PRESETS))
    @pytest.mark.parametrize("dim", range(2, 10))
    def test_matches_allocated_scalars(self, size, dim):
        cfg = ModelConfig.from_preset(size, dimension=dim)
        weights = init_weights(cfg, np.random.default_rng(0))
        assert weights.scalar_count() == param_count(cfg)


class TestLstmStep:
    def test_zero_weights_give_zero_output(self):
        u = 4
        layer = LayerWeights(
            kernel=np.zeros((3, 4 * u), dtype=np.float32),
            recurrent=np.zeros((u, 4 * u), dtype=np.float32),
            bias=np.zeros(4 * u, dtype=np.float32),
        )
        h, c = lstm_step(np.ones(3, dtype=np.float32), np.zeros(u), np.zeros(u), layer)
        assert np.allclose(h, 0.0)

    def test_state_evolves_on_repeated_input(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(1))
        state = RecurrentState(cfg)
        x = random_inputs(cfg, 1, 1)[0, 0]
        p1 = forward_step(x, state, weights, cfg)
        p2 = forward_step(x, state, weights, cfg)
        assert not np.allclose(p1.mu, p2.mu)

    def test_reset_restores_determinism(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(2))
        state = RecurrentState(cfg)
        xs = random_inputs(cfg, 1, 5)[0]
        first = [forward_step(x, state, weights, cfg).mu.copy() for x in xs]
        reset_state(state)
        second = [forward_step(x, state, weights, cfg).mu.copy() for x in xs]
        for a, b in zip(first, second):
            assert np.array_equal(a, b)

    def test_reset_is_idempotent_and_zeroes(self):
        cfg = small_cfg()
        state = RecurrentState(cfg)
        state.h[0][:] = 1.0
        reset_state(state)
        reset_state(state)
        assert all(np.linalg.norm(v) == 0.0 for v in state.h + state.c)

    def test_shape_mismatch_raises(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(3))
        state = RecurrentState(cfg)
        with pytest.raises(ShapeMismatchError):
            forward_step(np.zeros(cfg.dimension + 1, dtype=np.float32), state, weights, cfg)


class TestForwardStep:
    def test_head_shape_for_any_config(self):
        cfg = ModelConfig(dimension=3, units=6, layers=2, mixtures=5)
        weights = init_weights(cfg, np.random.default_rng(4))
        params = forward_step(
            random_inputs(cfg, 1, 1)[0, 0], RecurrentState(cfg), weights, cfg
        )
        assert params.pi.shape == (5,)
        assert params.mu.shape == (5, 3)
        assert params.sigma.shape == (5, 3)

    def test_inference_bitwise_deterministic(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(5))
        x = random_inputs(cfg, 1, 1)[0, 0]
        outs = []
        for _ in range(2):
            state = RecurrentState(cfg)
            p = forward_step(x, state, weights, cfg)
            outs.append((p.pi.tobytes(), p.mu.tobytes(), p.sigma.tobytes()))
        assert outs[0] == outs[1]


class TestForwardSequence:
    def test_seq_len_one_reduces_to_step_plus_nll(self):
        cfg = small_cfg(seq_len=1)
        weights = init_weights(cfg, np.random.default_rng(6), dtype=np.float64)
        inputs = random_inputs(cfg, 1, 1, dtype=np.float64)
        targets = random_inputs(cfg, 1, 1, seed=9, dtype=np.float64)
        loss, _ = forward_sequence(inputs, targets, weights, cfg)

        state = RecurrentState(cfg, dtype=np.float64)
        params = forward_step(inputs[0, 0], state, weights, cfg)
        assert loss == pytest.approx(mixture_nll(params, targets[0, 0]), abs=1e-12)

    def test_loss_finite_on_random_data(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(7))
        inputs = random_inputs(cfg, 4, cfg.seq_len)
        targets = random_inputs(cfg, 4, cfg.seq_len, seed=8)
        loss, _ = forward_sequence(inputs, targets, weights, cfg)
        assert np.isfinite(loss)

    def test_duplicating_batch_preserves_mean_loss(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(8), dtype=np.float64)
        inputs = random_inputs(cfg, 3, cfg.seq_len, dtype=np.float64)
        targets = random_inputs(cfg, 3, cfg.seq_len, seed=10, dtype=np.float64)
        base, _ = forward_sequence(inputs, targets, weights, cfg)
        doubled, _ = forward_sequence(
            np.concatenate([inputs, inputs]), np.concatenate([targets, targets]), weights, cfg
        )
        assert doubled == pytest.approx(base, abs=1e-9)

    def test_statefulness_changes_consecutive_params(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(12))
        state = RecurrentState(cfg)
        x = random_inputs(cfg, 1, 1, seed=13)[0, 0]
        p1 = forward_step(x, state, weights, cfg)
        p2 = forward_step(x, state, weights, cfg)
        assert not np.array_equal(p1.sigma, p2.sigma)

    def test_shape_errors(self):
        cfg = small_cfg()
        weights = init_weights(cfg, np.random.default_rng(14))
        good = random_inputs(cfg, 2, cfg.seq_len)
        with pytest.raises(ShapeMismatchError):
            forward_sequence(good[:, :, :-1], good[:, :, :-1], weights, cfg)
        with pytest.raises(ShapeMismatchError):
            forward_sequence(good, good[:1], weights, cfg)


class TestConfig:
    def test_presets(self):
        assert {k: ModelConfig.from_preset(k, 3).units for k in SIZE_PRESETS} == {
            "s": 64,
            "m": 128,
            "l": 256,
            "xl": 512,
        }

    def test_dimension_floor(self):
        with pytest.raises(ValueError):
            ModelConfig(dimension=1)

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="preset"):
            ModelConfig.from_preset("xxl", 3)

    def test_round_trip_dict(self):
        cfg = small_cfg()
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg
