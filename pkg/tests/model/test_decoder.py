import attr
import numpy as np
import pytest

from equity_tune.model.config import EOS, FIRST_CONTENT_TOKEN
from equity_tune.model.decoder import (
    adapted_matmul,
    forward_batch,
    forward_decode,
    frozen_checksum,
    generate,
    generate_batch,
    greedy_token,
    init_state,
    lm_loss,
    pool_hidden,
    pooled_states,
    project_features,
)
from equity_tune.numerics import Tensor
from equity_tune.util.exceptions import DataError, ShapeError


def _with_frozen(state, **arrays):
    frozen = dict(state.frozen)
    frozen.update({name.replace("__", "."): Tensor(a) for name, a in arrays.items()})
    return attr.evolve(state, frozen=frozen)


def _constant_logits(state, preferred):
    """Final norm outputs ones everywhere, so logits are the row sums of the head."""
    config = state.config
    head = np.zeros((config.vocab_size, config.d_model))
    for rank, token in enumerate(preferred):
        head[token] = (len(preferred) - rank) / config.d_model
    return _with_frozen(
        state,
        final__ln__g=np.zeros(config.d_model),
        final__ln__b=np.ones(config.d_model),
        head=head,
    )


class TestProjector:
    def test_zero_map(self):
        projector = {
            "projector.W": Tensor(np.zeros((16, 4))),
            "projector.b": Tensor(np.zeros(16)),
        }
        out = project_features(projector, Tensor(np.ones(4)), 2)
        assert out.shape == (2, 8)
        assert np.all(out.data == 0)

    def test_identity_map(self):
        projector = {
            "projector.W": Tensor(np.eye(16)),
            "projector.b": Tensor(np.zeros(16)),
        }
        features = np.zeros(16)
        features[0] = 1.0
        out = project_features(projector, Tensor(features), 2)
        assert np.array_equal(out.data[0], features[:8])
        assert np.all(out.data[1] == 0)

    def test_matches_dense_product(self):
        rng = np.random.default_rng(0)
        w, b, f = rng.normal(size=(12, 5)), rng.normal(size=12), rng.normal(size=5)
        out = project_features(
            {"projector.W": Tensor(w), "projector.b": Tensor(b)}, Tensor(f), 3
        )
        assert np.allclose(out.data, (w @ f + b).reshape(3, 4), atol=1e-12)

    def test_wrong_length(self):
        projector = {
            "projector.W": Tensor(np.zeros((8, 4))),
            "projector.b": Tensor(np.zeros(8)),
        }
        with pytest.raises(ShapeError):
            project_features(projector, Tensor(np.ones(3)), 2)


class TestAdaptedMatmul:
    def test_zero_adapter_is_frozen_path(self):
        rng = np.random.default_rng(1)
        w, a, x = rng.normal(size=(4, 4)), rng.normal(size=(2, 4)), rng.normal(size=4)
        out = adapted_matmul(Tensor(w), Tensor(a), Tensor(np.zeros((4, 2))), Tensor(x))
        assert np.array_equal(out.data, (Tensor(x).data @ w.T))

    def test_identity_adapter(self):
        x = np.array([1.0, -2.0, 3.0])
        out = adapted_matmul(
            Tensor(np.zeros((3, 3))), Tensor(np.eye(3)), Tensor(np.eye(3)), Tensor(x)
        )
        assert np.allclose(out.data, x, atol=0)

    def test_matches_dense_recomposition(self):
        rng = np.random.default_rng(2)
        w = rng.normal(size=(4, 4))
        a = rng.normal(size=(2, 4))
        b = rng.normal(size=(4, 2))
        x = rng.normal(size=4)
        out = adapted_matmul(Tensor(w), Tensor(a), Tensor(b), Tensor(x), lora_scale=1.0)
        assert np.allclose(out.data, (w + b @ a) @ x, atol=1e-12)


class TestForward:
    def test_init_adapters_start_at_zero(self, model_config):
        state = init_state(model_config, seed=0)
        for name, tensor in state.adapters.items():
            if name.endswith(".B"):
                assert np.all(tensor.data == 0)

    def test_backbone_depends_only_on_backbone_seed(self, model_config):
        assert frozen_checksum(init_state(model_config, seed=0)) == frozen_checksum(
            init_state(model_config, seed=7)
        )
        other = attr.evolve(model_config, backbone_seed=1)
        assert frozen_checksum(init_state(model_config)) != frozen_checksum(
            init_state(other)
        )

    def test_empty_prefix_gives_one_position(self, model_config):
        state = init_state(model_config)
        logits, hidden = forward_decode(state, np.ones(16), [])
        assert logits.shape == (1, model_config.vocab_size)
        assert sorted(hidden) == [1, 2]

    def test_identical_samples_identical_logits(self, model_config):
        state = init_state(model_config)
        features = np.tile(np.linspace(-1, 1, 16), (2, 1))
        output = forward_batch(state, features, [[7, 8], [7, 8]])
        assert np.array_equal(output.logits.data[0], output.logits.data[1])

    def test_adapter_a_is_irrelevant_while_b_is_zero(self, model_config):
        state = init_state(model_config, seed=0)
        rng = np.random.default_rng(5)
        shuffled = state.with_trainable(
            {
                name: Tensor(rng.normal(size=t.shape))
                for name, t in state.adapters.items()
                if name.endswith(".A")
            }
        )
        features = rng.normal(size=(2, 16))
        first = forward_batch(state, features, [[7], [9, 10]])
        second = forward_batch(shuffled, features, [[7], [9, 10]])
        assert np.array_equal(first.logits.data, second.logits.data)

    def test_sequence_too_long(self, model_config):
        state = init_state(model_config)
        with pytest.raises(DataError):
            forward_batch(state, np.ones((1, 16)), [[7] * 20])

    def test_token_out_of_vocab(self, model_config):
        state = init_state(model_config)
        with pytest.raises(DataError):
            forward_batch(state, np.ones((1, 16)), [[model_config.vocab_size]])


class TestLmLoss:
    def test_uniform_logits(self, model_config):
        state = _with_frozen(
            init_state(model_config),
            head=np.zeros((model_config.vocab_size, model_config.d_model)),
        )
        references = [[7, 8, EOS], [9, EOS]]
        loss, per_sample = lm_loss(state, np.ones((2, 16)), references)
        expected = 5 * np.log(model_config.vocab_size)
        assert loss.item() == pytest.approx(expected, abs=1e-9)
        assert np.allclose(per_sample, np.log(model_config.vocab_size))

    def test_matches_explicit_token_sum(self, model_config):
        state = init_state(model_config, seed=2)
        rng = np.random.default_rng(3)
        features = rng.normal(size=(2, 16))
        references = [[7, 12, EOS], [20, EOS]]
        loss, per_sample = lm_loss(state, features, references)

        expected = []
        for i, reference in enumerate(references):
            output = forward_batch(state, features[i : i + 1], [reference[:-1]])
            logits = output.logits.data[0, output.target_start :]
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            expected.append(
                -sum(log_probs[t, token] for t, token in enumerate(reference))
            )
        assert loss.item() == pytest.approx(sum(expected), rel=1e-10)
        assert per_sample == pytest.approx(
            [e / len(r) for e, r in zip(expected, references)], rel=1e-10
        )

    def test_multipliers_scale_samples(self, model_config):
        state = init_state(model_config, seed=2)
        features = np.ones((2, 16))
        references = [[7, EOS], [8, EOS]]
        plain, per_sample = lm_loss(state, features, references)
        weighted, _ = lm_loss(state, features, references, multipliers=[2.0, 0.0])
        assert weighted.item() == pytest.approx(2 * per_sample[0] * 2, rel=1e-12)
        assert plain.item() == pytest.approx(2 * per_sample.sum(), rel=1e-12)

    def test_empty_batch(self, model_config):
        with pytest.raises(DataError):
            lm_loss(init_state(model_config), np.zeros((0, 16)), [])

    def test_empty_reference(self, model_config):
        with pytest.raises(DataError):
            lm_loss(init_state(model_config), np.ones((1, 16)), [[]])


class TestPooling:
    def test_single_layer_is_position_mean(self):
        rng = np.random.default_rng(0)
        states = rng.normal(size=(2, 3, 4))
        mask = np.array([[True, True, False], [True, True, True]])
        pooled = pool_hidden({1: Tensor(states)}, mask)
        assert np.allclose(pooled.data[0], states[0, :2].mean(axis=0), atol=1e-12)
        assert np.allclose(pooled.data[1], states[1].mean(axis=0), atol=1e-12)

    def test_opposite_layers_cancel(self):
        v = np.random.default_rng(1).normal(size=(1, 2, 3))
        pooled = pool_hidden({1: Tensor(v), 2: Tensor(-v)}, np.ones((1, 2), dtype=bool))
        assert np.allclose(pooled.data, 0.0, atol=1e-15)

    def test_layer_order_does_not_matter(self):
        rng = np.random.default_rng(2)
        hidden = {layer: Tensor(rng.normal(size=(2, 3, 4))) for layer in (1, 2, 4)}
        mask = np.ones((2, 3), dtype=bool)
        first = pool_hidden(hidden, mask, layers=[4, 1, 2])
        second = pool_hidden(hidden, mask, layers=[1, 2, 4])
        brute = np.mean(
            [hidden[layer].data.mean(axis=1) for layer in (1, 2, 4)], axis=0
        )
        assert np.array_equal(first.data, second.data)
        assert np.allclose(first.data, brute, atol=1e-12)

    def test_last_token_pooling(self):
        states = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
        mask = np.array([[True, True, False], [True, True, True]])
        pooled = pool_hidden({1: Tensor(states)}, mask, token_pooling="last")
        assert np.array_equal(pooled.data[0], states[0, 1])
        assert np.array_equal(pooled.data[1], states[1, 2])

    def test_all_padding_sample(self):
        with pytest.raises(DataError):
            pool_hidden({1: Tensor(np.ones((1, 2, 3)))}, np.zeros((1, 2), dtype=bool))

    def test_missing_layer(self):
        with pytest.raises(KeyError):
            pool_hidden({1: Tensor(np.ones((1, 2, 3)))}, np.ones((1, 2)), layers=[2])

    def test_pooled_states_shape(self, model_config):
        h = pooled_states(init_state(model_config), np.ones((3, 16)))
        assert h.shape == (3, model_config.d_model)


class TestGenerate:
    def test_eos_first_gives_empty_generation(self, model_config):
        state = _constant_logits(init_state(model_config), [EOS])
        assert generate(state, np.ones(16), max_new=5) == []

    def test_hand_simulated_path(self, model_config):
        # position-independent logits: the same token wins every step
        token = FIRST_CONTENT_TOKEN + 3
        state = _constant_logits(init_state(model_config), [token, EOS])
        assert generate(state, np.ones(16), max_new=4) == [token] * 4

    def test_ties_go_to_lowest_id(self):
        assert greedy_token(np.array([0.0, 2.0, 2.0, 1.0])) == 1

    def test_deterministic_and_bounded(self, model_config):
        state = init_state(model_config, seed=4)
        features = np.random.default_rng(0).normal(size=(3, 16))
        first = generate_batch(state, features, max_new=3)
        assert first == generate_batch(state, features, max_new=3)
        assert all(len(tokens) <= 3 for tokens in first)

    def test_max_new_is_capped_to_fit(self, model_config):
        token = FIRST_CONTENT_TOKEN
        state = _constant_logits(init_state(model_config), [token])
        room = model_config.max_seq - model_config.n_feature_tokens - 4 + 1
        assert len(generate(state, np.ones(16), max_new=100)) == room

    def test_invalid_max_new(self, model_config):
        with pytest.raises(ValueError):
            generate(init_state(model_config), np.ones(16), max_new=0)
