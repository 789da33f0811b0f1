import attr
import numpy as np
import pytest
import ujson

from equity_tune.fairness.club import dim_losses
from equity_tune.fairness.dac import init_heads
from equity_tune.fairness.schema import LossWeights
from equity_tune.fairness.total import combine_losses
from equity_tune.model.decoder import (
    forward_batch,
    frozen_checksum,
    init_state,
    pool_prompt,
    sequence_nll,
)
from equity_tune.numerics import Tape, backward
from equity_tune.trainer.config import TrainConfig
from equity_tune.trainer.loop import train_run, train_step
from equity_tune.trainer.optim import Sgd
from equity_tune.util.exceptions import DataError, NumericError


def _arrays(params):
    return {name: t.data.copy() for name, t in params.items()}


def _head_arrays(heads):
    arrays = {}
    for head in heads.values():
        arrays.update(_arrays(head.named_params()))
    return arrays


def _same(first, second):
    return first.keys() == second.keys() and all(
        np.array_equal(first[k], second[k]) for k in first
    )


class TestTrainStep:
    @pytest.fixture
    def setup(self, model_config, dataset):
        schema = dataset.schema
        state = init_state(model_config, seed=0)
        heads = init_heads(schema, model_config.d_model, hidden=4, seed=1)
        return state, heads, dataset.batch(range(4)), schema

    def _step(self, setup, weights, lr=0.1, **kwargs):
        state, heads, batch, schema = setup
        return train_step(
            state, heads, batch, schema, weights, Sgd(lr), Sgd(lr), **kwargs
        )

    def test_lm_only_leaves_heads(self, setup):
        _, heads, _, _ = setup
        state, new_heads, record = self._step(
            setup, LossWeights(lambda_lm=1.0, lambda_dim=0.0, lambda_dac=0.0)
        )
        assert _same(_head_arrays(new_heads), _head_arrays(heads))
        assert not _same(_arrays(state.trainable()), _arrays(setup[0].trainable()))
        assert record.dim == {} and record.dac == {}

    def test_zero_learning_rate(self, setup):
        state, heads, record = self._step(setup, LossWeights(), lr=0.0)
        assert _same(_arrays(state.trainable()), _arrays(setup[0].trainable()))
        assert _same(_head_arrays(heads), _head_arrays(setup[1]))
        assert record.lm > 0
        assert set(record.dim) == set(record.dac) == set(setup[3].attributes)

    def test_sgd_update_matches_gradient(self, setup):
        state, heads, batch, schema = setup
        weights = LossWeights(lambda_lm=1.0, lambda_dim=0.5, lambda_dac=0.0)
        with Tape() as tape:
            params = {n: tape.watch(t) for n, t in state.trainable().items()}
            prefixes = [r[:-1] for r in batch.references]
            output = forward_batch(state, batch.features, prefixes)
            lm, _ = sequence_nll(output, batch.references)
            dim = dim_losses(heads, pool_prompt(state, output), batch.labels, schema)
            total, _ = combine_losses(lm, dim, {}, weights)
        grads = backward(tape, total)

        new_state, _, record = self._step(setup, weights, lr=0.05)
        after = new_state.trainable()
        for name, t in params.items():
            assert np.allclose(
                t.data - after[name].data,
                0.05 * grads[t.ref].data,
                atol=1e-12,
                rtol=0,
            )
        assert record.total == pytest.approx(total.item(), abs=1e-12)

    def test_heads_update_on_detached_states(self, setup):
        state, heads, record = self._step(
            setup, LossWeights(lambda_lm=0.0, lambda_dim=0.0, lambda_dac=1.0)
        )
        assert _same(_arrays(state.trainable()), _arrays(setup[0].trainable()))
        assert not _same(_head_arrays(heads), _head_arrays(setup[1]))
        assert record.grad_norms["phi"] > 0

    def test_restricted_trainable(self, setup):
        state, _, _ = self._step(
            setup,
            LossWeights(lambda_lm=1.0, lambda_dim=0.0, lambda_dac=0.0),
            trainable=["projector.W", "projector.b"],
        )
        assert _same(_arrays(state.adapters), _arrays(setup[0].adapters))
        assert not _same(_arrays(state.projector), _arrays(setup[0].projector))

    def test_single_sample_batch_with_dim(self, model_config, dataset):
        state = init_state(model_config)
        heads = init_heads(dataset.schema, model_config.d_model, hidden=4, seed=1)
        with pytest.raises(DataError):
            train_step(
                state,
                heads,
                dataset.batch([0]),
                dataset.schema,
                LossWeights(),
                Sgd(0.1),
                Sgd(0.1),
            )

    def test_divergence_keeps_parameters(self, setup, monkeypatch):
        def diverge(*args, **kwargs):
            raise NumericError("non-finite loss")

        monkeypatch.setattr("equity_tune.trainer.loop.sequence_nll", diverge)
        state, heads, record = self._step(setup, LossWeights())
        assert state is setup[0] and heads is setup[1]
        assert record.diverged and record.diverged_terms == ["lm"]


class TestTrainRun:
    @pytest.fixture
    def config(self):
        return TrainConfig(
            epochs=1, batch_size=8, stage1_epochs=0, dac_hidden=4, seed=0
        )

    def test_zero_epochs(self, config, dataset, model_config):
        result = train_run(attr.evolve(config, epochs=0), dataset, model_config)
        initial = init_state(model_config, seed=0)
        assert _same(_arrays(result.state.trainable()), _arrays(initial.trainable()))
        assert result.log.records == []

    def test_deterministic(self, config, dataset, model_config):
        first = train_run(config, dataset, model_config)
        second = train_run(config, dataset, model_config)
        assert _same(
            _arrays(first.state.trainable()), _arrays(second.state.trainable())
        )
        assert _same(_head_arrays(first.heads), _head_arrays(second.heads))
        assert first.log.records == second.log.records
        assert len(first.log.steps) == 8

    def test_backbone_is_frozen(self, config, dataset, model_config):
        before = frozen_checksum(init_state(model_config, seed=0))
        result = train_run(attr.evolve(config, stage1_epochs=1), dataset, model_config)
        assert frozen_checksum(result.state) == before
        phases = [r["phase"] for r in result.log.steps]
        assert phases[0] == "stage1" and phases[-1] == "joint"
        for record in result.log.steps:
            if record["phase"] == "stage1":
                assert record["grad_norms"]["theta"] == 0.0
                assert "phi" not in record["grad_norms"]

    def test_pretrain_then_freeze(self, config, dataset, model_config):
        config = attr.evolve(
            config, schedule="pretrain-dac-then-freeze", dac_pretrain_epochs=1
        )
        result = train_run(config, dataset, model_config)
        phases = [r["phase"] for r in result.log.steps]
        assert set(phases) == {"dac_pretrain", "frozen_dac"}
        assert phases.index("frozen_dac") > max(
            i for i, p in enumerate(phases) if p == "dac_pretrain"
        )
        for record in result.log.steps:
            if record["phase"] == "dac_pretrain":
                assert "theta" not in record["grad_norms"]
            else:
                assert "phi" not in record["grad_norms"]

    def test_reweight_on_balanced_groups(self, config, dataset, model_config):
        genders = [s.attributes["gender"] for s in dataset.samples]
        males = [i for i, g in enumerate(genders) if g == "male"]
        females = [i for i, g in enumerate(genders) if g == "female"]
        n = min(len(males), len(females))
        balanced = dataset.subset(sorted(males[:n] + females[:n]))
        plain = train_run(config, balanced, model_config)
        reweighted = train_run(
            attr.evolve(config, baseline="reweight", baseline_attributes=["gender"]),
            balanced,
            model_config,
        )
        for a, b in zip(plain.log.steps, reweighted.log.steps):
            assert a["lm"] == pytest.approx(b["lm"], abs=1e-9)

    def test_resample_baseline(self, config, dataset, model_config):
        config = attr.evolve(config, baseline="resample", baseline_attributes=["race"])
        result = train_run(config, dataset, model_config)
        assert len(result.log.steps) == 8

    def test_feature_width_mismatch(self, config, dataset, model_config):
        with pytest.raises(DataError):
            train_run(config, dataset, attr.evolve(model_config, feature_dim=8))

    def test_log_file(self, tmp_path, config, dataset, model_config):
        result = train_run(config, dataset, model_config, header={"seed": 0})
        path = tmp_path / "train_log.jsonl"
        result.log.write(path)
        lines = [ujson.loads(line) for line in path.read_text().splitlines()]
        assert lines[0] == {"type": "header", "seed": 0}
        assert lines[-1]["type"] == "epoch"
        assert lines[-1]["n_steps"] == 8
