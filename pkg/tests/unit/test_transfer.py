"""Unit tests for cross-lingual transfer and model ensembles."""

import numpy as np
import pytest
from scipy.stats import ortho_group

from src.embeddings import WordEmbeddings
from src.errors import ValidationError
from src.mapping import MappingMatrix
from src.pipeline.transfer import (
    DEFAULT_ENSEMBLE_SIZE,
    combine,
    ensemble_dataset,
    ensemble_predict,
    ensemble_predictions,
    predict_dataset,
    project_embeddings,
    train_ensemble,
    transfer_dataset,
    transfer_predict,
)
from src.remodel.model import REModelConfig, init_params, predict, predict_vectors


def make_params(embeddings, kind="bilstm", normalize=False, seed=0):
    config = REModelConfig(
        context_kind=kind,
        word_dim=embeddings.dim,
        entity_label_dim=3,
        hidden_dim=4,
        seed=seed,
        label_set=("EMPLOYED_BY", "MET"),
        entity_type_set=("PER", "ORG"),
        normalize_embeddings=normalize,
        init_scale=0.5,
    )
    return init_params(config, embeddings)


def rotated(embeddings, seed=0):
    q = ortho_group.rvs(embeddings.dim, random_state=seed)
    return WordEmbeddings(embeddings.vocabulary, q @ embeddings.matrix), q


class TestTransferPredict:
    """Tests for applying a source model to projected target text."""

    def test_identity_equals_native(self, toy_embeddings, toy_examples):
        """Test that the identity mapping on the same space reproduces predict."""
        params = make_params(toy_embeddings)
        identity = MappingMatrix.identity(toy_embeddings.dim)
        for example in toy_examples:
            label, probs = transfer_predict(identity, params, example, toy_embeddings)
            native_label, native_probs = predict(params, example)
            assert label == native_label
            assert np.allclose(probs, native_probs, atol=1e-12)

    @pytest.mark.parametrize("normalize", (False, True))
    def test_planted_rotation(self, toy_embeddings, toy_examples, normalize):
        """Test that undoing a planted rotation recovers native probabilities."""
        params = make_params(toy_embeddings, "cnn", normalize=normalize)
        target, q = rotated(toy_embeddings)
        mapping = MappingMatrix(q.T, "orthogonal")
        for example in toy_examples:
            _, probs = transfer_predict(mapping, params, example, target)
            assert np.max(np.abs(probs - predict(params, example)[1])) < 1e-3

    def test_entity_labels_not_projected(self, toy_embeddings, toy_examples):
        """Test that only word vectors go through the mapping."""
        params = make_params(toy_embeddings, "pass_through")
        scaling = MappingMatrix(2.0 * np.eye(toy_embeddings.dim))
        example = toy_examples[0]
        vectors = toy_embeddings.lookup(toy_embeddings.vocabulary.encode(example.tokens))
        expected = predict_vectors(params, 2.0 * vectors, example)[1]
        assert np.allclose(transfer_predict(scaling, params, example, toy_embeddings)[1], expected)

    def test_dataset_matches_single(self, toy_embeddings, toy_examples):
        """Test that projecting the table once gives the same predictions."""
        params = make_params(toy_embeddings)
        target, q = rotated(toy_embeddings, seed=3)
        mapping = MappingMatrix(q.T, "orthogonal")
        batch = transfer_dataset(mapping, params, toy_examples, target)
        for example, (label, probs) in zip(toy_examples, batch):
            single_label, single_probs = transfer_predict(mapping, params, example, target)
            assert label == single_label
            assert np.allclose(probs, single_probs, atol=1e-10)

    def test_dimension_mismatch(self, toy_embeddings, toy_examples):
        """Test a mapping of the wrong size."""
        params = make_params(toy_embeddings)
        with pytest.raises(ValidationError):
            transfer_predict(MappingMatrix.identity(3), params, toy_examples[0], toy_embeddings)

    def test_project_embeddings(self, toy_embeddings):
        """Test projecting the whole target table."""
        target, q = rotated(toy_embeddings, seed=1)
        projected = project_embeddings(MappingMatrix(q.T, "orthogonal"), target)
        assert projected.vocabulary == toy_embeddings.vocabulary
        assert np.allclose(projected.matrix, toy_embeddings.matrix)


class TestEnsemble:
    """Tests for ensembles of relation models."""

    def test_default_size(self):
        """Test that ensembles default to five models."""
        assert DEFAULT_ENSEMBLE_SIZE == 5

    def test_hand_max_rule(self):
        """Test (0.6, 0.4) and (0.3, 0.7) combine to label 1."""
        probs = [np.array([0.6, 0.4]), np.array([0.3, 0.7])]
        assert np.array_equal(combine(probs, "max"), [0.6, 0.7])
        assert np.argmax(combine(probs, "max")) == 1
        assert np.allclose(combine(probs, "average"), [0.45, 0.55])

    def test_copies_equal_single(self, toy_embeddings, toy_examples):
        """Test that an ensemble of identical models predicts like one model."""
        params = make_params(toy_embeddings, "cnn")
        for example in toy_examples:
            assert ensemble_predict([params] * 5, example) == predict(params, example)[0]
        single = [label for label, _ in predict_dataset(params, toy_examples)]
        assert ensemble_dataset([params] * 5, toy_examples, rule="average") == single

    def test_transfer_ensemble(self, toy_embeddings, toy_examples):
        """Test ensembles applied through a mapping."""
        models = [make_params(toy_embeddings, seed=s) for s in range(3)]
        identity = MappingMatrix.identity(toy_embeddings.dim)
        native = ensemble_predictions(models, toy_examples)
        transferred = ensemble_predictions(models, toy_examples, identity, toy_embeddings)
        for (label, probs), (t_label, t_probs) in zip(native, transferred):
            assert label == t_label
            assert np.allclose(probs, t_probs)

    def test_invalid(self, toy_embeddings, toy_examples):
        """Test empty ensembles, unknown rules and mismatched label sets."""
        params = make_params(toy_embeddings)
        with pytest.raises(ValidationError):
            ensemble_predict([], toy_examples[0])
        with pytest.raises(ValidationError):
            ensemble_predict([params], toy_examples[0], rule="vote")
        with pytest.raises(ValidationError):
            ensemble_predict([params], toy_examples[0], mapping=MappingMatrix.identity(6))
        other = init_params(
            REModelConfig(
                context_kind="bilstm", word_dim=6, entity_label_dim=3, hidden_dim=4,
                label_set=("MET",), entity_type_set=("PER", "ORG"),
            ),
            toy_embeddings,
        )
        with pytest.raises(ValidationError):
            ensemble_predict([params, other], toy_examples[0])

    def test_train_ensemble_seeds(self, toy_embeddings, toy_examples):
        """Test that members differ only in their seed."""
        config = REModelConfig(
            context_kind="pass_through", word_dim=6, entity_label_dim=3, max_epochs=1, seed=10,
        )
        models = train_ensemble(toy_examples, [], config, toy_embeddings, size=2)
        assert [m.config.seed for m in models] == [10, 11]
        assert not np.array_equal(models[0].tensors["out.Ws"], models[1].tensors["out.Ws"])
        with pytest.raises(ValidationError):
            train_ensemble(toy_examples, [], config, toy_embeddings, size=0)
