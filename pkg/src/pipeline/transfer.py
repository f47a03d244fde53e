"""Applying a source-language relation model to projected target-language text.

Target word vectors are mapped into the source space with a ``MappingMatrix``
and fed into the source model; entity-label embeddings are language
independent and used as they are.
"""

import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..corpus import RelationExample
from ..embeddings import WordEmbeddings
from ..errors import ValidationError
from ..mapping import MappingMatrix, normalize_embeddings, project
from ..remodel.model import REModelConfig, REModelParams, predict, predict_vectors
from ..remodel.training import train

logger = logging.getLogger(__name__)

DEFAULT_ENSEMBLE_SIZE = 5
ENSEMBLE_RULES = ("max", "average")

Prediction = Tuple[str, np.ndarray]


def _check_dims(mapping: MappingMatrix, params: REModelParams, target: WordEmbeddings) -> None:
    if mapping.dim != params.config.word_dim:
        raise ValidationError(
            f"mapping is {mapping.dim}-dimensional, model expects {params.config.word_dim}"
        )
    if target.dim != mapping.dim:
        raise ValidationError(
            f"target embeddings are {target.dim}-dimensional, mapping is {mapping.dim}"
        )


def project_embeddings(
    mapping: MappingMatrix, target: WordEmbeddings, normalize: bool = False
) -> WordEmbeddings:
    """The whole target vocabulary mapped into the source space.

    With ``normalize`` the target vectors are length-normalized first, as the
    orthogonal mapping expects.
    """
    if target.dim != mapping.dim:
        raise ValidationError(
            f"target embeddings are {target.dim}-dimensional, mapping is {mapping.dim}"
        )
    if normalize:
        target = normalize_embeddings(target)
    return WordEmbeddings(target.vocabulary, project(mapping, target.matrix))


def transfer_predict(
    mapping: MappingMatrix,
    params: REModelParams,
    example: RelationExample,
    target: WordEmbeddings,
) -> Prediction:
    """Classify a target-language candidate with a source-language model.

    Args:
        mapping: Target-to-source mapping
        params: Source-language relation model
        example: Target-language candidate (its tokens are looked up in ``target``)
        target: Target-language word embeddings

    Returns:
        (label, probability distribution over ``params.labels``)

    Raises:
        ValidationError: Dimension mismatch or an unknown entity type
    """
    _check_dims(mapping, params, target)
    vectors = target.lookup(target.vocabulary.encode(example.tokens))
    if params.config.normalize_embeddings:
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        vectors = np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)
    projected = project(mapping, vectors.T).T
    return predict_vectors(params, projected, example)


def predict_dataset(params: REModelParams, examples: Sequence[RelationExample]) -> List[Prediction]:
    """Native predictions for every candidate."""
    vocabulary = params.embeddings.vocabulary
    return [predict(params, ex.encode(vocabulary)) for ex in examples]


def transfer_dataset(
    mapping: MappingMatrix,
    params: REModelParams,
    examples: Sequence[RelationExample],
    target: WordEmbeddings,
) -> List[Prediction]:
    """Transfer predictions for every candidate, projecting the target table once."""
    _check_dims(mapping, params, target)
    projected = project_embeddings(mapping, target, params.config.normalize_embeddings)
    results = []
    for example in examples:
        vectors = projected.lookup(projected.vocabulary.encode(example.tokens))
        results.append(predict_vectors(params, vectors, example))
    return results


def _check_ensemble(models: Sequence[REModelParams], rule: str) -> None:
    if not models:
        raise ValidationError("ensemble needs at least one model")
    if rule not in ENSEMBLE_RULES:
        raise ValidationError(f"ensemble rule must be one of {ENSEMBLE_RULES}, got {rule!r}")
    labels = models[0].labels
    for model in models[1:]:
        if model.labels != labels:
            raise ValidationError("ensemble members have different label sets")


def combine(probabilities: Sequence[np.ndarray], rule: str = "max") -> np.ndarray:
    stacked = np.vstack(probabilities)
    return stacked.max(axis=0) if rule == "max" else stacked.mean(axis=0)


def ensemble_predict(
    models: Sequence[REModelParams],
    example: RelationExample,
    mapping: Optional[MappingMatrix] = None,
    target: Optional[WordEmbeddings] = None,
    rule: str = "max",
) -> str:
    """Label with the highest combined probability across models.

    ``rule="max"`` combines each label's probabilities by their maximum,
    ``"average"`` by their mean. Ties go to the lower label id. With a
    ``mapping`` and ``target`` embeddings the models are applied through
    transfer.
    """
    _check_ensemble(models, rule)
    if mapping is not None and target is None:
        raise ValidationError("transfer ensemble needs target embeddings")
    probs = []
    for model in models:
        if mapping is None:
            probs.append(predict(model, example)[1])
        else:
            probs.append(transfer_predict(mapping, model, example, target)[1])
    return models[0].labels[int(np.argmax(combine(probs, rule)))]


def ensemble_predictions(
    models: Sequence[REModelParams],
    examples: Sequence[RelationExample],
    mapping: Optional[MappingMatrix] = None,
    target: Optional[WordEmbeddings] = None,
    rule: str = "max",
) -> List[Prediction]:
    """Combined distribution and its best label for every candidate."""
    _check_ensemble(models, rule)
    if mapping is not None and target is None:
        raise ValidationError("transfer ensemble needs target embeddings")
    per_model = []
    for model in models:
        if mapping is None:
            per_model.append([p for _, p in predict_dataset(model, examples)])
        else:
            per_model.append([p for _, p in transfer_dataset(mapping, model, examples, target)])
    labels = models[0].labels
    results = []
    for i in range(len(examples)):
        combined = combine([probs[i] for probs in per_model], rule)
        results.append((labels[int(np.argmax(combined))], combined))
    return results


def ensemble_dataset(
    models: Sequence[REModelParams],
    examples: Sequence[RelationExample],
    mapping: Optional[MappingMatrix] = None,
    target: Optional[WordEmbeddings] = None,
    rule: str = "max",
) -> List[str]:
    """Ensemble labels for every candidate."""
    return [label for label, _ in ensemble_predictions(models, examples, mapping, target, rule)]


def train_ensemble(
    train_examples: Sequence[RelationExample],
    dev_examples: Sequence[RelationExample],
    config: REModelConfig,
    embeddings: WordEmbeddings,
    size: int = DEFAULT_ENSEMBLE_SIZE,
) -> List[REModelParams]:
    """Train ``size`` models that differ only in their seed (``seed``, ``seed+1``, ...)."""
    if size < 1:
        raise ValidationError(f"ensemble size must be >= 1, got {size}")
    models = []
    for k in range(size):
        logger.info(f"Training ensemble member {k + 1}/{size}")
        models.append(train(train_examples, dev_examples, replace(config, seed=config.seed + k), embeddings))
    return models
