"""Minibatch training of the relation model with early stopping on dev F1."""

import logging
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..corpus import NO_RELATION, RelationExample
from ..embeddings import WordEmbeddings
from ..errors import NumericError, ValidationError
from ..pipeline.evaluation import evaluate
from .layers import Params
from .model import (
    REModelConfig,
    REModelParams,
    TrainingHistory,
    dataset_loss,
    init_params,
    loss_and_gradients,
    predict,
)

logger = logging.getLogger(__name__)


class AdamOptimizer:
    """Adam with bias-corrected moment estimates, updating tensors in place."""

    def __init__(
        self,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def step(self, tensors: Params, grads: Params) -> None:
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for name in sorted(grads):
            grad = grads[name]
            m = self._m.setdefault(name, np.zeros_like(grad))
            v = self._v.setdefault(name, np.zeros_like(grad))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad ** 2
            tensors[name] -= self.learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + self.eps
            )


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> Optional[np.ndarray]:
    """Inverted-dropout multiplier: kept units are scaled by ``1 / (1 - rate)``."""
    if rate <= 0.0:
        return None
    keep = rng.uniform(size=shape) >= rate
    return keep / (1.0 - rate)


def resolve_config(
    config: REModelConfig,
    train_examples: Sequence[RelationExample],
    dev_examples: Sequence[RelationExample] = (),
) -> REModelConfig:
    """Fill empty label and entity-type sets from the data and check coverage.

    Derived sets are sorted, with "O" first among the labels.

    Raises:
        ValidationError: An example uses a label outside a given label set
    """
    examples = list(train_examples) + list(dev_examples)
    if not config.label_set:
        labels = sorted({ex.label for ex in examples} - {NO_RELATION})
        config = replace(config, label_set=(NO_RELATION,) + tuple(labels))
    if not config.entity_type_set:
        types = sorted(
            {ex.mention1.entity_type for ex in examples} | {ex.mention2.entity_type for ex in examples}
        )
        config = replace(config, entity_type_set=tuple(types))

    unknown = {ex.label for ex in examples} - set(config.label_set)
    if unknown:
        raise ValidationError(f"training labels outside the label set: {sorted(unknown)}")
    return config


def micro_f1(params: REModelParams, examples: Sequence[RelationExample]) -> float:
    predictions = [predict(params, ex)[0] for ex in examples]
    return evaluate(predictions, [ex.label for ex in examples], params.labels).f1


def _batch_gradients(
    params: REModelParams,
    batch: Sequence[RelationExample],
    rng: np.random.Generator,
) -> Params:
    rate = params.config.dropout_rate
    width = params.layer.output_dim
    total: Params = {}
    for example in batch:
        mask = dropout_mask(rng, (len(example.tokens), width), rate)
        _, grads = loss_and_gradients(params, example, dropout_mask=mask)
        for name, grad in grads.items():
            if name in total:
                total[name] += grad
            else:
                total[name] = grad.copy()
    for name in total:
        total[name] /= len(batch)
    return total


def train(
    train_examples: Sequence[RelationExample],
    dev_examples: Sequence[RelationExample],
    config: REModelConfig,
    embeddings: WordEmbeddings,
) -> REModelParams:
    """Train a relation model and return the parameters of its best dev epoch.

    Args:
        train_examples: Labelled training candidates
        dev_examples: Labelled development candidates; when empty the
            training candidates are used for model selection
        config: Model and training configuration
        embeddings: Frozen word embeddings of the training language

    Returns:
        Parameters from the epoch with the highest dev micro-F1 (earliest on
        ties); ``history`` records the run

    Raises:
        ValidationError: No training data, or labels outside the label set
        NumericError: The training loss became non-finite
    """
    if not train_examples:
        raise ValidationError("training needs at least one candidate")
    config = resolve_config(config, train_examples, dev_examples)
    params = init_params(config, embeddings)
    vocabulary = params.embeddings.vocabulary
    train_set: List[RelationExample] = [ex.encode(vocabulary) for ex in train_examples]
    dev_set = [ex.encode(vocabulary) for ex in dev_examples] or train_set
    if not dev_examples:
        logger.warning("No development data; selecting the model on training data")

    rng = np.random.default_rng(config.seed + 1)
    optimizer = AdamOptimizer(config.learning_rate)
    history = TrainingHistory(initial_loss=dataset_loss(params, train_set))
    params.history = history

    logger.info(
        f"Training {config.context_kind} relation model: {len(train_set)} train / "
        f"{len(dev_set)} dev candidates, {len(config.label_set)} labels"
    )

    best = params.copy()
    best_f1 = -1.0
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        starts = range(0, len(order), config.batch_size)
        for start in tqdm(starts, desc=f"re epoch {epoch}", disable=not config.show_progress):
            batch = [train_set[i] for i in order[start:start + config.batch_size]]
            optimizer.step(params.tensors, _batch_gradients(params, batch, rng))

        loss = dataset_loss(params, train_set)
        if not np.isfinite(loss):
            raise NumericError(f"relation model training diverged in epoch {epoch}")
        f1 = micro_f1(params, dev_set)
        history.train_loss.append(loss)
        history.dev_f1.append(f1)
        logger.info(f"RE epoch {epoch}: loss {loss:.4f}, dev F1 {f1:.2f}")

        if f1 > best_f1:
            best_f1 = f1
            best = params.copy()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                logger.info(f"Early stopping after epoch {epoch} (best epoch {history.best_epoch})")
                break

    best.history = history
    return best
