"""The four-layer relation model: embedding, context, summarization, output.

The word embedding table is frozen; entity-label embeddings, the context layer
and the output layer are trained.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from ..corpus import NO_RELATION, EntityMention, RelationExample
from ..embeddings import WordEmbeddings
from ..errors import ValidationError
from ..mapping import normalize_embeddings
from .layers import BiLSTMLayer, CNNLayer, ContextLayer, Params, get_context_layer

CONTEXT_KINDS = ("pass_through", "bilstm", "cnn")
DEFAULT_HIDDEN = {"pass_through": 0, "bilstm": 200, "cnn": 300}
NUM_GROUPS = 5


@dataclass
class REModelConfig:
    context_kind: str = "bilstm"
    word_dim: int = 300
    entity_label_dim: int = 50
    hidden_dim: Optional[int] = None
    cnn_window: int = 3
    dropout_rate: float = 0.5
    learning_rate: float = 1e-3
    max_epochs: int = 50
    patience: int = 5
    batch_size: int = 16
    seed: int = 0
    label_set: Tuple[str, ...] = ()
    entity_type_set: Tuple[str, ...] = ()
    normalize_embeddings: bool = False
    init_scale: float = 0.08
    show_progress: bool = False

    def __post_init__(self):
        if self.context_kind == "pass":
            self.context_kind = "pass_through"
        if self.context_kind not in CONTEXT_KINDS:
            raise ValidationError(f"context_kind must be one of {CONTEXT_KINDS}, got {self.context_kind!r}")
        if self.hidden_dim is None:
            self.hidden_dim = DEFAULT_HIDDEN[self.context_kind]
        if self.cnn_window < 1 or self.cnn_window % 2 == 0:
            raise ValidationError(f"cnn_window must be odd, got {self.cnn_window}")
        if self.word_dim < 1 or self.entity_label_dim < 1:
            raise ValidationError("word_dim and entity_label_dim must be >= 1")
        if self.context_kind != "pass_through" and self.hidden_dim < 1:
            raise ValidationError("hidden_dim must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ValidationError("batch_size and patience must be >= 1, max_epochs >= 0")
        self.label_set = tuple(self.label_set)
        self.entity_type_set = tuple(self.entity_type_set)
        if self.label_set and NO_RELATION not in self.label_set:
            self.label_set = (NO_RELATION,) + self.label_set
        if len(set(self.label_set)) != len(self.label_set):
            raise ValidationError("label_set has duplicates")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["label_set"] = list(self.label_set)
        data["entity_type_set"] = list(self.entity_type_set)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "REModelConfig":
        data = dict(data)
        data["label_set"] = tuple(data.get("label_set", ()))
        data["entity_type_set"] = tuple(data.get("entity_type_set", ()))
        return cls(**data)


@dataclass
class TrainingHistory:
    train_loss: List[float] = field(default_factory=list)
    dev_f1: List[float] = field(default_factory=list)
    initial_loss: Optional[float] = None
    best_epoch: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class REModelParams:
    """Learnable tensors plus the frozen word table of one relation model."""

    config: REModelConfig
    tensors: Params
    embeddings: WordEmbeddings
    history: TrainingHistory = field(default_factory=TrainingHistory)

    @property
    def layer(self) -> ContextLayer:
        c = self.config
        return get_context_layer(c.context_kind, c.word_dim, c.hidden_dim, c.cnn_window)

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.config.label_set

    def label_id(self, label: str) -> int:
        try:
            return self.config.label_set.index(label)
        except ValueError:
            raise ValidationError(f"label {label!r} is not in the model's label set")

    def entity_type_id(self, entity_type: str) -> int:
        try:
            return self.config.entity_type_set.index(entity_type)
        except ValueError:
            raise ValidationError(f"unknown entity type {entity_type!r}")

    def copy(self) -> "REModelParams":
        return REModelParams(
            self.config,
            {name: value.copy() for name, value in self.tensors.items()},
            self.embeddings,
            self.history,
        )


def init_params(config: REModelConfig, embeddings: WordEmbeddings) -> REModelParams:
    """Random initial parameters; the word table is used as given (or normalized)."""
    if embeddings.dim != config.word_dim:
        raise ValidationError(
            f"word embeddings have d={embeddings.dim}, model expects {config.word_dim}"
        )
    if not config.label_set or not config.entity_type_set:
        raise ValidationError("model needs non-empty label and entity type sets")
    if config.normalize_embeddings:
        embeddings = normalize_embeddings(embeddings)

    rng = np.random.default_rng(config.seed)
    scale = config.init_scale
    layer = get_context_layer(config.context_kind, config.word_dim, config.hidden_dim, config.cnn_window)
    tensors = layer.init_params(rng, scale)

    n_labels, dm = len(config.label_set), config.entity_label_dim
    summary_dim = NUM_GROUPS * layer.output_dim
    tensors["entity_labels"] = rng.uniform(-scale, scale, size=(dm, len(config.entity_type_set)))
    tensors["out.Ws"] = rng.uniform(-scale, scale, size=(n_labels, summary_dim))
    tensors["out.Wm1"] = rng.uniform(-scale, scale, size=(n_labels, dm))
    tensors["out.Wm2"] = rng.uniform(-scale, scale, size=(n_labels, dm))
    tensors["out.b"] = np.zeros(n_labels)
    return REModelParams(config, tensors, embeddings)


def example_ids(params: REModelParams, example: RelationExample) -> Sequence[int]:
    if example.token_ids or not example.tokens:
        return example.token_ids
    return params.embeddings.vocabulary.encode(example.tokens)


def embed_sentence(
    params: REModelParams, example: RelationExample
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Word vectors (``n x d``, zeros for unknown words) and both entity-label vectors."""
    vectors = params.embeddings.lookup(example_ids(params, example))
    labels = params.tensors["entity_labels"]
    l1 = labels[:, params.entity_type_id(example.mention1.entity_type)]
    l2 = labels[:, params.entity_type_id(example.mention2.entity_type)]
    return vectors, l1, l2


def bilstm_forward(params: REModelParams, word_vectors: np.ndarray) -> np.ndarray:
    """Concatenated forward/backward hidden states, one ``2 d_h`` row per token."""
    layer = params.layer
    if not isinstance(layer, BiLSTMLayer):
        raise ValidationError(f"model has a {params.config.context_kind} context layer")
    if len(word_vectors) == 0:
        raise ValidationError("bilstm_forward needs a non-empty sequence")
    return layer.forward(params.tensors, np.asarray(word_vectors, dtype=float))[0]


def cnn_forward(params: REModelParams, word_vectors: np.ndarray) -> np.ndarray:
    """``tanh(W z_t + b)`` for every token, with zero padding at the edges."""
    layer = params.layer
    if not isinstance(layer, CNNLayer):
        raise ValidationError(f"model has a {params.config.context_kind} context layer")
    if len(word_vectors) == 0:
        raise ValidationError("cnn_forward needs a non-empty sequence")
    return layer.forward(params.tensors, np.asarray(word_vectors, dtype=float))[0]


def group_bounds(n: int, mention1: EntityMention, mention2: EntityMention) -> List[Tuple[int, int]]:
    """Half-open token ranges of the five groups: left, entity 1, between, entity 2, right."""
    if not mention1.end < mention2.begin:
        raise ValidationError("summarize needs mention1 to end before mention2 begins")
    if mention2.end >= n:
        raise ValidationError(f"mention span beyond sentence of length {n}")
    return [
        (0, mention1.begin),
        (mention1.begin, mention1.end + 1),
        (mention1.end + 1, mention2.begin),
        (mention2.begin, mention2.end + 1),
        (mention2.end + 1, n),
    ]


def _pool(hidden: np.ndarray, mention1: EntityMention, mention2: EntityMention):
    """Group-wise max pooling; returns the summary and the winning row per coordinate."""
    n, dim = hidden.shape
    summary = np.zeros(NUM_GROUPS * dim)
    argmax = np.full((NUM_GROUPS, dim), -1, dtype=np.int64)
    for g, (start, stop) in enumerate(group_bounds(n, mention1, mention2)):
        if start >= stop:
            continue
        rows = start + np.argmax(hidden[start:stop], axis=0)
        argmax[g] = rows
        summary[g * dim:(g + 1) * dim] = hidden[rows, np.arange(dim)]
    return summary, argmax


def summarize(hidden_vectors: np.ndarray, mention1: EntityMention, mention2: EntityMention) -> np.ndarray:
    """Concatenate the element-wise maxima of the five groups; empty groups give zeros."""
    return _pool(np.asarray(hidden_vectors, dtype=float), mention1, mention2)[0]


def _logits(tensors: Params, summary: np.ndarray, l1: np.ndarray, l2: np.ndarray) -> np.ndarray:
    return (
        tensors["out.Ws"] @ summary
        + tensors["out.Wm1"] @ l1
        + tensors["out.Wm2"] @ l2
        + tensors["out.b"]
    )


def output_layer(params: REModelParams, h_s: np.ndarray, l1: np.ndarray, l2: np.ndarray) -> np.ndarray:
    """Probability distribution over the relation labels."""
    return softmax(_logits(params.tensors, h_s, l1, l2))


def predict_vectors(
    params: REModelParams, vectors: np.ndarray, example: RelationExample
) -> Tuple[str, np.ndarray]:
    """Classify a candidate from explicit word vectors (native or projected)."""
    if len(vectors) != len(example.tokens) and example.tokens:
        raise ValidationError(
            f"got {len(vectors)} word vectors for a {len(example.tokens)}-token sentence"
        )
    labels = params.tensors["entity_labels"]
    l1 = labels[:, params.entity_type_id(example.mention1.entity_type)]
    l2 = labels[:, params.entity_type_id(example.mention2.entity_type)]
    hidden, _ = params.layer.forward(params.tensors, vectors)
    probs = output_layer(params, summarize(hidden, example.mention1, example.mention2), l1, l2)
    return params.labels[int(np.argmax(probs))], probs


def predict(params: REModelParams, example: RelationExample) -> Tuple[str, np.ndarray]:
    """Most probable label (ties to the lower label id) and the full distribution."""
    vectors, _, _ = embed_sentence(params, example)
    return predict_vectors(params, vectors, example)


def loss_and_gradients(
    params: REModelParams,
    example: RelationExample,
    vectors: Optional[np.ndarray] = None,
    dropout_mask: Optional[np.ndarray] = None,
) -> Tuple[float, Params]:
    """Cross-entropy of the gold label and its gradient for every trainable tensor.

    Args:
        params: Model parameters
        example: Candidate with a gold label in the model's label set
        vectors: Word vectors to use instead of the frozen table lookup
        dropout_mask: Multiplier applied to the context-layer outputs (inverted dropout)

    Returns:
        (loss, gradients keyed like ``params.tensors``)
    """
    tensors = params.tensors
    layer = params.layer
    if vectors is None:
        vectors = embed_sentence(params, example)[0]
    gold = params.label_id(example.label)
    t1 = params.entity_type_id(example.mention1.entity_type)
    t2 = params.entity_type_id(example.mention2.entity_type)
    l1 = tensors["entity_labels"][:, t1]
    l2 = tensors["entity_labels"][:, t2]

    hidden, cache = layer.forward(tensors, vectors)
    dropped = hidden if dropout_mask is None else hidden * dropout_mask
    summary, argmax = _pool(dropped, example.mention1, example.mention2)
    log_probs = log_softmax(_logits(tensors, summary, l1, l2))
    loss = -float(log_probs[gold])

    grad_logits = np.exp(log_probs)
    grad_logits[gold] -= 1.0

    grads: Params = {
        "out.Ws": np.outer(grad_logits, summary),
        "out.Wm1": np.outer(grad_logits, l1),
        "out.Wm2": np.outer(grad_logits, l2),
        "out.b": grad_logits,
    }
    grad_labels = np.zeros_like(tensors["entity_labels"])
    grad_labels[:, t1] += tensors["out.Wm1"].T @ grad_logits
    grad_labels[:, t2] += tensors["out.Wm2"].T @ grad_logits
    grads["entity_labels"] = grad_labels

    grad_summary = tensors["out.Ws"].T @ grad_logits
    dim = hidden.shape[1]
    grad_hidden = np.zeros_like(hidden)
    columns = np.arange(dim)
    for g in range(NUM_GROUPS):
        rows = argmax[g]
        if rows[0] < 0:
            continue
        np.add.at(grad_hidden, (rows, columns), grad_summary[g * dim:(g + 1) * dim])
    if dropout_mask is not None:
        grad_hidden *= dropout_mask

    grads.update(layer.backward(tensors, cache, grad_hidden))
    return loss, grads


def dataset_loss(params: REModelParams, examples: Sequence[RelationExample]) -> float:
    """Mean cross-entropy without dropout."""
    if not examples:
        raise ValidationError("dataset_loss of an empty example list")
    total = 0.0
    for example in examples:
        _, probs = predict(params, example)
        total -= np.log(max(probs[params.label_id(example.label)], np.finfo(float).tiny))
    return float(total / len(examples))
