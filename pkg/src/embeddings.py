"""Monolingual word embeddings with the position-specific CBOW variant.

Each context offset ``j`` in ``-c..-1, 1..c`` has its own input matrix and
contributes with weight ``1/|j|``; the target word is predicted with a full
softmax over the output matrix, whose columns are the exported embeddings.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from scipy.special import log_softmax, softmax
from tqdm import tqdm

from .corpus import TokenizedCorpus, Vocabulary
from .errors import FormatError, NumericError, ValidationError, reading

logger = logging.getLogger(__name__)

MIN_LR_FRACTION = 1e-4


@dataclass
class CbowConfig:
    dim: int = 300
    window: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 1
    seed: int = 0
    monitor: bool = True
    show_progress: bool = False

    def __post_init__(self):
        if self.dim < 1 or self.window < 1:
            raise ValidationError(f"dim and window must be >= 1, got {self.dim}, {self.window}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")


@dataclass
class WordEmbeddings:
    """A vocabulary with one embedding column per word (``d x V``)."""

    vocabulary: Vocabulary
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.vocabulary):
            raise ValidationError(
                f"embedding matrix shape {self.matrix.shape} does not match "
                f"{len(self.vocabulary)} words"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def table(self) -> np.ndarray:
        """``V+1 x d`` row table whose last row is the zero vector for unknown words."""
        return np.vstack([self.matrix.T, np.zeros((1, self.dim))])

    def lookup(self, ids) -> np.ndarray:
        """Rows of word vectors (``n x d``); the unknown id maps to zeros."""
        return self.table[np.asarray(ids, dtype=np.int64)]


@dataclass
class EmbeddingModel:
    """Parameters of the CBOW variant.

    ``output_matrix`` is ``d x V``; ``input_matrices`` stacks the ``2c`` input
    matrices in offset order ``-c..-1, 1..c`` into a ``2c x d x V`` array.
    """

    vocabulary: Vocabulary
    output_matrix: np.ndarray
    input_matrices: np.ndarray
    window: int
    history: List[float] = field(default_factory=list)

    def __post_init__(self):
        d, v = self.output_matrix.shape
        if self.input_matrices.shape != (2 * self.window, d, v):
            raise ValidationError(
                f"expected {2 * self.window} input matrices of shape {(d, v)}, "
                f"got {self.input_matrices.shape}"
            )

    @property
    def dim(self) -> int:
        return self.output_matrix.shape[0]

    @property
    def offsets(self) -> List[int]:
        return list(range(-self.window, 0)) + list(range(1, self.window + 1))

    def input_matrix(self, offset: int) -> np.ndarray:
        return self.input_matrices[self.offsets.index(offset)]

    def word_embeddings(self) -> WordEmbeddings:
        return WordEmbeddings(self.vocabulary, self.output_matrix.copy())


def init_model(vocabulary: Vocabulary, config: CbowConfig) -> EmbeddingModel:
    """Uniform ``[-0.5/d, 0.5/d]`` initialisation of every matrix."""
    rng = np.random.default_rng(config.seed)
    d, v = config.dim, len(vocabulary)
    bound = 0.5 / d
    output = rng.uniform(-bound, bound, size=(d, v))
    inputs = rng.uniform(-bound, bound, size=(2 * config.window, d, v))
    return EmbeddingModel(vocabulary, output, inputs, config.window)


def context_vector(model: EmbeddingModel, sentence, t: int) -> np.ndarray:
    """Distance-weighted sum of the context words' input vectors at position ``t``.

    Offsets falling outside the sentence are skipped.
    """
    sentence = np.asarray(sentence)
    if not 0 <= t < len(sentence):
        raise ValidationError(f"position {t} outside sentence of length {len(sentence)}")
    vec = np.zeros(model.dim)
    for k, j in enumerate(model.offsets):
        if 0 <= t + j < len(sentence):
            vec += model.input_matrices[k][:, sentence[t + j]] / abs(j)
    return vec


def _sentence_contexts(model: EmbeddingModel, sentence: np.ndarray) -> np.ndarray:
    """Context vectors for every position of a sentence (``n x d``)."""
    n = len(sentence)
    contexts = np.zeros((n, model.dim))
    for k, j in enumerate(model.offsets):
        lo, hi = max(0, -j), min(n, n - j)
        if lo >= hi:
            continue
        contexts[lo:hi] += model.input_matrices[k][:, sentence[lo + j:hi + j]].T / abs(j)
    return contexts


def target_probability(model: EmbeddingModel, context_vec: np.ndarray) -> np.ndarray:
    """Softmax distribution over the vocabulary for one context vector."""
    if model.output_matrix.shape[1] < 1:
        raise ValidationError("target_probability needs a non-empty vocabulary")
    return softmax(model.output_matrix.T @ context_vec)


def _sentence_terms(model: EmbeddingModel, sentence: np.ndarray):
    contexts = _sentence_contexts(model, sentence)
    log_probs = log_softmax(contexts @ model.output_matrix, axis=1)
    loglik = float(log_probs[np.arange(len(sentence)), sentence].sum())
    return contexts, log_probs, loglik


def _sentence_gradients(model: EmbeddingModel, sentence: np.ndarray):
    """Summed log-likelihood of one sentence and its gradients.

    Returns:
        (loglik, grad_output (d x V), grad_contexts (n x d))
    """
    contexts, log_probs, loglik = _sentence_terms(model, sentence)
    residual = -np.exp(log_probs)
    residual[np.arange(len(sentence)), sentence] += 1.0
    grad_output = contexts.T @ residual
    grad_contexts = residual @ model.output_matrix.T
    return loglik, grad_output, grad_contexts


def _scatter_context_gradient(
    model: EmbeddingModel, target: np.ndarray, sentence: np.ndarray, grad_contexts: np.ndarray,
    scale: float,
) -> None:
    """Add ``scale * dL/dX~_j`` for one sentence into ``target`` (``2c x d x V``)."""
    n = len(sentence)
    for k, j in enumerate(model.offsets):
        lo, hi = max(0, -j), min(n, n - j)
        if lo >= hi:
            continue
        np.add.at(target[k].T, sentence[lo + j:hi + j], grad_contexts[lo:hi] * (scale / abs(j)))


def log_likelihood(model: EmbeddingModel, corpus: TokenizedCorpus) -> float:
    """Average log-probability of every corpus token given its context."""
    total = corpus.token_total
    if total == 0:
        raise ValidationError("log_likelihood of an empty corpus")
    return sum(_sentence_terms(model, s)[2] for s in corpus.sentences) / total


def cbow_gradients(model: EmbeddingModel, corpus: TokenizedCorpus) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the average log-likelihood.

    Returns:
        (gradient w.r.t. the output matrix, gradient w.r.t. the stacked input matrices)
    """
    total = corpus.token_total
    grad_output = np.zeros_like(model.output_matrix)
    grad_inputs = np.zeros_like(model.input_matrices)
    for sentence in corpus.sentences:
        _, g_out, g_ctx = _sentence_gradients(model, sentence)
        grad_output += g_out
        _scatter_context_gradient(model, grad_inputs, sentence, g_ctx, 1.0)
    return grad_output / total, grad_inputs / total


def train_cbow(corpus: TokenizedCorpus, config: CbowConfig) -> EmbeddingModel:
    """Stochastic gradient ascent on the CBOW-variant log-likelihood.

    One update per sentence, sentences visited in a seeded random order, the
    learning rate decaying linearly towards ``learning_rate * 1e-4``.

    Args:
        corpus: Tokenized training corpus
        config: Training configuration

    Returns:
        The trained model; ``history`` holds the corpus log-likelihood after
        each epoch when ``config.monitor`` is set

    Raises:
        ValidationError: Empty corpus or fewer than two vocabulary words
        NumericError: Parameters became non-finite
    """
    vocab_size = len(corpus.vocabulary)
    if vocab_size < 2:
        raise ValidationError(f"CBOW training needs at least 2 vocabulary words, got {vocab_size}")
    if corpus.token_total == 0:
        raise ValidationError("CBOW training needs a non-empty corpus")

    model = init_model(corpus.vocabulary, config)
    rng = np.random.default_rng(config.seed + 1)
    total_tokens = max(1, config.epochs * corpus.token_total)
    processed = 0

    logger.info(
        f"Training CBOW: V={vocab_size}, N={corpus.token_total}, d={config.dim}, "
        f"c={config.window}, epochs={config.epochs}"
    )
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(corpus.sentences))
        epoch_loglik = 0.0
        for idx in tqdm(order, desc=f"cbow epoch {epoch}", disable=not config.show_progress):
            sentence = corpus.sentences[idx]
            lr = config.learning_rate * max(MIN_LR_FRACTION, 1.0 - processed / total_tokens)
            loglik, grad_output, grad_contexts = _sentence_gradients(model, sentence)
            model.output_matrix += lr * grad_output
            _scatter_context_gradient(model, model.input_matrices, sentence, grad_contexts, lr)
            epoch_loglik += loglik
            processed += len(sentence)

        if not np.isfinite(epoch_loglik):
            raise NumericError(f"CBOW training diverged in epoch {epoch}")
        if config.monitor:
            model.history.append(log_likelihood(model, corpus))
            logger.info(f"CBOW epoch {epoch}: log-likelihood {model.history[-1]:.6f}")
        else:
            logger.info(f"CBOW epoch {epoch}: running log-likelihood "
                        f"{epoch_loglik / corpus.token_total:.6f}")
    return model


def save_embeddings(
    path: Union[str, Path], embeddings: Union[WordEmbeddings, EmbeddingModel]
) -> None:
    """Write the ``V d`` header and one ``word v_1 ... v_d`` line per word."""
    if isinstance(embeddings, EmbeddingModel):
        embeddings = embeddings.word_embeddings()
    vocab, matrix = embeddings.vocabulary, embeddings.matrix
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(vocab)} {embeddings.dim}\n")
        for i, word in enumerate(vocab.words):
            if not word or any(ch.isspace() for ch in word):
                raise ValidationError(f"word {word!r} cannot be written to an embedding file")
            f.write(word + " " + " ".join(f"{x:.9g}" for x in matrix[:, i]) + "\n")
    logger.info(f"Wrote {len(vocab)} x {embeddings.dim} embeddings to {path}")


def load_embeddings(path: Union[str, Path], lowercase: bool = False) -> WordEmbeddings:
    """Read an embedding text file.

    The vocabulary keeps file order; counts are unknown and stored as 0. With
    ``lowercase`` the words are folded to lower case and a word that folds onto an
    earlier row is dropped with a warning.

    Raises:
        FormatError: Bad header, wrong row width, unparsable number or row count mismatch
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"embedding file not found: {path}")

    with reading(path), open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise FormatError("header must be 'V d'", path, 1)
        try:
            vocab_size, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError("header must contain two integers", path, 1)
        if vocab_size < 0 or dim < 1:
            raise FormatError(f"invalid header values V={vocab_size}, d={dim}", path, 1)

        words = []
        seen = set()
        rows_read = 0
        duplicates = 0
        matrix = np.zeros((dim, vocab_size))
        for line_no, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            if rows_read >= vocab_size:
                raise FormatError(f"more than {vocab_size} rows", path, line_no)
            if len(parts) != dim + 1:
                raise FormatError(
                    f"expected {dim} numbers after the word, got {len(parts) - 1}", path, line_no
                )
            try:
                row = [float(x) for x in parts[1:]]
            except ValueError:
                raise FormatError("unparsable number", path, line_no)
            rows_read += 1
            word = parts[0].lower() if lowercase else parts[0]
            if lowercase and word in seen:
                duplicates += 1
                continue
            seen.add(word)
            matrix[:, len(words)] = row
            words.append(word)

    if rows_read != vocab_size:
        raise FormatError(f"header announces {vocab_size} rows, found {rows_read}", path)
    if duplicates:
        logger.warning(f"{path}: dropped {duplicates} rows whose words collide after lowercasing")

    vocab = Vocabulary(
        words=tuple(words), counts=(0,) * len(words), lowercase=lowercase, min_count=0
    )
    return WordEmbeddings(vocab, matrix[:, : len(words)].copy())
