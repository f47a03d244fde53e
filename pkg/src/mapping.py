"""Bilingual embedding mappings from the target space into the source space.

Three ways to learn the ``d x d`` map ``M`` (so that ``M y`` approximates the
source vector ``x`` of a translation pair):

- regular: unconstrained least squares, solved through an SVD-based pseudoinverse
- orthogonal: length-normalized Procrustes solution ``U V^T``
- self-learn: alternate orthogonal fits and nearest-neighbour dictionary induction
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from sklearn.metrics.pairwise import cosine_similarity

from .corpus import BilingualDictionary
from .embeddings import WordEmbeddings
from .errors import FormatError, NumericError, ValidationError, reading

logger = logging.getLogger(__name__)

MAPPING_KINDS = ("regular", "orthogonal")
LEARNING_METHODS = ("regular", "orthogonal", "self-learn")
DEFAULT_DICTIONARY_SIZE = 1000
DEFAULT_INDUCTION_CUTOFF = 10_000
ORTHOGONALITY_TOLERANCE = 1e-8
INDUCTION_BATCH = 1024


@dataclass
class MappingMatrix:
    matrix: np.ndarray
    kind: str = "regular"

    def __post_init__(self):
        if self.kind not in MAPPING_KINDS:
            raise ValidationError(f"mapping kind must be one of {MAPPING_KINDS}, got {self.kind!r}")
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValidationError(f"mapping matrix must be square, got {self.matrix.shape}")
        if self.kind == "orthogonal":
            error = orthogonality_error(self.matrix)
            if error >= ORTHOGONALITY_TOLERANCE:
                raise NumericError(f"orthogonal mapping violates M^T M = I by {error:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int, kind: str = "regular") -> "MappingMatrix":
        return cls(np.eye(dim), kind)


@dataclass
class AlignedPairSet:
    """Position-aligned translation pairs as columns (``d x D`` each)."""

    source_vectors: np.ndarray
    target_vectors: np.ndarray
    source_words: List[str] = field(default_factory=list)
    target_words: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.source_vectors.shape != self.target_vectors.shape:
            raise ValidationError(
                f"source and target pair matrices differ: {self.source_vectors.shape} vs "
                f"{self.target_vectors.shape}"
            )
        if self.source_vectors.ndim != 2 or self.source_vectors.shape[1] < 1:
            raise ValidationError("an aligned pair set needs at least one pair")

    @property
    def size(self) -> int:
        return self.source_vectors.shape[1]


@dataclass
class SelfLearningResult:
    mapping: MappingMatrix
    dictionary: BilingualDictionary
    objectives: List[float]
    iterations: int


def orthogonality_error(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix.T @ matrix - np.eye(matrix.shape[1])))


def normalize_lengths(vectors: np.ndarray, words: Optional[List[str]] = None) -> np.ndarray:
    """Scale every column to unit Euclidean norm.

    Raises:
        NumericError: A column is zero (the message names its word when known)
    """
    norms = np.linalg.norm(vectors, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        idx = int(zero[0])
        name = repr(words[idx]) if words is not None and idx < len(words) else f"column {idx}"
        raise NumericError(f"cannot length-normalize the zero vector of {name}")
    return vectors / norms


def normalize_embeddings(embeddings: WordEmbeddings) -> WordEmbeddings:
    return WordEmbeddings(
        embeddings.vocabulary,
        normalize_lengths(embeddings.matrix, list(embeddings.vocabulary.words)),
    )


def build_pairs(
    dictionary: BilingualDictionary, source: WordEmbeddings, target: WordEmbeddings
) -> Tuple[AlignedPairSet, int]:
    """Look up both sides of every dictionary entry.

    Entries with a word missing from either vocabulary are dropped.

    Returns:
        (pairs, number of dropped entries)
    """
    if source.dim != target.dim:
        raise ValidationError(f"embedding dimensions differ: {source.dim} vs {target.dim}")
    src_ids, tgt_ids, src_words, tgt_words = [], [], [], []
    for src_word, tgt_word in dictionary.pairs:
        if src_word in source.vocabulary and tgt_word in target.vocabulary:
            src_ids.append(source.vocabulary.id_of(src_word))
            tgt_ids.append(target.vocabulary.id_of(tgt_word))
            src_words.append(src_word)
            tgt_words.append(tgt_word)
    dropped = len(dictionary) - len(src_ids)
    if dropped:
        logger.warning(f"Dropped {dropped} of {len(dictionary)} dictionary entries not in both vocabularies")
    if not src_ids:
        raise ValidationError("no dictionary entry has both words in the embedding vocabularies")
    pairs = AlignedPairSet(
        source.matrix[:, src_ids], target.matrix[:, tgt_ids], src_words, tgt_words
    )
    return pairs, dropped


def learn_regular(pairs: AlignedPairSet) -> MappingMatrix:
    """Least-squares map minimizing ``sum_i ||x_i - M y_i||^2``.

    Solved as ``Y^T M^T = X^T`` with an SVD-based solver; a rank-deficient
    ``Y Y^T`` yields the minimum-norm solution and a warning.
    """
    x, y = pairs.source_vectors, pairs.target_vectors
    solution, _, rank, _ = scipy.linalg.lstsq(y.T, x.T, lapack_driver="gelsd")
    if rank < y.shape[0]:
        logger.warning(
            f"Target vectors have rank {rank} < d={y.shape[0]}; returning the minimum-norm mapping"
        )
    matrix = solution.T
    if not np.all(np.isfinite(matrix)):
        raise NumericError("regular mapping contains non-finite values")
    return MappingMatrix(matrix, "regular")


def learn_orthogonal(pairs: AlignedPairSet) -> MappingMatrix:
    """Orthogonal map between length-normalized pairs.

    With ``X' Y'^T = U S V^T`` the solution is ``U V^T``.
    """
    x = normalize_lengths(pairs.source_vectors, pairs.source_words or None)
    y = normalize_lengths(pairs.target_vectors, pairs.target_words or None)
    # orthogonal_procrustes finds R minimizing ||Y'^T R - X'^T||, and M = R^T
    rotation, _ = scipy.linalg.orthogonal_procrustes(y.T, x.T)
    return MappingMatrix(rotation.T, "orthogonal")


def mapping_objective(mapping: MappingMatrix, pairs: AlignedPairSet, normalized: bool = False) -> float:
    """Sum of squared residuals ``||x_i - M y_i||^2``, optionally on unit vectors."""
    x, y = pairs.source_vectors, pairs.target_vectors
    if normalized:
        x = normalize_lengths(x)
        y = normalize_lengths(y)
    return float(np.sum((x - mapping.matrix @ y) ** 2))


def project(mapping: MappingMatrix, vector: np.ndarray) -> np.ndarray:
    """Map target-space vector(s) into the source space.

    Accepts one ``d``-vector or a ``d x n`` matrix of columns.
    """
    vector = np.asarray(vector, dtype=float)
    if vector.shape[0] != mapping.dim:
        raise ValidationError(
            f"cannot project a {vector.shape[0]}-dimensional vector with a {mapping.dim}-d mapping"
        )
    return mapping.matrix @ vector


def induce_dictionary(
    mapping: MappingMatrix,
    source: WordEmbeddings,
    target: WordEmbeddings,
    max_vocab: Optional[int] = None,
) -> BilingualDictionary:
    """Pair each target word with its nearest source word under the mapping.

    Similarity is the cosine between ``M y`` and the source vectors; ties go
    to the lower source id. ``max_vocab`` restricts both sides to their most
    frequent words.
    """
    if len(source.vocabulary) == 0 or len(target.vocabulary) == 0:
        raise ValidationError("dictionary induction needs non-empty vocabularies")
    n_src = len(source.vocabulary) if max_vocab is None else min(max_vocab, len(source.vocabulary))
    n_tgt = len(target.vocabulary) if max_vocab is None else min(max_vocab, len(target.vocabulary))

    source_rows = source.matrix[:, :n_src].T
    projected = project(mapping, target.matrix[:, :n_tgt]).T

    pairs = []
    for start in range(0, n_tgt, INDUCTION_BATCH):
        sims = cosine_similarity(projected[start:start + INDUCTION_BATCH], source_rows)
        best = np.argmax(sims, axis=1)
        for offset, src_id in enumerate(best):
            pairs.append(
                (source.vocabulary.words[src_id], target.vocabulary.words[start + offset])
            )
    return BilingualDictionary(pairs)


def self_learn(
    seed: BilingualDictionary,
    source: WordEmbeddings,
    target: WordEmbeddings,
    max_iters: int = 10,
    max_vocab: Optional[int] = DEFAULT_INDUCTION_CUTOFF,
) -> SelfLearningResult:
    """Semi-supervised refinement of an orthogonal mapping from a seed dictionary.

    Each iteration induces a dictionary with the current mapping and refits the
    mapping on it, stopping once the induced dictionary no longer changes.

    Raises:
        ValidationError: Empty seed or negative ``max_iters``
    """
    if max_iters < 0:
        raise ValidationError(f"max_iters must be >= 0, got {max_iters}")
    if len(seed) == 0:
        raise ValidationError("self-learning needs a non-empty seed dictionary")

    dictionary = seed
    pairs, _ = build_pairs(dictionary, source, target)
    mapping = learn_orthogonal(pairs)
    objectives = [mapping_objective(mapping, pairs, normalized=True)]
    iterations = 0

    for iterations in range(1, max_iters + 1):
        induced = induce_dictionary(mapping, source, target, max_vocab)
        if induced == dictionary:
            logger.info(f"Self-learning reached a fixed point after {iterations} iterations")
            break
        dictionary = induced
        pairs, _ = build_pairs(dictionary, source, target)
        mapping = learn_orthogonal(pairs)
        objectives.append(mapping_objective(mapping, pairs, normalized=True))
        logger.info(
            f"Self-learning iteration {iterations}: {len(dictionary)} pairs, "
            f"objective {objectives[-1]:.6f}"
        )

    return SelfLearningResult(mapping, dictionary, objectives, iterations)


def learn_mapping(
    method: str,
    dictionary: BilingualDictionary,
    source: WordEmbeddings,
    target: WordEmbeddings,
    max_iters: int = 10,
) -> MappingMatrix:
    """Learn a mapping with the named method (regular, orthogonal or self-learn)."""
    method = method.lower()
    if method == "self-learn":
        return self_learn(dictionary, source, target, max_iters).mapping

    pairs, _ = build_pairs(dictionary, source, target)
    if method == "regular":
        return learn_regular(pairs)
    elif method == "orthogonal":
        return learn_orthogonal(pairs)
    else:
        raise ValidationError(
            f"Unknown mapping method: {method}. Choose: regular, orthogonal, or self-learn"
        )


def save_mapping(path: Union[str, Path], mapping: MappingMatrix) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{mapping.dim} {mapping.kind}\n")
        for row in mapping.matrix:
            f.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_mapping(path: Union[str, Path]) -> MappingMatrix:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"mapping file not found: {path}")
    with reading(path), open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2 or header[1] not in MAPPING_KINDS:
            raise FormatError("header must be 'd kind'", path, 1)
        try:
            dim = int(header[0])
        except ValueError:
            raise FormatError("header dimension must be an integer", path, 1)
        rows = []
        for line_no, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                row = [float(x) for x in line.split()]
            except ValueError:
                raise FormatError("unparsable number", path, line_no)
            if len(row) != dim:
                raise FormatError(f"expected {dim} numbers, got {len(row)}", path, line_no)
            rows.append(row)
    if len(rows) != dim:
        raise FormatError(f"expected {dim} rows, found {len(rows)}", path)
    return MappingMatrix(np.array(rows), header[1])
