"""Unit tests for the CBOW-variant embeddings and the embedding file format."""

import numpy as np
import pytest

from src.corpus import Vocabulary, build_vocabulary, encode_corpus
from src.embeddings import (
    CbowConfig,
    EmbeddingModel,
    WordEmbeddings,
    cbow_gradients,
    context_vector,
    init_model,
    load_embeddings,
    log_likelihood,
    save_embeddings,
    target_probability,
    train_cbow,
)
from src.errors import FormatError, ValidationError


def relative_error(analytic, numeric):
    return np.linalg.norm(analytic - numeric) / max(
        np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12
    )


def numeric_gradient(f, array, h=1e-5):
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = array[idx]
        array[idx] = saved + h
        plus = f()
        array[idx] = saved - h
        minus = f()
        array[idx] = saved
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def toy_tokens(n_tokens=100, vocab=8, seed=0):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab)]
    tokens = [words[i] for i in rng.integers(vocab, size=n_tokens)]
    return [tokens[i:i + 10] for i in range(0, n_tokens, 10)]


def hand_model(dim, window, vocab_size):
    vocab = Vocabulary(words=tuple(f"w{i}" for i in range(vocab_size)), counts=(1,) * vocab_size)
    return EmbeddingModel(
        vocab,
        np.zeros((dim, vocab_size)),
        np.zeros((2 * window, dim, vocab_size)),
        window,
    )


class TestContextVector:
    """Tests for the distance-weighted context vector."""

    def test_zero_matrices(self):
        """Test that zero input matrices give a zero vector."""
        model = hand_model(3, 2, 4)
        assert np.array_equal(context_vector(model, [0, 1, 2, 3], 1), np.zeros(3))

    def test_offset_weights(self):
        """Test weights 1/2, 1, 1, 1/2 for c=2."""
        model = hand_model(1, 2, 5)
        model.input_matrices[:] = 1.0
        assert model.offsets == [-2, -1, 1, 2]
        assert context_vector(model, [0, 1, 2, 3, 4], 2)[0] == pytest.approx(3.0)
        # position 0 only sees offsets +1 and +2
        assert context_vector(model, [0, 1, 2, 3, 4], 0)[0] == pytest.approx(1.5)

    def test_hand_example(self):
        """Test d=2, c=1 with columns (1,0) at j=-1 and (0,2) at j=+1."""
        model = hand_model(2, 1, 3)
        model.input_matrix(-1)[:, 0] = [1.0, 0.0]
        model.input_matrix(1)[:, 2] = [0.0, 2.0]
        assert np.allclose(context_vector(model, [0, 1, 2], 1), [1.0, 2.0])

    def test_position_out_of_range(self):
        """Test a position outside the sentence."""
        with pytest.raises(ValidationError):
            context_vector(hand_model(2, 1, 3), [0, 1], 5)


class TestTargetProbability:
    """Tests for the softmax over the output matrix."""

    def test_single_word(self):
        """Test that V=1 gives probability 1."""
        model = hand_model(2, 1, 1)
        assert np.allclose(target_probability(model, np.ones(2)), [1.0])

    def test_uniform(self):
        """Test equal logits."""
        model = hand_model(2, 1, 4)
        assert np.allclose(target_probability(model, np.ones(2)), np.full(4, 0.25))

    def test_hand_softmax(self):
        """Test logits (0, ln 3) give (0.25, 0.75)."""
        model = hand_model(1, 1, 2)
        model.output_matrix[0] = [0.0, np.log(3.0)]
        assert np.allclose(target_probability(model, np.ones(1)), [0.25, 0.75])

    def test_simplex_for_large_logits(self):
        """Test that huge logits still give a probability vector."""
        model = hand_model(1, 1, 3)
        model.output_matrix[0] = [1000.0, -1000.0, 500.0]
        probs = target_probability(model, np.ones(1))
        assert np.all(probs >= 0)
        assert abs(probs.sum() - 1.0) < 1e-9


class TestCbowTraining:
    """Tests for CBOW-variant training."""

    def test_gradient_matches_finite_differences(self):
        """Test analytic gradients of the average log-likelihood."""
        corpus_tokens = toy_tokens(40, vocab=6, seed=1)
        vocab = build_vocabulary(corpus_tokens)
        corpus = encode_corpus(corpus_tokens, vocab)
        model = init_model(vocab, CbowConfig(dim=3, window=2, seed=4))
        rng = np.random.default_rng(2)
        model.output_matrix[:] = rng.normal(scale=0.5, size=model.output_matrix.shape)
        model.input_matrices[:] = rng.normal(scale=0.5, size=model.input_matrices.shape)

        grad_output, grad_inputs = cbow_gradients(model, corpus)
        objective = lambda: log_likelihood(model, corpus)  # noqa: E731
        num_output = numeric_gradient(objective, model.output_matrix)
        num_inputs = numeric_gradient(objective, model.input_matrices)

        assert relative_error(grad_output, num_output) < 1e-4
        assert relative_error(grad_inputs, num_inputs) < 1e-4

    def test_likelihood_increases(self):
        """Test that the log-likelihood rises every epoch on a 100-token corpus."""
        corpus_tokens = toy_tokens(100, vocab=8, seed=3)
        vocab = build_vocabulary(corpus_tokens)
        corpus = encode_corpus(corpus_tokens, vocab)
        config = CbowConfig(dim=10, window=2, epochs=5, learning_rate=0.05, seed=0)
        initial = log_likelihood(init_model(vocab, config), corpus)

        model = train_cbow(corpus, config)
        history = [initial] + model.history
        assert len(model.history) == 5
        assert all(b > a for a, b in zip(history, history[1:]))

    def test_deterministic(self):
        """Test that the same seed gives bitwise-identical matrices."""
        corpus_tokens = toy_tokens(60, vocab=7, seed=5)
        vocab = build_vocabulary(corpus_tokens)
        corpus = encode_corpus(corpus_tokens, vocab)
        config = CbowConfig(dim=4, window=2, epochs=2, seed=9, monitor=False)
        first = train_cbow(corpus, config)
        second = train_cbow(corpus, config)
        assert np.array_equal(first.output_matrix, second.output_matrix)
        assert np.array_equal(first.input_matrices, second.input_matrices)

    def test_init_range(self):
        """Test uniform initialisation within 0.5/d."""
        vocab = build_vocabulary([["a", "b", "c"]])
        model = init_model(vocab, CbowConfig(dim=4, window=3))
        assert model.input_matrices.shape == (6, 4, 3)
        assert np.abs(model.output_matrix).max() <= 0.5 / 4
        assert np.abs(model.input_matrices).max() <= 0.5 / 4

    def test_single_word_vocabulary(self):
        """Test that V < 2 is rejected."""
        vocab = build_vocabulary([["a", "a"]])
        with pytest.raises(ValidationError):
            train_cbow(encode_corpus([["a", "a"]], vocab), CbowConfig(dim=2, window=1))

    def test_invalid_config(self):
        """Test config range checks."""
        with pytest.raises(ValidationError):
            CbowConfig(dim=0)
        with pytest.raises(ValidationError):
            CbowConfig(learning_rate=0.0)

    def test_exports_output_matrix(self):
        """Test that the word embeddings are the output matrix."""
        vocab = build_vocabulary([["a", "b"]])
        model = init_model(vocab, CbowConfig(dim=2, window=1))
        assert np.array_equal(model.word_embeddings().matrix, model.output_matrix)


class TestEmbeddingFiles:
    """Tests for the embedding text format."""

    def test_round_trip(self, tmp_path, toy_embeddings):
        """Test save then load."""
        path = tmp_path / "e.vec"
        save_embeddings(path, toy_embeddings)
        loaded = load_embeddings(path)
        assert loaded.vocabulary.words == toy_embeddings.vocabulary.words
        assert np.allclose(loaded.matrix, toy_embeddings.matrix, atol=1e-6)

    def test_header(self, tmp_path, toy_embeddings):
        """Test the 'V d' header line."""
        path = tmp_path / "e.vec"
        save_embeddings(path, toy_embeddings)
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == f"{len(toy_embeddings.vocabulary)} {toy_embeddings.dim}"

    def test_short_row(self, tmp_path):
        """Test a row with d-1 numbers."""
        path = tmp_path / "e.vec"
        path.write_text("2 3\na 1 2 3\nb 1 2\n", encoding="utf-8")
        with pytest.raises(FormatError) as excinfo:
            load_embeddings(path)
        assert excinfo.value.line == 3

    def test_row_count_mismatch(self, tmp_path):
        """Test fewer rows than announced."""
        path = tmp_path / "e.vec"
        path.write_text("3 2\na 1 2\nb 3 4\n", encoding="utf-8")
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_bad_header(self, tmp_path):
        """Test a malformed header."""
        path = tmp_path / "e.vec"
        path.write_text("three 2\n", encoding="utf-8")
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_lowercase_folds_file_words(self, tmp_path):
        """Test that capitalised file words are reachable when lowercasing."""
        path = tmp_path / "e.vec"
        path.write_text("3 2\nParis 1 2\nbob 3 4\nPARIS 5 6\n", encoding="utf-8")
        emb = load_embeddings(path, lowercase=True)
        vocab = emb.vocabulary
        assert vocab.words == ("paris", "bob")
        assert "Paris" in vocab and "paris" in vocab
        assert np.array_equal(emb.lookup(vocab.encode(["Paris", "BOB"])), [[1.0, 2.0], [3.0, 4.0]])

    def test_case_kept_without_lowercase(self, tmp_path):
        """Test that words keep their case by default."""
        path = tmp_path / "e.vec"
        path.write_text("2 2\nParis 1 2\nbob 3 4\n", encoding="utf-8")
        vocab = load_embeddings(path).vocabulary
        assert "Paris" in vocab
        assert "paris" not in vocab

    def test_undecodable_file(self, tmp_path):
        """Test non-UTF-8 bytes in an embedding file."""
        path = tmp_path / "e.vec"
        path.write_bytes(b"1 2\n\xff 1 2\n")
        with pytest.raises(FormatError, match="UTF-8"):
            load_embeddings(path)

    def test_lookup_unknown_is_zero(self, toy_embeddings):
        """Test the zero row for the unknown id."""
        unknown = toy_embeddings.vocabulary.unknown_id
        rows = toy_embeddings.lookup([0, unknown])
        assert np.array_equal(rows[0], toy_embeddings.matrix[:, 0])
        assert np.array_equal(rows[1], np.zeros(toy_embeddings.dim))
        assert isinstance(toy_embeddings, WordEmbeddings)
