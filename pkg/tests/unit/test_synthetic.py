"""Unit tests for the synthetic bilingual benchmark."""

import numpy as np
import pytest

from src.corpus import build_vocabulary, load_annotated, load_dictionary, read_corpus
from src.embeddings import WordEmbeddings
from src.errors import ValidationError
from src.pipeline.synthetic import (
    SyntheticConfig,
    generate_synthetic,
    planted_target_embeddings,
    source_word,
    target_word,
)


@pytest.fixture
def small_config():
    return SyntheticConfig(
        vocab_size=200,
        corpus_tokens=2000,
        entity_words_per_type=10,
        annotated_sentences=60,
        sentences_per_document=4,
        seed=3,
    )


@pytest.fixture
def benchmark(small_config):
    return generate_synthetic(small_config)


class TestSyntheticConfig:
    """Tests for SyntheticConfig validation."""

    def test_defaults(self):
        """Test the default sizes."""
        config = SyntheticConfig()
        assert config.vocab_size == 2000
        assert config.labels == ("REL0", "REL1", "REL2", "REL3")
        assert config.argument_types(3) == ("GPE", "PER")

    @pytest.mark.parametrize(
        "overrides",
        [
            {"vocab_size": 50, "corpus_tokens": 1000},
            {"vocab_size": 200, "corpus_tokens": 1999},
            {"vocab_size": 200, "corpus_tokens": 2000, "entity_words_per_type": 45},
            {"negative_rate": 1.0},
            {"entity_types": ("PER", "PER")},
        ],
    )
    def test_invalid(self, overrides):
        """Test rejected configurations."""
        with pytest.raises(ValidationError):
            SyntheticConfig(**overrides)


class TestGenerateSynthetic:
    """Tests for benchmark generation."""

    def test_lexicon_is_bijection(self, benchmark, small_config):
        """Test a one-to-one lexicon over the whole vocabulary."""
        lexicon = benchmark.lexicon
        assert len(lexicon) == small_config.vocab_size
        assert set(lexicon) == {source_word(i) for i in range(small_config.vocab_size)}
        assert set(lexicon.values()) == {target_word(i) for i in range(small_config.vocab_size)}

    def test_inverse_recovers_source(self, benchmark):
        """Test that the inverse lexicon maps the target corpus back."""
        inverse = benchmark.inverse_lexicon
        for src, tgt in zip(benchmark.source_corpus, benchmark.target_corpus):
            assert [inverse[t] for t in tgt] == src
        for src, tgt in zip(benchmark.source_annotated, benchmark.target_annotated):
            assert [inverse[t] for t in tgt.tokens] == src.tokens
            assert tgt.mentions == src.mentions
            assert tgt.relations == src.relations

    def test_deterministic(self, small_config):
        """Test that the same config gives the same benchmark."""
        first = generate_synthetic(small_config)
        second = generate_synthetic(small_config)
        assert first.source_corpus == second.source_corpus
        assert first.lexicon == second.lexicon
        assert [s.to_dict() for s in first.target_annotated] == [
            s.to_dict() for s in second.target_annotated
        ]

    def test_corpus_size(self, benchmark, small_config):
        """Test that the corpus reaches the token target."""
        total = sum(len(s) for s in benchmark.source_corpus)
        assert small_config.corpus_tokens <= total < small_config.corpus_tokens + 40

    def test_annotations(self, benchmark, small_config):
        """Test well-formed sentences with typed relation arguments."""
        for i, sentence in enumerate(benchmark.source_annotated):
            sentence.validate()
            assert sentence.doc_id == f"doc{i // 4:05d}"
            assert len(sentence.relations) <= 1
            for relation in sentence.relations:
                r = small_config.labels.index(relation.label)
                left = sentence.mentions[relation.m1]
                right = sentence.mentions[relation.m2]
                assert (left.entity_type, right.entity_type) == small_config.argument_types(r)
        assert any(s.relations for s in benchmark.source_annotated)
        assert any(not s.relations for s in benchmark.source_annotated)

    def test_save(self, benchmark, tmp_path):
        """Test the written files load back."""
        paths = benchmark.save(tmp_path / "data")
        assert read_corpus(paths["target_corpus"]) == benchmark.target_corpus
        assert load_dictionary(paths["dictionary"]) == benchmark.dictionary()
        loaded = load_annotated(paths["source_data"])
        assert [s.tokens for s in loaded] == [s.tokens for s in benchmark.source_annotated]


class TestPlantedEmbeddings:
    """Tests for rotated target embeddings."""

    def test_rotation(self, benchmark):
        """Test y = Q x with renamed words."""
        vocab = build_vocabulary(benchmark.source_corpus)
        rng = np.random.default_rng(0)
        source = WordEmbeddings(vocab, rng.normal(size=(5, len(vocab))))
        target, q = planted_target_embeddings(source, benchmark.lexicon, seed=1)
        assert np.allclose(q.T @ q, np.eye(5))
        assert target.vocabulary.words == tuple(benchmark.lexicon[w] for w in vocab.words)
        assert np.allclose(q.T @ target.matrix, source.matrix)

    def test_missing_word(self, toy_embeddings):
        """Test source words without a lexicon entry."""
        with pytest.raises(ValidationError):
            planted_target_embeddings(toy_embeddings, {"the": "le"})
