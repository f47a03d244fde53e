"""Synthetic bilingual benchmark with a planted lexicon.

The source language is generated from a small template grammar; the target
language is the token-wise image of the source under a random bijective
lexicon, so gold relations are identical across the two languages while the
surface vocabularies are disjoint.

Words fall into fixed categories:

- entity words, one block per entity type
- relation triggers, which decide the label of the mention pair around them
- null triggers, which mark a pair as unrelated
- topic words that co-occur with one relation
- filler words drawn from a Zipf distribution
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from scipy.stats import ortho_group

from ..corpus import (
    AnnotatedSentence,
    BilingualDictionary,
    EntityMention,
    RelationTriple,
    Vocabulary,
    save_annotated,
    save_dictionary,
)
from ..embeddings import WordEmbeddings
from ..errors import ValidationError

logger = logging.getLogger(__name__)

MIN_VOCAB = 100
MIN_FILLER = 20
TOPIC_WORDS_PER_RELATION = 4


@dataclass
class SyntheticConfig:
    vocab_size: int = 2000
    corpus_tokens: int = 200_000
    num_relations: int = 4
    triggers_per_relation: int = 3
    entity_types: Tuple[str, ...] = ("PER", "ORG", "LOC", "GPE")
    entity_words_per_type: int = 50
    annotated_sentences: int = 1000
    sentences_per_document: int = 5
    extra_mention_rate: float = 0.3
    negative_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        self.entity_types = tuple(self.entity_types)
        if self.vocab_size < MIN_VOCAB:
            raise ValidationError(f"vocab_size must be >= {MIN_VOCAB}, got {self.vocab_size}")
        if self.corpus_tokens < 10 * self.vocab_size:
            raise ValidationError(
                f"corpus_tokens must be >= 10 * vocab_size = {10 * self.vocab_size}, "
                f"got {self.corpus_tokens}"
            )
        if self.num_relations < 1 or self.triggers_per_relation < 1:
            raise ValidationError("num_relations and triggers_per_relation must be >= 1")
        if len(self.entity_types) < 1 or len(set(self.entity_types)) != len(self.entity_types):
            raise ValidationError("entity_types must be non-empty and distinct")
        if self.entity_words_per_type < 1:
            raise ValidationError("entity_words_per_type must be >= 1")
        if self.annotated_sentences < 1 or self.sentences_per_document < 1:
            raise ValidationError("annotated_sentences and sentences_per_document must be >= 1")
        if not 0.0 <= self.extra_mention_rate <= 1.0 or not 0.0 <= self.negative_rate < 1.0:
            raise ValidationError("extra_mention_rate must be in [0, 1] and negative_rate in [0, 1)")
        if self.filler_count < MIN_FILLER:
            raise ValidationError(
                f"vocab_size {self.vocab_size} leaves {self.filler_count} filler words; "
                f"need at least {MIN_FILLER}"
            )

    @property
    def reserved_count(self) -> int:
        return (
            len(self.entity_types) * self.entity_words_per_type
            + self.num_relations * self.triggers_per_relation
            + self.triggers_per_relation
            + self.num_relations * TOPIC_WORDS_PER_RELATION
        )

    @property
    def filler_count(self) -> int:
        return self.vocab_size - self.reserved_count

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(f"REL{r}" for r in range(self.num_relations))

    def argument_types(self, relation: int) -> Tuple[str, str]:
        types = self.entity_types
        return types[relation % len(types)], types[(relation + 1) % len(types)]


def source_word(index: int) -> str:
    return f"w{index:05d}"


def target_word(index: int) -> str:
    return f"v{index:05d}"


class _Grammar:
    """Word categories and the sentence templates built from them."""

    def __init__(self, config: SyntheticConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        next_id = 0

        def block(size: int) -> List[str]:
            nonlocal next_id
            words = [source_word(i) for i in range(next_id, next_id + size)]
            next_id += size
            return words

        self.entity_words: Dict[str, List[str]] = {
            t: block(config.entity_words_per_type) for t in config.entity_types
        }
        self.triggers = [block(config.triggers_per_relation) for _ in range(config.num_relations)]
        self.null_triggers = block(config.triggers_per_relation)
        self.topics = [block(TOPIC_WORDS_PER_RELATION) for _ in range(config.num_relations)]
        self.filler = block(config.filler_count)
        weights = 1.0 / np.arange(1, len(self.filler) + 1)
        self.filler_probs = weights / weights.sum()

    def fillers(self, low: int, high: int) -> List[str]:
        n = int(self.rng.integers(low, high + 1))
        if n == 0:
            return []
        return [self.filler[i] for i in self.rng.choice(len(self.filler), size=n, p=self.filler_probs)]

    def choice(self, words: List[str]) -> str:
        return words[int(self.rng.integers(len(words)))]

    def entity(self, entity_type: str) -> List[str]:
        length = int(self.rng.integers(1, 3))
        return [self.choice(self.entity_words[entity_type]) for _ in range(length)]

    def random_type(self) -> str:
        return self.config.entity_types[int(self.rng.integers(len(self.config.entity_types)))]

    def sentence(self) -> AnnotatedSentence:
        """One annotated sentence: ``E1 [topic] trigger E2`` plus optional ``null E3``."""
        config = self.config
        tokens: List[str] = []
        mentions: List[EntityMention] = []

        def add_mention(entity_type: str) -> int:
            words = self.entity(entity_type)
            mentions.append(EntityMention(len(tokens), len(tokens) + len(words) - 1, entity_type))
            tokens.extend(words)
            return len(mentions) - 1

        relations = []
        tokens.extend(self.fillers(0, 3))
        if self.rng.random() < config.negative_rate:
            add_mention(self.random_type())
            tokens.append(self.choice(self.null_triggers))
            tokens.extend(self.fillers(0, 1))
            add_mention(self.random_type())
        else:
            relation = int(self.rng.integers(config.num_relations))
            type1, type2 = config.argument_types(relation)
            left = add_mention(type1)
            if self.rng.random() < 0.5:
                tokens.append(self.choice(self.topics[relation]))
            tokens.append(self.choice(self.triggers[relation]))
            if self.rng.random() < 0.5:
                tokens.append(self.choice(self.topics[relation]))
            right = add_mention(type2)
            relations.append(RelationTriple(left, right, config.labels[relation]))

        if self.rng.random() < config.extra_mention_rate:
            tokens.extend(self.fillers(0, 1))
            tokens.append(self.choice(self.null_triggers))
            add_mention(self.random_type())
        tokens.extend(self.fillers(0, 3))
        return AnnotatedSentence(tokens, mentions, relations)

    def plain_sentence(self) -> List[str]:
        return self.fillers(8, 20)


@dataclass
class SyntheticBenchmark:
    config: SyntheticConfig
    source_corpus: List[List[str]]
    target_corpus: List[List[str]]
    lexicon: Dict[str, str]
    source_annotated: List[AnnotatedSentence]
    target_annotated: List[AnnotatedSentence]
    labels: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def inverse_lexicon(self) -> Dict[str, str]:
        return {t: s for s, t in self.lexicon.items()}

    def dictionary(self) -> BilingualDictionary:
        """The planted lexicon as (source, target) pairs in source-word order."""
        return BilingualDictionary(sorted(self.lexicon.items()))

    def save(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """Write corpora, lexicon and annotated data; returns the written paths."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "source_corpus": out_dir / "source.txt",
            "target_corpus": out_dir / "target.txt",
            "dictionary": out_dir / "lexicon.tsv",
            "source_data": out_dir / "source.jsonl",
            "target_data": out_dir / "target.jsonl",
        }
        for key, corpus in (("source_corpus", self.source_corpus), ("target_corpus", self.target_corpus)):
            with open(paths[key], "w", encoding="utf-8") as f:
                for sentence in corpus:
                    f.write(" ".join(sentence) + "\n")
        save_dictionary(paths["dictionary"], self.dictionary())
        save_annotated(paths["source_data"], self.source_annotated)
        save_annotated(paths["target_data"], self.target_annotated)
        logger.info(f"Wrote synthetic benchmark to {out_dir}")
        return paths


def _translate(sentence: AnnotatedSentence, lexicon: Dict[str, str]) -> AnnotatedSentence:
    return AnnotatedSentence(
        [lexicon[token] for token in sentence.tokens],
        list(sentence.mentions),
        list(sentence.relations),
        sentence.doc_id,
    )


def generate_synthetic(config: SyntheticConfig) -> SyntheticBenchmark:
    """Generate a benchmark; the output is a deterministic function of ``config``."""
    rng = np.random.default_rng(config.seed)
    grammar = _Grammar(config, rng)
    permutation = rng.permutation(config.vocab_size)
    lexicon = {source_word(i): target_word(int(permutation[i])) for i in range(config.vocab_size)}

    annotated = []
    for i in range(config.annotated_sentences):
        sentence = grammar.sentence()
        sentence.doc_id = f"doc{i // config.sentences_per_document:05d}"
        annotated.append(sentence)

    corpus: List[List[str]] = []
    total = 0
    while total < config.corpus_tokens:
        if rng.random() < 0.5:
            tokens = grammar.sentence().tokens
        else:
            tokens = grammar.plain_sentence()
        if not tokens:
            continue
        corpus.append(tokens)
        total += len(tokens)

    logger.info(
        f"Generated synthetic benchmark: {len(corpus)} corpus sentences ({total} tokens), "
        f"{len(annotated)} annotated sentences"
    )
    return SyntheticBenchmark(
        config=config,
        source_corpus=corpus,
        target_corpus=[[lexicon[t] for t in sentence] for sentence in corpus],
        lexicon=lexicon,
        source_annotated=annotated,
        target_annotated=[_translate(s, lexicon) for s in annotated],
        labels=config.labels,
    )


def planted_target_embeddings(
    source: WordEmbeddings, lexicon: Dict[str, str], seed: int = 0
) -> Tuple[WordEmbeddings, np.ndarray]:
    """Target embeddings that are an exact rotation of the source ones, renamed.

    Returns:
        (target embeddings, rotation ``Q`` with ``y = Q x``); the exact
        target-to-source mapping is ``Q^T``

    Raises:
        ValidationError: A source word has no lexicon entry
    """
    missing = [w for w in source.vocabulary.words if w not in lexicon]
    if missing:
        raise ValidationError(f"{len(missing)} source words have no lexicon entry, e.g. {missing[0]!r}")
    if source.dim > 1:
        rotation = ortho_group.rvs(source.dim, random_state=np.random.default_rng(seed))
    else:
        rotation = np.ones((1, 1))
    vocab = source.vocabulary
    target_vocab = Vocabulary(
        words=tuple(lexicon[w] for w in vocab.words),
        counts=vocab.counts,
        lowercase=False,
        min_count=vocab.min_count,
    )
    return WordEmbeddings(target_vocab, rotation @ source.matrix), rotation
