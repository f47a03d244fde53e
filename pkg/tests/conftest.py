"""Shared fixtures: toy corpora, toy embeddings and toy relation data."""

import logging

import numpy as np
import pytest

from src.corpus import EntityMention, RelationExample, Vocabulary, build_vocabulary
from src.embeddings import WordEmbeddings


@pytest.fixture(autouse=True)
def _restore_root_logger():
    """Undo root-logger changes (e.g. from setup_logging) so tests stay independent."""
    root = logging.getLogger()
    level, handlers = root.level, root.handlers[:]
    yield
    root.setLevel(level)
    root.handlers[:] = handlers


TOY_WORDS = ("the", "ceo", "of", "acme", "lives", "in", "paris", "met", "bob", "alice")


@pytest.fixture
def toy_corpus():
    return [
        ["the", "ceo", "of", "acme", "lives", "in", "paris"],
        ["bob", "met", "alice", "in", "paris"],
        ["alice", "is", "the", "ceo", "of", "acme"],
    ]


@pytest.fixture
def toy_vocabulary():
    return Vocabulary(words=TOY_WORDS, counts=tuple(range(len(TOY_WORDS), 0, -1)))


@pytest.fixture
def toy_embeddings(toy_vocabulary):
    rng = np.random.default_rng(7)
    return WordEmbeddings(toy_vocabulary, rng.normal(size=(6, len(toy_vocabulary))))


@pytest.fixture
def toy_examples():
    """Candidates whose label is decided by the word between the mentions."""
    per = lambda i: EntityMention(i, i, "PER")  # noqa: E731
    org = lambda i: EntityMention(i, i, "ORG")  # noqa: E731
    return [
        RelationExample(("bob", "ceo", "acme"), per(0), org(2), "EMPLOYED_BY"),
        RelationExample(("alice", "ceo", "acme"), per(0), org(2), "EMPLOYED_BY"),
        RelationExample(("bob", "met", "alice"), per(0), per(2), "MET"),
        RelationExample(("alice", "met", "bob"), per(0), per(2), "MET"),
        RelationExample(("bob", "in", "paris"), per(0), org(2), "O"),
        RelationExample(("the", "alice", "of", "acme", "in"), per(1), org(3), "O"),
    ]


@pytest.fixture
def tiny_corpus_vocabulary(toy_corpus):
    return build_vocabulary(toy_corpus)
