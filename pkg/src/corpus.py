"""Corpus ingestion, vocabularies, annotated relation data and dataset splits.

Annotated data is read from JSON lines with one sentence per record::

    {"tokens": [...], "mentions": [{"begin": 0, "end": 1, "type": "PER"}, ...],
     "relations": [{"m1": 0, "m2": 1, "label": "EMPLOYED_BY"}], "doc_id": "d1"}

Mention offsets are inclusive token indices. ``doc_id`` is optional.
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from .errors import FormatError, ValidationError, reading

logger = logging.getLogger(__name__)

NO_RELATION = "O"

T = TypeVar("T")


@dataclass(frozen=True)
class Vocabulary:
    """Bijective word <-> id map with occurrence counts.

    Ids are dense in ``[0, V-1]``, ordered by descending count with a
    lexicographic tie-break. Id ``V`` is reserved for unknown words.
    """

    words: Tuple[str, ...] = ()
    counts: Tuple[int, ...] = ()
    lowercase: bool = False
    min_count: int = 1
    index_of: Dict[str, int] = field(default_factory=dict, init=False, compare=False, repr=False)

    def __post_init__(self):
        if len(self.words) != len(self.counts):
            raise ValidationError("vocabulary words and counts differ in length")
        index = {word: i for i, word in enumerate(self.words)}
        if len(index) != len(self.words):
            raise ValidationError("vocabulary words are not distinct")
        object.__setattr__(self, "index_of", index)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return self._norm(word) in self.index_of

    @property
    def unknown_id(self) -> int:
        return len(self.words)

    def count_of(self, word: str) -> int:
        idx = self.index_of.get(self._norm(word))
        return 0 if idx is None else self.counts[idx]

    def id_of(self, word: str) -> int:
        return self.index_of.get(self._norm(word), self.unknown_id)

    def encode(self, tokens: Iterable[str]) -> List[int]:
        """Token ids, with the unknown id for out-of-vocabulary tokens."""
        return [self.id_of(token) for token in tokens]

    def _norm(self, word: str) -> str:
        return word.lower() if self.lowercase else word


@dataclass
class TokenizedCorpus:
    sentences: List[np.ndarray]
    vocabulary: Vocabulary

    @property
    def token_total(self) -> int:
        return int(sum(len(s) for s in self.sentences))


@dataclass(frozen=True)
class EntityMention:
    begin: int
    end: int
    entity_type: str

    def overlaps(self, other: "EntityMention") -> bool:
        return not (self.end < other.begin or other.end < self.begin)

    def to_dict(self) -> Dict:
        return {"begin": self.begin, "end": self.end, "type": self.entity_type}


@dataclass(frozen=True)
class RelationTriple:
    m1: int
    m2: int
    label: str


@dataclass
class AnnotatedSentence:
    """A tokenized sentence with gold entity mentions and relations."""

    tokens: List[str]
    mentions: List[EntityMention] = field(default_factory=list)
    relations: List[RelationTriple] = field(default_factory=list)
    doc_id: Optional[str] = None

    def validate(self) -> None:
        """Check spans, relation indices, ordering and label uniqueness.

        Raises:
            ValidationError: On the first violated invariant
        """
        n = len(self.tokens)
        for i, mention in enumerate(self.mentions):
            if not 0 <= mention.begin <= mention.end < n:
                raise ValidationError(
                    f"mention {i} span [{mention.begin}, {mention.end}] out of range for "
                    f"{n} tokens"
                )
        seen = set()
        for relation in self.relations:
            for idx in (relation.m1, relation.m2):
                if not 0 <= idx < len(self.mentions):
                    raise ValidationError(
                        f"relation references mention {idx} of {len(self.mentions)}"
                    )
            left, right = self.mentions[relation.m1], self.mentions[relation.m2]
            if not left.end < right.begin:
                raise ValidationError(
                    f"relation {relation.label!r}: mention {relation.m1} must end before "
                    f"mention {relation.m2} begins"
                )
            pair = frozenset((relation.m1, relation.m2))
            if pair in seen:
                raise ValidationError(
                    f"more than one label for mention pair ({relation.m1}, {relation.m2})"
                )
            seen.add(pair)

    def to_dict(self) -> Dict:
        data = {
            "tokens": list(self.tokens),
            "mentions": [m.to_dict() for m in self.mentions],
            "relations": [{"m1": r.m1, "m2": r.m2, "label": r.label} for r in self.relations],
        }
        if self.doc_id is not None:
            data["doc_id"] = self.doc_id
        return data


@dataclass(frozen=True)
class RelationExample:
    """One candidate mention pair; ``mention1`` is left of ``mention2``."""

    tokens: Tuple[str, ...]
    mention1: EntityMention
    mention2: EntityMention
    label: str = NO_RELATION
    token_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.mention1.end < self.mention2.begin:
            raise ValidationError("mention1 must end before mention2 begins")

    def encode(self, vocabulary: Vocabulary) -> "RelationExample":
        return replace(self, token_ids=tuple(vocabulary.encode(self.tokens)))


@dataclass
class BilingualDictionary:
    """Aligned (source word, target word) pairs, one entry per target word."""

    pairs: List[Tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        targets = [t for _, t in self.pairs]
        if len(set(targets)) != len(targets):
            raise ValidationError("bilingual dictionary has duplicate target words")

    def __len__(self) -> int:
        return len(self.pairs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BilingualDictionary):
            return NotImplemented
        return set(self.pairs) == set(other.pairs)

    def top(self, n: int) -> "BilingualDictionary":
        return BilingualDictionary(list(self.pairs[:n]))

    def sorted_by_target_frequency(self, target_vocab: Vocabulary) -> "BilingualDictionary":
        """Most frequent target words first; unknown target words go last."""
        order = sorted(
            range(len(self.pairs)),
            key=lambda i: (target_vocab.id_of(self.pairs[i][1]), i),
        )
        return BilingualDictionary([self.pairs[i] for i in order])


def tokenize(line: str, lowercase: bool = False) -> List[str]:
    """Whitespace tokenization."""
    tokens = line.split()
    if lowercase:
        tokens = [t.lower() for t in tokens]
    return tokens


def read_corpus(path: Union[str, Path], lowercase: bool = False) -> List[List[str]]:
    """Read one sentence per non-empty line."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"corpus file not found: {path}")
    sentences = []
    with reading(path), open(path, "r", encoding="utf-8") as f:
        for line in f:
            tokens = tokenize(line, lowercase)
            if tokens:
                sentences.append(tokens)
    logger.info(f"Read {len(sentences)} sentences from {path}")
    return sentences


def build_vocabulary(
    corpus: Iterable[Sequence[str]], min_count: int = 1, lowercase: bool = False
) -> Vocabulary:
    """Count words and keep those occurring at least ``min_count`` times.

    Args:
        corpus: Raw token sequences
        min_count: Frequency threshold, at least 1
        lowercase: Fold case before counting (and in later lookups)

    Returns:
        Vocabulary ordered by descending count, ties broken lexicographically
    """
    if min_count < 1:
        raise ValidationError(f"min_count must be >= 1, got {min_count}")

    counter: Counter = Counter()
    for sentence in corpus:
        counter.update(t.lower() if lowercase else t for t in sentence)

    kept = sorted(
        ((word, count) for word, count in counter.items() if count >= min_count),
        key=lambda item: (-item[1], item[0]),
    )
    return Vocabulary(
        words=tuple(w for w, _ in kept),
        counts=tuple(c for _, c in kept),
        lowercase=lowercase,
        min_count=min_count,
    )


def encode_corpus(corpus: Iterable[Sequence[str]], vocabulary: Vocabulary) -> TokenizedCorpus:
    """Map tokens to ids, dropping out-of-vocabulary tokens and empty sentences."""
    sentences = []
    for sentence in corpus:
        ids = [i for i in vocabulary.encode(sentence) if i != vocabulary.unknown_id]
        if ids:
            sentences.append(np.asarray(ids, dtype=np.int64))
    return TokenizedCorpus(sentences=sentences, vocabulary=vocabulary)


def _index(value: Any, name: str, path: Path, line_no: int) -> int:
    # bool is an int subclass but never a valid index
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"'{name}' must be an integer, got {value!r}", path, line_no)
    return value


def _parse_record(record: Dict, path: Path, line_no: int) -> AnnotatedSentence:
    if not isinstance(record, dict):
        raise FormatError("record must be a JSON object", path, line_no)
    try:
        tokens = record["tokens"]
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise FormatError("'tokens' must be an array of strings", path, line_no)
        mentions = [
            EntityMention(
                _index(m["begin"], "begin", path, line_no),
                _index(m["end"], "end", path, line_no),
                str(m["type"]),
            )
            for m in record.get("mentions", [])
        ]
        relations = [
            RelationTriple(
                _index(r["m1"], "m1", path, line_no),
                _index(r["m2"], "m2", path, line_no),
                str(r["label"]),
            )
            for r in record.get("relations", [])
        ]
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"malformed record: {e!r}", path, line_no)

    doc_id = record.get("doc_id")
    sentence = AnnotatedSentence(
        tokens=tokens,
        mentions=mentions,
        relations=relations,
        doc_id=None if doc_id is None else str(doc_id),
    )
    try:
        sentence.validate()
    except ValidationError as e:
        raise ValidationError(f"{path}:{line_no}: {e}")
    return sentence


def load_annotated(path: Union[str, Path]) -> List[AnnotatedSentence]:
    """Parse annotated RE data from JSON lines.

    Raises:
        FormatError: A line is not a well-formed record (with its line number)
        ValidationError: A record violates the sentence invariants
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"annotated data file not found: {path}")

    sentences = []
    with reading(path), open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e.msg}", path, line_no)
            sentences.append(_parse_record(record, path, line_no))

    logger.info(f"Loaded {len(sentences)} annotated sentences from {path}")
    return sentences


def save_annotated(path: Union[str, Path], sentences: Iterable[AnnotatedSentence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sentence in sentences:
            f.write(json.dumps(sentence.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def generate_candidates(
    sentence: AnnotatedSentence, vocabulary: Optional[Vocabulary] = None
) -> List[RelationExample]:
    """Enumerate every ordered-left-to-right mention pair of a sentence.

    Pairs with a gold relation carry its label, all others ``"O"``. Pairs whose
    spans overlap are skipped.

    Args:
        sentence: A valid annotated sentence
        vocabulary: If given, token ids are filled in

    Returns:
        Candidates ordered by the left mention, then the right mention
    """
    gold = {frozenset((r.m1, r.m2)): r.label for r in sentence.relations}
    order = sorted(range(len(sentence.mentions)), key=lambda i: (
        sentence.mentions[i].begin, sentence.mentions[i].end, i))
    tokens = tuple(sentence.tokens)
    token_ids = tuple(vocabulary.encode(tokens)) if vocabulary is not None else ()

    examples = []
    for a_pos, a in enumerate(order):
        for b in order[a_pos + 1:]:
            left, right = sentence.mentions[a], sentence.mentions[b]
            if left.overlaps(right):
                continue
            examples.append(
                RelationExample(
                    tokens=tokens,
                    mention1=left,
                    mention2=right,
                    label=gold.get(frozenset((a, b)), NO_RELATION),
                    token_ids=token_ids,
                )
            )
    return examples


def candidates_for(
    sentences: Iterable[AnnotatedSentence], vocabulary: Optional[Vocabulary] = None
) -> List[RelationExample]:
    examples = []
    for sentence in sentences:
        examples.extend(generate_candidates(sentence, vocabulary))
    return examples


def group_documents(sentences: Iterable[AnnotatedSentence]) -> List[List[AnnotatedSentence]]:
    """Group sentences by ``doc_id`` in first-appearance order."""
    documents: Dict[str, List[AnnotatedSentence]] = {}
    for i, sentence in enumerate(sentences):
        key = sentence.doc_id if sentence.doc_id is not None else f"\0sentence-{i}"
        documents.setdefault(key, []).append(sentence)
    return list(documents.values())


def split_dataset(
    documents: Sequence[T],
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> Tuple[List[T], List[T], List[T]]:
    """Random document-level train/dev/test split.

    Sizes are the ratio shares rounded half up; the test split takes the
    remainder.

    Raises:
        ValidationError: Bad ratios, or fewer than 3 documents when all three
            ratios are nonzero
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    n = len(documents)
    if all(r > 0 for r in ratios) and n < 3:
        raise ValidationError(f"need at least 3 documents for a three-way split, got {n}")

    n_train = min(n, int(np.floor(n * ratios[0] + 0.5)))
    n_dev = min(n - n_train, int(np.floor(n * ratios[1] + 0.5)))

    order = np.random.default_rng(seed).permutation(n)
    shuffled = [documents[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:n_train + n_dev], shuffled[n_train + n_dev:]


def flatten(documents: Iterable[Sequence[T]]) -> List[T]:
    return [item for document in documents for item in document]


def load_dictionary(path: Union[str, Path]) -> BilingualDictionary:
    """Read a ``source<TAB>target`` dictionary; repeated target words keep the first entry."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"dictionary file not found: {path}")

    pairs = []
    seen = set()
    duplicates = 0
    with reading(path), open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise FormatError("expected 'source<TAB>target'", path, line_no)
            source, target = parts
            if target in seen:
                duplicates += 1
                continue
            seen.add(target)
            pairs.append((source, target))

    if duplicates:
        logger.warning(f"Ignored {duplicates} repeated target words in {path}")
    return BilingualDictionary(pairs)


def save_dictionary(path: Union[str, Path], dictionary: BilingualDictionary) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for source, target in dictionary.pairs:
            f.write(f"{source}\t{target}\n")
