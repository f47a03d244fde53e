"""Dictionary-size sweep and the mapping-kind comparison."""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from ..corpus import BilingualDictionary, RelationExample
from ..embeddings import WordEmbeddings
from ..errors import ValidationError
from ..mapping import build_pairs, learn_orthogonal, learn_regular, self_learn
from ..remodel.model import REModelParams
from .evaluation import EvalReport, evaluate
from .transfer import transfer_dataset

logger = logging.getLogger(__name__)

COMPARISON_KINDS = ("regular", "orthogonal", "self-learn")


@dataclass
class SweepResult:
    """Target dev F1 per dictionary size, sizes strictly increasing."""

    rows: List[Tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        sizes = [size for size, _ in self.rows]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValidationError(f"sweep sizes must be strictly increasing, got {sizes}")

    @property
    def sizes(self) -> List[int]:
        return [size for size, _ in self.rows]

    def f1_at(self, size: int) -> float:
        for s, f1 in self.rows:
            if s == size:
                return f1
        raise KeyError(size)

    def to_csv(self) -> str:
        lines = ["size,f1"] + [f"{size},{f1:.4f}" for size, f1 in self.rows]
        return "\n".join(lines) + "\n"


def _check_sizes(sizes: Sequence[int], available: int) -> None:
    if not sizes:
        raise ValidationError("sweep needs at least one dictionary size")
    for size in sizes:
        if size < 1:
            raise ValidationError(f"dictionary size must be >= 1, got {size}")
        if size > available:
            raise ValidationError(f"dictionary size {size} exceeds the {available} available pairs")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError(f"sweep sizes must be strictly increasing, got {list(sizes)}")


def score(
    params: REModelParams,
    predictions: Sequence[Tuple[str, object]],
    examples: Sequence[RelationExample],
) -> EvalReport:
    return evaluate([label for label, _ in predictions], [ex.label for ex in examples], params.labels)


def dictionary_sweep(
    sizes: Sequence[int],
    full_dictionary: BilingualDictionary,
    source: WordEmbeddings,
    target: WordEmbeddings,
    params: REModelParams,
    target_dev: Sequence[RelationExample],
) -> SweepResult:
    """Learn a regular mapping on the top-``size`` pairs for each size and score transfer.

    Pairs are ranked by target-word frequency; only the mapping is re-learned.

    Raises:
        ValidationError: Sizes not strictly increasing, zero, or larger than the dictionary
    """
    sizes = list(sizes)
    ranked = full_dictionary.sorted_by_target_frequency(target.vocabulary)
    _check_sizes(sizes, len(ranked))

    rows = []
    for size in sizes:
        pairs, _ = build_pairs(ranked.top(size), source, target)
        mapping = learn_regular(pairs)
        report = score(params, transfer_dataset(mapping, params, target_dev, target), target_dev)
        logger.info(f"Dictionary size {size}: F1 {report.f1:.2f}")
        rows.append((size, report.f1))
    return SweepResult(rows)


@dataclass
class ComparisonRow:
    language: str
    kind: str
    precision: float
    recall: float
    f1: float

    def to_dict(self):
        return {
            "language": self.language,
            "kind": self.kind,
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "f1": round(self.f1, 6),
        }


def compare_mappings(
    dictionary: BilingualDictionary,
    source: WordEmbeddings,
    target: WordEmbeddings,
    regular_model: REModelParams,
    normalized_model: Optional[REModelParams],
    target_examples: Sequence[RelationExample],
    language: str = "target",
    kinds: Sequence[str] = COMPARISON_KINDS,
    max_iters: int = 10,
) -> List[ComparisonRow]:
    """Score transfer with each mapping kind.

    The regular mapping uses ``regular_model``; the orthogonal and
    self-learned mappings need a model trained on length-normalized
    embeddings (``normalized_model``).
    """
    pairs, _ = build_pairs(dictionary, source, target)
    rows = []
    for kind in kinds:
        if kind == "regular":
            mapping, model = learn_regular(pairs), regular_model
        elif kind == "orthogonal":
            mapping, model = learn_orthogonal(pairs), normalized_model
        elif kind == "self-learn":
            mapping, model = self_learn(dictionary, source, target, max_iters).mapping, normalized_model
        else:
            raise ValidationError(f"Unknown mapping kind: {kind}. Choose: regular, orthogonal, or self-learn")
        if model is None:
            raise ValidationError(f"{kind} mapping comparison needs a model on normalized embeddings")
        report = score(model, transfer_dataset(mapping, model, target_examples, target), target_examples)
        logger.info(f"{language} / {kind}: F1 {report.f1:.2f}")
        rows.append(ComparisonRow(language, kind, report.precision, report.recall, report.f1))
    return rows


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["language", "kind", "precision", "recall", "f1"])
    for row in rows:
        writer.writerow([row.language, row.kind, f"{row.precision:.4f}", f"{row.recall:.4f}", f"{row.f1:.4f}"])
    return buffer.getvalue()


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    lines = [f"{'language':<12}{'mapping':<14}{'P':>10}{'R':>10}{'F1':>10}", "-" * 56]
    for row in rows:
        lines.append(
            f"{row.language:<12}{row.kind:<14}{row.precision:>10.2f}{row.recall:>10.2f}{row.f1:>10.2f}"
        )
    return "\n".join(lines)


def write_text(path: Union[str, Path], text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
