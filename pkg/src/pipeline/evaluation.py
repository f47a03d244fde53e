"""Micro-averaged precision, recall and F1 over relation candidates.

Only non-"O" labels count: a true positive is a correct non-"O" prediction, a
false positive a non-"O" prediction that is wrong, a false negative a non-"O"
gold label that was missed.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Union

from sklearn.metrics import multilabel_confusion_matrix

from ..corpus import NO_RELATION
from ..errors import FormatError, ValidationError, reading


@dataclass
class LabelCounts:
    true_positive: int = 0
    false_positive: int = 0
    false_negative: int = 0

    def to_dict(self) -> Dict[str, int]:
        return {
            "tp": self.true_positive,
            "fp": self.false_positive,
            "fn": self.false_negative,
        }


@dataclass
class EvalReport:
    """Precision, recall and F1 as percentages, with per-label counts."""

    precision: float
    recall: float
    f1: float
    per_label: Dict[str, LabelCounts] = field(default_factory=dict)

    @property
    def true_positive(self) -> int:
        return sum(c.true_positive for c in self.per_label.values())

    @property
    def false_positive(self) -> int:
        return sum(c.false_positive for c in self.per_label.values())

    @property
    def false_negative(self) -> int:
        return sum(c.false_negative for c in self.per_label.values())

    def to_dict(self) -> Dict:
        return {
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "f1": round(self.f1, 6),
            "tp": self.true_positive,
            "fp": self.false_positive,
            "fn": self.false_negative,
            "per_label": {label: c.to_dict() for label, c in sorted(self.per_label.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def prf(tp: int, fp: int, fn: int):
    """Precision, recall and F1 in percent; zero where undefined."""
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate(
    predictions: Sequence[str], gold: Sequence[str], label_set: Sequence[str]
) -> EvalReport:
    """Score aligned predicted and gold labels.

    Args:
        predictions: Predicted label per candidate
        gold: Gold label per candidate, aligned with ``predictions``
        label_set: Every admissible label ("O" included or not)

    Returns:
        EvalReport with micro-averaged scores over the non-"O" labels

    Raises:
        ValidationError: Length mismatch or a label outside ``label_set``
    """
    if len(predictions) != len(gold):
        raise ValidationError(
            f"{len(predictions)} predictions for {len(gold)} gold labels"
        )
    allowed = set(label_set) | {NO_RELATION}
    unknown = (set(predictions) | set(gold)) - allowed
    if unknown:
        raise ValidationError(f"labels outside the label set: {sorted(unknown)}")

    labels = [label for label in label_set if label != NO_RELATION]
    per_label: Dict[str, LabelCounts] = {}
    if labels and len(gold):
        matrices = multilabel_confusion_matrix(list(gold), list(predictions), labels=labels)
        for label, matrix in zip(labels, matrices):
            per_label[label] = LabelCounts(
                true_positive=int(matrix[1, 1]),
                false_positive=int(matrix[0, 1]),
                false_negative=int(matrix[1, 0]),
            )
    else:
        per_label = {label: LabelCounts() for label in labels}

    tp = sum(c.true_positive for c in per_label.values())
    fp = sum(c.false_positive for c in per_label.values())
    fn = sum(c.false_negative for c in per_label.values())
    precision, recall, f1 = prf(tp, fp, fn)
    return EvalReport(precision, recall, f1, per_label)


def relative_performance(transfer: EvalReport, supervised: EvalReport) -> float:
    """Transfer F1 as a fraction of a supervised target-language model's F1."""
    if supervised.f1 <= 0:
        return 0.0
    return transfer.f1 / supervised.f1


def format_report(report: EvalReport, title: str = "Evaluation") -> str:
    """Human-readable table of the overall and per-label scores."""
    lines = [title, "=" * 60]
    lines.append(f"{'label':<24}{'TP':>8}{'FP':>8}{'FN':>8}{'F1':>12}")
    lines.append("-" * 60)
    for label, counts in sorted(report.per_label.items()):
        _, _, f1 = prf(counts.true_positive, counts.false_positive, counts.false_negative)
        lines.append(
            f"{label:<24}{counts.true_positive:>8}{counts.false_positive:>8}"
            f"{counts.false_negative:>8}{f1:>12.2f}"
        )
    lines.append("-" * 60)
    lines.append(f"{'precision':<24}{report.precision:>36.2f}")
    lines.append(f"{'recall':<24}{report.recall:>36.2f}")
    lines.append(f"{'F1':<24}{report.f1:>36.2f}")
    return "\n".join(lines)


def score_lists(rows: List[Dict], label_set: Sequence[str]) -> EvalReport:
    """Evaluate prediction records holding ``predicted`` and ``gold`` keys."""
    return evaluate([r["predicted"] for r in rows], [r["gold"] for r in rows], label_set)


def save_predictions(path: Union[str, Path], examples: Sequence, predictions: Sequence) -> None:
    """One JSON line per candidate with ``gold``, ``predicted`` and ``probabilities``."""
    with open(path, "w", encoding="utf-8") as f:
        for example, (label, probs) in zip(examples, predictions):
            record = {
                "gold": example.label,
                "predicted": label,
                "probabilities": [round(float(p), 8) for p in probs],
            }
            f.write(json.dumps(record, sort_keys=True) + "\n")


def load_predictions(path: Union[str, Path]) -> List[Dict]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"predictions file not found: {path}")
    rows = []
    with reading(path), open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e.msg}", path, line_no)
            if not isinstance(record, dict) or "gold" not in record or "predicted" not in record:
                raise FormatError("record needs 'gold' and 'predicted'", path, line_no)
            rows.append(record)
    return rows
