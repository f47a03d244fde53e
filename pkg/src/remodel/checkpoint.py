"""Save and load trained relation models.

A checkpoint is a single JSON document holding the configuration, the label
and entity-type sets, the vocabulary, the frozen word table and every trained
tensor. Keys are sorted and floats are written with full precision, so saving
the same model twice gives identical bytes and loading restores it exactly.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from ..corpus import Vocabulary
from ..embeddings import WordEmbeddings
from ..errors import FormatError, ValidationError, reading
from .model import REModelConfig, REModelParams, TrainingHistory

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "xlre-re-model"
CHECKPOINT_VERSION = 1


def _encode_array(array: np.ndarray) -> Dict[str, Any]:
    return {"shape": list(array.shape), "data": [float(x) for x in array.ravel()]}


def _decode_array(data: Dict[str, Any], name: str, path: Path) -> np.ndarray:
    try:
        return np.asarray(data["data"], dtype=float).reshape(data["shape"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad tensor {name!r}: {e}", path)


def checkpoint_dict(params: REModelParams) -> Dict[str, Any]:
    vocab = params.embeddings.vocabulary
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "labels": list(params.config.label_set),
        "entity_types": list(params.config.entity_type_set),
        "vocabulary": {
            "words": list(vocab.words),
            "counts": [int(c) for c in vocab.counts],
            "lowercase": vocab.lowercase,
            "min_count": vocab.min_count,
        },
        "word_table": _encode_array(params.embeddings.matrix),
        "tensors": {name: _encode_array(value) for name, value in params.tensors.items()},
        "history": params.history.to_dict(),
    }


def save_model(path: Union[str, Path], params: REModelParams) -> None:
    """Write a model checkpoint to ``path``."""
    text = json.dumps(checkpoint_dict(params), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")
    logger.info(f"Saved {params.config.context_kind} relation model to {path}")


def load_model(path: Union[str, Path]) -> REModelParams:
    """Read a checkpoint written by ``save_model``.

    Raises:
        ValidationError: Missing file
        FormatError: Not a checkpoint of a supported version, or malformed content
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"model checkpoint not found: {path}")
    try:
        with reading(path):
            data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno)

    if not isinstance(data, dict) or data.get("format") != CHECKPOINT_FORMAT:
        raise FormatError("not a relation model checkpoint", path)
    if data.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {data.get('version')!r}", path)

    try:
        config = REModelConfig.from_dict(data["config"])
        vocab_data = data["vocabulary"]
        vocabulary = Vocabulary(
            words=tuple(vocab_data["words"]),
            counts=tuple(vocab_data["counts"]),
            lowercase=bool(vocab_data["lowercase"]),
            min_count=int(vocab_data["min_count"]),
        )
        table = _decode_array(data["word_table"], "word_table", path)
        tensors = {
            name: _decode_array(value, name, path) for name, value in data["tensors"].items()
        }
        history = TrainingHistory(**data.get("history", {}))
    except (KeyError, TypeError) as e:
        raise FormatError(f"missing or malformed field: {e}", path)

    return REModelParams(config, tensors, WordEmbeddings(vocabulary, table), history)
