"""Configuration for the command-line tools.

Defaults come from the environment (a ``.env`` file is honoured through
python-dotenv), experiment settings come from a flat ``key=value`` file, and
command-line flags override both.
"""

import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

from dotenv import dotenv_values, load_dotenv

from .errors import ValidationError, reading

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
ENV_PREFIX = "XLRE_"

logger = logging.getLogger(__name__)


def load_environment() -> None:
    """Load a ``.env`` file from the working directory, if any."""
    load_dotenv()


def env_str(name: str, default: str) -> str:
    return os.getenv(ENV_PREFIX + name, default)


def env_int(name: str, default: int) -> int:
    raw = os.getenv(ENV_PREFIX + name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{ENV_PREFIX}{name} must be an integer, got {raw!r}")


def env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(ENV_PREFIX + name)
    if raw is None or raw.strip() == "":
        return default
    return _parse_bool(raw, ENV_PREFIX + name)


def setup_logging(verbosity: int = 0) -> None:
    """Configure root logging on standard error.

    Args:
        verbosity: 0 keeps ``XLRE_LOG_LEVEL`` (default INFO), positive values
            lower the threshold to DEBUG, negative values raise it to WARNING.
    """
    level_name = env_str("LOG_LEVEL", "INFO").upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        level = logging.INFO
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING

    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _parse_bool(raw: str, key: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"{key} must be a boolean, got {raw!r}")


def _parse_int_list(raw: str, key: str) -> Tuple[int, ...]:
    if not raw.strip():
        return ()
    try:
        return tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise ValidationError(f"{key} must be a comma-separated list of integers, got {raw!r}")


def _parse_float_list(raw: str, key: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ValidationError(f"{key} must be a comma-separated list of numbers, got {raw!r}")


@dataclass
class RunConfig:
    """Everything one ``run-experiment`` invocation needs.

    Paths are resolved relative to the config file. With ``synthetic`` set, the
    corpora and annotated data are generated instead of read.
    """

    output_dir: Path = Path("xlre-output")
    seed: int = 0
    show_progress: bool = False

    # data
    synthetic: bool = True
    vocab_size: int = 2000
    corpus_tokens: int = 200_000
    num_relations: int = 4
    annotated_sentences: int = 1000
    source_corpus: Optional[Path] = None
    target_corpus: Optional[Path] = None
    source_data: Optional[Path] = None
    target_data: Optional[Path] = None
    dictionary: Optional[Path] = None
    lowercase: bool = False
    split_ratios: Tuple[float, ...] = (0.8, 0.1, 0.1)

    # embeddings
    embedding_dim: int = 300
    window: int = 5
    cbow_epochs: int = 5
    cbow_lr: float = 0.025
    min_count: int = 1

    # relation model
    context: str = "bilstm"
    hidden_dim: Optional[int] = None
    entity_label_dim: int = 50
    cnn_window: int = 3
    dropout: float = 0.5
    re_lr: float = 1e-3
    max_epochs: int = 50
    patience: int = 5
    batch_size: int = 16

    # mapping and transfer
    mapping_kind: str = "regular"
    dictionary_size: int = 1000
    self_learn_iters: int = 10
    sweep_sizes: Tuple[int, ...] = ()
    compare_mappings: bool = False
    ensemble: bool = False
    ensemble_size: int = 5
    supervised_baseline: bool = False

    def validate(self) -> None:
        """Check value ranges and that every referenced input path exists."""
        if self.context not in ("pass_through", "bilstm", "cnn"):
            raise ValidationError(f"context must be pass_through, bilstm or cnn, got {self.context!r}")
        if self.mapping_kind not in ("regular", "orthogonal", "self-learn"):
            raise ValidationError(
                f"mapping_kind must be regular, orthogonal or self-learn, got {self.mapping_kind!r}"
            )
        if self.embedding_dim < 1 or self.window < 1:
            raise ValidationError("embedding_dim and window must be >= 1")
        if self.dictionary_size < 1:
            raise ValidationError("dictionary_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.ensemble and self.ensemble_size < 1:
            raise ValidationError("ensemble_size must be >= 1")

        if not self.synthetic:
            for name in ("source_corpus", "target_corpus", "source_data", "target_data", "dictionary"):
                path = getattr(self, name)
                if path is None:
                    raise ValidationError(f"{name} is required when synthetic=false")
        for name in ("source_corpus", "target_corpus", "source_data", "target_data", "dictionary"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValidationError(f"{name} not found: {path}")

    def to_dict(self) -> Dict[str, Any]:
        data = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            data[item.name] = value
        return data


Parser = Callable[[str, str], Any]

# key -> (parser, description); mirrors the RunConfig fields.
RUN_CONFIG_KEYS: Dict[str, Tuple[Parser, str]] = {
    "output_dir": (lambda v, k: Path(v), "directory receiving every artifact and the report"),
    "seed": (lambda v, k: _int(v, k), "global seed propagated to every stochastic component"),
    "show_progress": (_parse_bool, "draw progress bars on standard error"),
    "synthetic": (_parse_bool, "generate the synthetic bilingual benchmark instead of reading data"),
    "vocab_size": (lambda v, k: _int(v, k), "synthetic vocabulary size per language"),
    "corpus_tokens": (lambda v, k: _int(v, k), "synthetic monolingual corpus size per language"),
    "num_relations": (lambda v, k: _int(v, k), "number of synthetic relation types"),
    "annotated_sentences": (lambda v, k: _int(v, k), "number of synthetic annotated sentences"),
    "source_corpus": (lambda v, k: Path(v), "source-language text, one sentence per line"),
    "target_corpus": (lambda v, k: Path(v), "target-language text, one sentence per line"),
    "source_data": (lambda v, k: Path(v), "annotated source-language RE data (JSON lines)"),
    "target_data": (lambda v, k: Path(v), "annotated target-language RE data (JSON lines)"),
    "dictionary": (lambda v, k: Path(v), "bilingual dictionary, source<TAB>target per line"),
    "lowercase": (_parse_bool, "lowercase tokens before vocabulary lookup"),
    "split_ratios": (_parse_float_list, "train,dev,test document ratios"),
    "embedding_dim": (lambda v, k: _int(v, k), "word embedding dimension d"),
    "window": (lambda v, k: _int(v, k), "CBOW context window c"),
    "cbow_epochs": (lambda v, k: _int(v, k), "CBOW training epochs"),
    "cbow_lr": (lambda v, k: _float(v, k), "CBOW initial learning rate"),
    "min_count": (lambda v, k: _int(v, k), "minimum word count kept in the vocabulary"),
    "context": (lambda v, k: v.strip(), "RE context layer: pass_through, bilstm or cnn"),
    "hidden_dim": (lambda v, k: _int(v, k), "context hidden size (per LSTM direction)"),
    "entity_label_dim": (lambda v, k: _int(v, k), "entity label embedding size d_m"),
    "cnn_window": (lambda v, k: _int(v, k), "CNN window size k (odd)"),
    "dropout": (lambda v, k: _float(v, k), "dropout rate on context-layer outputs"),
    "re_lr": (lambda v, k: _float(v, k), "Adam learning rate"),
    "max_epochs": (lambda v, k: _int(v, k), "maximum RE training epochs"),
    "patience": (lambda v, k: _int(v, k), "early-stopping patience in epochs"),
    "batch_size": (lambda v, k: _int(v, k), "RE minibatch size"),
    "mapping_kind": (lambda v, k: v.strip(), "regular, orthogonal or self-learn"),
    "dictionary_size": (lambda v, k: _int(v, k), "number of most frequent dictionary pairs used"),
    "self_learn_iters": (lambda v, k: _int(v, k), "maximum self-learning iterations"),
    "sweep_sizes": (_parse_int_list, "dictionary sizes for the sweep, comma separated"),
    "compare_mappings": (_parse_bool, "also report every mapping kind side by side"),
    "ensemble": (_parse_bool, "also evaluate an ensemble of source models"),
    "ensemble_size": (lambda v, k: _int(v, k), "number of models in the ensemble"),
    "supervised_baseline": (_parse_bool, "train a supervised target model for relative scores"),
}

_PATH_KEYS = ("source_corpus", "target_corpus", "source_data", "target_data", "dictionary")


def _int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{key} must be an integer, got {raw!r}")


def _float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValidationError(f"{key} must be a number, got {raw!r}")


def default_run_config() -> RunConfig:
    """RunConfig populated from ``XLRE_*`` environment defaults."""
    config = RunConfig()
    config.seed = env_int("SEED", config.seed)
    config.show_progress = env_bool("SHOW_PROGRESS", config.show_progress)
    config.embedding_dim = env_int("EMBEDDING_DIM", config.embedding_dim)
    config.context = env_str("CONTEXT", config.context)
    config.mapping_kind = env_str("MAPPING_KIND", config.mapping_kind)
    config.dictionary_size = env_int("DICTIONARY_SIZE", config.dictionary_size)
    return config


def load_run_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a flat ``key=value`` experiment file.

    Args:
        path: Config file; relative paths inside it resolve against its directory.
        overrides: Already-parsed values (e.g. from command-line flags) applied last.

    Returns:
        A validated RunConfig

    Raises:
        ValidationError: Missing file, unknown key, bad value or missing input path.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")

    config = default_run_config()
    with reading(path):
        values = dotenv_values(path)
    base_dir = path.parent

    for key, raw in values.items():
        if key not in RUN_CONFIG_KEYS:
            raise ValidationError(f"{path}: unknown config key {key!r}")
        if raw is None:
            raise ValidationError(f"{path}: config key {key!r} has no value")
        parser, _ = RUN_CONFIG_KEYS[key]
        value = parser(raw, key)
        if key in _PATH_KEYS or key == "output_dir":
            value = value if value.is_absolute() else base_dir / value
        setattr(config, key, value)

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)

    config.validate()
    logger.debug(f"Loaded run config from {path}: {config.to_dict()}")
    return config
