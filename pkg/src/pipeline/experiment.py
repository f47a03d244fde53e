"""End-to-end experiment: data, embeddings, source model, mapping, transfer, evaluation.

Every artifact goes under ``RunConfig.output_dir``; the final report is written
as one JSON record (``report.json``) and a human table (``report.txt``).
"""

import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from ..config import RunConfig
from ..corpus import (
    AnnotatedSentence,
    BilingualDictionary,
    RelationExample,
    build_vocabulary,
    candidates_for,
    encode_corpus,
    flatten,
    group_documents,
    load_annotated,
    load_dictionary,
    read_corpus,
    split_dataset,
)
from ..embeddings import CbowConfig, WordEmbeddings, save_embeddings, train_cbow
from ..errors import StageError, XLREError
from ..mapping import learn_mapping, orthogonality_error, save_mapping
from ..remodel.checkpoint import save_model
from ..remodel.model import REModelConfig, REModelParams
from ..remodel.training import train
from .evaluation import EvalReport, evaluate, format_report, relative_performance, save_predictions
from .sweep import (
    ComparisonRow,
    comparison_csv,
    compare_mappings,
    dictionary_sweep,
    format_comparison,
    write_text,
)
from .synthetic import SyntheticConfig, generate_synthetic
from .transfer import ensemble_dataset, predict_dataset, train_ensemble, transfer_dataset

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"


@contextmanager
def stage(name: str):
    """Run one experiment stage, wrapping any failure in a StageError."""
    logger.info(f"Stage: {name}")
    try:
        yield
    except StageError:
        raise
    except (XLREError, ArithmeticError, ValueError, OSError) as e:
        raise StageError(name, e) from e


@dataclass
class LanguageData:
    corpus: List[List[str]]
    annotated: List[AnnotatedSentence]


@dataclass
class ExperimentResult:
    report: Dict[str, Any]
    output_dir: Path
    artifacts: Dict[str, str] = field(default_factory=dict)

    @property
    def transfer_f1(self) -> float:
        return self.report["transfer"]["f1"]


def _load_data(config: RunConfig, data_dir: Path) -> Tuple[LanguageData, LanguageData, BilingualDictionary]:
    if config.synthetic:
        benchmark = generate_synthetic(
            SyntheticConfig(
                vocab_size=config.vocab_size,
                corpus_tokens=config.corpus_tokens,
                num_relations=config.num_relations,
                annotated_sentences=config.annotated_sentences,
                seed=config.seed,
            )
        )
        benchmark.save(data_dir)
        return (
            LanguageData(benchmark.source_corpus, benchmark.source_annotated),
            LanguageData(benchmark.target_corpus, benchmark.target_annotated),
            benchmark.dictionary(),
        )
    source = LanguageData(
        read_corpus(config.source_corpus, config.lowercase), load_annotated(config.source_data)
    )
    target = LanguageData(
        read_corpus(config.target_corpus, config.lowercase), load_annotated(config.target_data)
    )
    return source, target, load_dictionary(config.dictionary)


def _split(config: RunConfig, sentences: Sequence[AnnotatedSentence]):
    train_docs, dev_docs, test_docs = split_dataset(
        group_documents(sentences), tuple(config.split_ratios), config.seed
    )
    return flatten(train_docs), flatten(dev_docs), flatten(test_docs)


def _embeddings(config: RunConfig, corpus: List[List[str]], seed: int) -> WordEmbeddings:
    vocabulary = build_vocabulary(corpus, config.min_count, config.lowercase)
    cbow = CbowConfig(
        dim=config.embedding_dim,
        window=config.window,
        epochs=config.cbow_epochs,
        learning_rate=config.cbow_lr,
        min_count=config.min_count,
        seed=seed,
        monitor=False,
        show_progress=config.show_progress,
    )
    return train_cbow(encode_corpus(corpus, vocabulary), cbow).word_embeddings()


def _model_config(config: RunConfig, normalized: bool) -> REModelConfig:
    return REModelConfig(
        context_kind=config.context,
        word_dim=config.embedding_dim,
        entity_label_dim=config.entity_label_dim,
        hidden_dim=config.hidden_dim,
        cnn_window=config.cnn_window,
        dropout_rate=config.dropout,
        learning_rate=config.re_lr,
        max_epochs=config.max_epochs,
        patience=config.patience,
        batch_size=config.batch_size,
        seed=config.seed,
        normalize_embeddings=normalized,
        show_progress=config.show_progress,
    )


def _score(params: REModelParams, predictions, examples: Sequence[RelationExample]) -> EvalReport:
    return evaluate([label for label, _ in predictions], [ex.label for ex in examples], params.labels)


def run_experiment(config: RunConfig) -> ExperimentResult:
    """Execute the full transfer protocol described by ``config``.

    Raises:
        ValidationError: The configuration is invalid (checked before any work)
        StageError: A stage failed; the message names the stage
    """
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: Dict[str, str] = {}
    report: Dict[str, Any] = {"config": config.to_dict()}
    normalized = config.mapping_kind != "regular"

    with stage("data"):
        source, target, dictionary = _load_data(config, out / "data")

    with stage("split"):
        src_train, src_dev, src_test = _split(config, source.annotated)
        tgt_train, tgt_dev, tgt_test = _split(config, target.annotated)
        src_train_ex, src_dev_ex, src_test_ex = (
            candidates_for(src_train), candidates_for(src_dev), candidates_for(src_test)
        )
        tgt_dev_ex, tgt_test_ex = candidates_for(tgt_dev), candidates_for(tgt_test)
        report["data"] = {
            "source_sentences": [len(src_train), len(src_dev), len(src_test)],
            "target_sentences": [len(tgt_train), len(tgt_dev), len(tgt_test)],
            "source_candidates": [len(src_train_ex), len(src_dev_ex), len(src_test_ex)],
            "target_test_candidates": len(tgt_test_ex),
            "dictionary_entries": len(dictionary),
        }

    with stage("embeddings"):
        source_emb = _embeddings(config, source.corpus, config.seed)
        target_emb = _embeddings(config, target.corpus, config.seed + 1)
        for name, emb in (("source.vec", source_emb), ("target.vec", target_emb)):
            save_embeddings(out / name, emb)
            artifacts[name] = name

    with stage("train-source"):
        source_model = train(src_train_ex, src_dev_ex, _model_config(config, normalized), source_emb)
        save_model(out / "source_model.json", source_model)
        artifacts["source_model"] = "source_model.json"
        native = _score(source_model, predict_dataset(source_model, src_test_ex), src_test_ex)
        report["source_test"] = native.to_dict()
        report["training"] = source_model.history.to_dict()

    with stage("mapping"):
        ranked = dictionary.sorted_by_target_frequency(target_emb.vocabulary)
        seed_dictionary = ranked.top(config.dictionary_size)
        mapping = learn_mapping(
            config.mapping_kind, seed_dictionary, source_emb, target_emb, config.self_learn_iters
        )
        save_mapping(out / "mapping.map", mapping)
        artifacts["mapping"] = "mapping.map"
        report["mapping"] = {
            "kind": config.mapping_kind,
            "dictionary_size": len(seed_dictionary),
            "orthogonality_error": orthogonality_error(mapping.matrix) if normalized else None,
        }

    with stage("transfer"):
        predictions = transfer_dataset(mapping, source_model, tgt_test_ex, target_emb)
        save_predictions(out / "transfer_predictions.jsonl", tgt_test_ex, predictions)
        artifacts["predictions"] = "transfer_predictions.jsonl"

    with stage("evaluate"):
        transfer_report = _score(source_model, predictions, tgt_test_ex)
        report["transfer"] = transfer_report.to_dict()
        report["transfer_vs_source"] = round(relative_performance(transfer_report, native), 6)

    if config.supervised_baseline:
        with stage("supervised-baseline"):
            tgt_train_ex = candidates_for(tgt_train)
            supervised = train(tgt_train_ex, tgt_dev_ex, _model_config(config, normalized), target_emb)
            supervised_report = _score(
                supervised, predict_dataset(supervised, tgt_test_ex), tgt_test_ex
            )
            report["supervised_target"] = supervised_report.to_dict()
            report["transfer_vs_supervised"] = round(
                relative_performance(transfer_report, supervised_report), 6
            )

    if config.sweep_sizes:
        with stage("sweep"):
            sweep_model = source_model
            if normalized:
                sweep_model = train(src_train_ex, src_dev_ex, _model_config(config, False), source_emb)
            sweep = dictionary_sweep(
                config.sweep_sizes, dictionary, source_emb, target_emb, sweep_model, tgt_dev_ex
            )
            write_text(out / "sweep.csv", sweep.to_csv())
            artifacts["sweep"] = "sweep.csv"
            report["sweep"] = [{"size": size, "f1": round(f1, 6)} for size, f1 in sweep.rows]

    if config.compare_mappings:
        with stage("compare-mappings"):
            regular_model = source_model if not normalized else train(
                src_train_ex, src_dev_ex, _model_config(config, False), source_emb
            )
            normalized_model = source_model if normalized else train(
                src_train_ex, src_dev_ex, _model_config(config, True), source_emb
            )
            rows = compare_mappings(
                seed_dictionary, source_emb, target_emb, regular_model, normalized_model,
                tgt_test_ex, max_iters=config.self_learn_iters,
            )
            write_text(out / "comparison.csv", comparison_csv(rows))
            artifacts["comparison"] = "comparison.csv"
            report["comparison"] = [row.to_dict() for row in rows]

    if config.ensemble:
        with stage("ensemble"):
            models = train_ensemble(
                src_train_ex, src_dev_ex, _model_config(config, normalized), source_emb,
                config.ensemble_size,
            )
            labels = ensemble_dataset(models, tgt_test_ex, mapping, target_emb)
            ensemble_report = evaluate(labels, [ex.label for ex in tgt_test_ex], source_model.labels)
            report["ensemble"] = ensemble_report.to_dict()

    report["artifacts"] = artifacts
    write_report(out, report, transfer_report, native)
    return ExperimentResult(report, out, artifacts)


def write_report(out: Path, report: Dict[str, Any], transfer: EvalReport, native: EvalReport) -> None:
    (out / REPORT_JSON).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    sections = [
        format_report(native, "Source test (native)"),
        "",
        format_report(transfer, "Target test (transfer)"),
    ]
    if "comparison" in report:
        rows = [ComparisonRow(**row) for row in report["comparison"]]
        sections += ["", format_comparison(rows)]
    (out / REPORT_TEXT).write_text("\n".join(sections) + "\n", encoding="utf-8")
    logger.info(f"Transfer F1 {transfer.f1:.2f} (source F1 {native.f1:.2f}); report in {out}")
