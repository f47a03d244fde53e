"""Command-line entry point for cross-lingual relation extraction transfer.

One subcommand per stage of the protocol:

    xlre train-embeddings --corpus en.txt --dim 300 --out en.vec
    xlre learn-mapping --dict d.tsv --src en.vec --tgt de.vec --kind orthogonal --out m.map
    xlre train-re --train en.jsonl --dev en-dev.jsonl --emb en.vec --context bilstm --out re.json
    xlre transfer --model re.json --mapping m.map --tgt-emb de.vec --data de.jsonl --out pred.jsonl
    xlre evaluate --predictions pred.jsonl
    xlre sweep-dict --dict d.tsv --src en.vec --tgt de.vec --model re.json --data de-dev.jsonl
    xlre gen-synth --out-dir synth/
    xlre run-experiment --config experiment.env

Logs go to standard error; data goes to files or standard output. Exit codes:
0 on success, 1 on usage or validation errors, 2 on any other failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import (
    default_run_config,
    env_bool,
    env_int,
    env_str,
    load_environment,
    load_run_config,
    setup_logging,
)
from .corpus import (
    build_vocabulary,
    candidates_for,
    encode_corpus,
    load_annotated,
    load_dictionary,
    read_corpus,
    save_dictionary,
)
from .embeddings import CbowConfig, load_embeddings, save_embeddings, train_cbow
from .errors import StageError, ValidationError, XLREError
from .mapping import (
    LEARNING_METHODS,
    build_pairs,
    learn_orthogonal,
    learn_regular,
    load_mapping,
    save_mapping,
    self_learn,
)
from .pipeline.evaluation import (
    evaluate,
    format_report,
    load_predictions,
    save_predictions,
    score_lists,
)
from .pipeline.experiment import REPORT_JSON, run_experiment
from .pipeline.sweep import dictionary_sweep, write_text
from .pipeline.synthetic import SyntheticConfig, generate_synthetic
from .pipeline.transfer import ENSEMBLE_RULES, ensemble_predictions
from .remodel.checkpoint import load_model, save_model
from .remodel.model import REModelConfig
from .remodel.training import train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_FAILURE = 2


class UsageError(Exception):
    """Raised by the argument parser instead of exiting."""


class ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _int_list(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}")


def _progress(args) -> bool:
    return env_bool("SHOW_PROGRESS", True) and not args.no_progress


def cmd_train_embeddings(args) -> int:
    """Train CBOW-variant embeddings on a corpus and write them."""
    corpus = read_corpus(args.corpus, args.lowercase)
    vocabulary = build_vocabulary(corpus, args.min_count, args.lowercase)
    config = CbowConfig(
        dim=args.dim,
        window=args.window,
        epochs=args.epochs,
        learning_rate=args.lr,
        min_count=args.min_count,
        seed=args.seed,
        monitor=args.monitor,
        show_progress=_progress(args),
    )
    model = train_cbow(encode_corpus(corpus, vocabulary), config)
    save_embeddings(args.out, model)
    return EXIT_OK


def cmd_learn_mapping(args) -> int:
    """Learn a target-to-source mapping from a bilingual dictionary."""
    source = load_embeddings(args.src, args.lowercase)
    target = load_embeddings(args.tgt, args.lowercase)
    dictionary = load_dictionary(args.dict)
    if args.size is not None:
        dictionary = dictionary.sorted_by_target_frequency(target.vocabulary).top(args.size)

    if args.kind == "self-learn":
        result = self_learn(dictionary, source, target, args.max_iters)
        mapping = result.mapping
        logger.info(f"Self-learning finished after {result.iterations} iterations")
        if args.induced_dict:
            save_dictionary(args.induced_dict, result.dictionary)
    else:
        pairs, _ = build_pairs(dictionary, source, target)
        mapping = learn_regular(pairs) if args.kind == "regular" else learn_orthogonal(pairs)

    save_mapping(args.out, mapping)
    logger.info(f"Wrote {args.kind} mapping ({mapping.dim} x {mapping.dim}) to {args.out}")
    return EXIT_OK


def cmd_train_re(args) -> int:
    """Train a relation extraction model on annotated data."""
    embeddings = load_embeddings(args.emb, args.lowercase)
    train_examples = candidates_for(load_annotated(args.train))
    dev_examples = candidates_for(load_annotated(args.dev)) if args.dev else []
    config = REModelConfig(
        context_kind=args.context,
        word_dim=embeddings.dim,
        entity_label_dim=args.entity_label_dim,
        hidden_dim=args.hidden_dim,
        cnn_window=args.cnn_window,
        dropout_rate=args.dropout,
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        batch_size=args.batch_size,
        seed=args.seed,
        normalize_embeddings=args.normalize,
        show_progress=_progress(args),
    )
    params = train(train_examples, dev_examples, config, embeddings)
    save_model(args.out, params)
    return EXIT_OK


def cmd_transfer(args) -> int:
    """Apply source-language model(s) to target-language data through a mapping."""
    models = [load_model(path) for path in args.model]
    mapping = load_mapping(args.mapping)
    target = load_embeddings(args.tgt_emb, args.lowercase)
    examples = candidates_for(load_annotated(args.data))

    predictions = ensemble_predictions(models, examples, mapping, target, args.rule)
    save_predictions(args.out, examples, predictions)

    report = evaluate([label for label, _ in predictions], [ex.label for ex in examples], models[0].labels)
    print(format_report(report, "Transfer"))
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    """Score a predictions file, or a model on annotated data."""
    if args.predictions:
        rows = load_predictions(args.predictions)
        labels = args.labels or sorted({r["gold"] for r in rows} | {r["predicted"] for r in rows})
        report = score_lists(rows, labels)
    elif args.model and args.data:
        models = [load_model(path) for path in args.model]
        examples = candidates_for(load_annotated(args.data))
        predictions = ensemble_predictions(models, examples, rule=args.rule)
        report = evaluate(
            [label for label, _ in predictions], [ex.label for ex in examples], models[0].labels
        )
    else:
        raise ValidationError("evaluate needs --predictions, or --model and --data")

    print(format_report(report))
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_sweep_dict(args) -> int:
    """Transfer F1 on target dev data as a function of dictionary size."""
    source = load_embeddings(args.src, args.lowercase)
    target = load_embeddings(args.tgt, args.lowercase)
    params = load_model(args.model)
    examples = candidates_for(load_annotated(args.data))
    result = dictionary_sweep(args.sizes, load_dictionary(args.dict), source, target, params, examples)
    if args.out:
        write_text(args.out, result.to_csv())
    else:
        sys.stdout.write(result.to_csv())
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    """Generate the synthetic bilingual benchmark."""
    config = SyntheticConfig(
        vocab_size=args.vocab_size,
        corpus_tokens=args.tokens,
        num_relations=args.relations,
        annotated_sentences=args.sentences,
        seed=args.seed,
    )
    paths = generate_synthetic(config).save(args.out_dir)
    for key, path in sorted(paths.items()):
        print(f"{key}\t{path}")
    return EXIT_OK


def cmd_run_experiment(args) -> int:
    """Run the full protocol described by a config file."""
    overrides = {"seed": args.seed_override, "output_dir": args.output_dir}
    if args.no_progress:
        overrides["show_progress"] = False
    if args.config:
        config = load_run_config(args.config, overrides)
    else:
        config = default_run_config()
        for key, value in overrides.items():
            if value is not None:
                setattr(config, key, value)
        config.validate()
    result = run_experiment(config)
    print(json.dumps(result.report["transfer"], sort_keys=True))
    logger.info(f"Report written to {result.output_dir / REPORT_JSON}")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument(
        "--seed",
        type=int,
        default=env_int("SEED", 0),
        help="Seed for every stochastic component (default: $XLRE_SEED or 0)",
    )
    common.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="More log output",
    )
    common.add_argument(
        "--quiet",
        "-q",
        action="count",
        default=0,
        help="Less log output",
    )
    common.add_argument(
        "--no-progress",
        action="store_true",
        help="Disable progress bars",
    )
    common.add_argument(
        "--lowercase",
        action="store_true",
        help="Lowercase tokens before vocabulary lookup",
    )

    parser = ArgumentParser(
        prog="xlre",
        description="Cross-lingual relation extraction transfer via bilingual embedding mapping",
    )
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)

    p = sub.add_parser("train-embeddings", parents=[common], help="Train monolingual embeddings")
    p.add_argument("--corpus", required=True, help="Text corpus, one sentence per line")
    p.add_argument("--out", required=True, help="Output embedding file")
    p.add_argument("--dim", type=int, default=env_int("EMBEDDING_DIM", 300), help="Embedding dimension")
    p.add_argument("--window", type=int, default=5, help="Context window c")
    p.add_argument("--epochs", type=int, default=5, help="Training epochs")
    p.add_argument("--lr", type=float, default=0.025, help="Initial learning rate")
    p.add_argument("--min-count", type=int, default=1, help="Minimum word count")
    p.add_argument("--monitor", action="store_true", help="Log the corpus log-likelihood per epoch")
    p.set_defaults(func=cmd_train_embeddings)

    p = sub.add_parser("learn-mapping", parents=[common], help="Learn a bilingual mapping")
    p.add_argument("--dict", required=True, help="Bilingual dictionary (source<TAB>target)")
    p.add_argument("--src", required=True, help="Source-language embeddings")
    p.add_argument("--tgt", required=True, help="Target-language embeddings")
    p.add_argument(
        "--kind",
        choices=LEARNING_METHODS,
        default=env_str("MAPPING_KIND", "regular"),
        help="Mapping kind (regular, orthogonal, self-learn)",
    )
    p.add_argument("--size", type=int, help="Use only the N most frequent target words")
    p.add_argument("--max-iters", type=int, default=10, help="Self-learning iterations")
    p.add_argument("--induced-dict", help="Write the final self-learned dictionary here")
    p.add_argument("--out", required=True, help="Output mapping file")
    p.set_defaults(func=cmd_learn_mapping)

    p = sub.add_parser("train-re", parents=[common], help="Train a relation extraction model")
    p.add_argument("--train", required=True, help="Annotated training data (JSON lines)")
    p.add_argument("--dev", help="Annotated development data for early stopping")
    p.add_argument("--emb", required=True, help="Word embeddings of the training language")
    p.add_argument(
        "--context",
        choices=("pass", "pass_through", "bilstm", "cnn"),
        default=env_str("CONTEXT", "bilstm"),
        help="Context layer",
    )
    p.add_argument("--hidden-dim", type=int, help="Hidden size (default 200 Bi-LSTM, 300 CNN)")
    p.add_argument("--entity-label-dim", type=int, default=50, help="Entity label embedding size")
    p.add_argument("--cnn-window", type=int, default=3, help="CNN window size")
    p.add_argument("--dropout", type=float, default=0.5, help="Dropout rate")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    p.add_argument("--epochs", type=int, default=50, help="Maximum epochs")
    p.add_argument("--patience", type=int, default=5, help="Early-stopping patience")
    p.add_argument("--batch-size", type=int, default=16, help="Minibatch size")
    p.add_argument(
        "--normalize",
        action="store_true",
        help="Train on length-normalized embeddings (for orthogonal mappings)",
    )
    p.add_argument("--out", required=True, help="Output model checkpoint")
    p.set_defaults(func=cmd_train_re)

    p = sub.add_parser("transfer", parents=[common], help="Apply a source model to target data")
    p.add_argument("--model", required=True, nargs="+", help="Model checkpoint(s); several form an ensemble")
    p.add_argument("--mapping", required=True, help="Target-to-source mapping file")
    p.add_argument("--tgt-emb", required=True, help="Target-language embeddings")
    p.add_argument("--data", required=True, help="Annotated target-language data")
    p.add_argument("--rule", choices=ENSEMBLE_RULES, default="max", help="Ensemble rule")
    p.add_argument("--out", required=True, help="Output predictions (JSON lines)")
    p.add_argument("--report", help="Also write the evaluation record here")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("evaluate", parents=[common], help="Precision, recall and F1")
    p.add_argument("--predictions", help="Predictions file written by 'transfer'")
    p.add_argument("--labels", type=lambda s: [x for x in s.split(",") if x], help="Label set")
    p.add_argument("--model", nargs="+", help="Model checkpoint(s) for native evaluation")
    p.add_argument("--data", help="Annotated data for native evaluation")
    p.add_argument("--rule", choices=ENSEMBLE_RULES, default="max", help="Ensemble rule")
    p.add_argument("--out", help="Write the evaluation record here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-dict", parents=[common], help="F1 versus dictionary size")
    p.add_argument("--dict", required=True, help="Full bilingual dictionary")
    p.add_argument("--src", required=True, help="Source-language embeddings")
    p.add_argument("--tgt", required=True, help="Target-language embeddings")
    p.add_argument("--model", required=True, help="Source-language model checkpoint")
    p.add_argument("--data", required=True, help="Annotated target-language dev data")
    p.add_argument("--sizes", type=_int_list, default=[100, 500, 1000], help="Comma-separated sizes")
    p.add_argument("--out", help="Output CSV (default: standard output)")
    p.set_defaults(func=cmd_sweep_dict)

    p = sub.add_parser("gen-synth", parents=[common], help="Generate the synthetic benchmark")
    p.add_argument("--out-dir", required=True, help="Output directory")
    p.add_argument("--vocab-size", type=int, default=2000, help="Vocabulary size per language")
    p.add_argument("--tokens", type=int, default=200_000, help="Corpus tokens per language")
    p.add_argument("--relations", type=int, default=4, help="Number of relation types")
    p.add_argument("--sentences", type=int, default=1000, help="Annotated sentences")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("run-experiment", parents=[common], help="Run the whole protocol")
    p.add_argument("--config", help="Experiment config file (key=value lines)")
    p.add_argument("--output-dir", type=Path, help="Override the output directory")
    p.set_defaults(func=cmd_run_experiment)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    load_environment()
    try:
        parser = build_parser()
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION

    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_VALIDATION
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION

    # --seed on run-experiment overrides the config file only when given explicitly
    explicit_seed = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    args.seed_override = args.seed if explicit_seed else None
    setup_logging(args.verbose - args.quiet)

    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION if isinstance(e.cause, ValidationError) else EXIT_FAILURE
    except (XLREError, ArithmeticError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
