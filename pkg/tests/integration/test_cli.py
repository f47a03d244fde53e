"""Integration tests for the xlre command line."""

import json

import numpy as np
import pytest
from scipy.stats import ortho_group

from src.cli import EXIT_FAILURE, EXIT_OK, EXIT_VALIDATION, main
from src.corpus import Vocabulary
from src.embeddings import WordEmbeddings, load_embeddings, save_embeddings
from src.mapping import load_mapping, orthogonality_error
from src.remodel.checkpoint import load_model


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    code = main([
        "gen-synth", "--out-dir", str(out), "--vocab-size", "300", "--tokens", "3000",
        "--sentences", "40", "--seed", "2",
    ])
    assert code == EXIT_OK
    return out


class TestUsage:
    """Tests for argument handling and exit codes."""

    def test_no_arguments(self, capsys):
        """Test that running without arguments prints usage and exits 1."""
        assert main([]) == EXIT_VALIDATION
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self):
        """Test an unknown option."""
        assert main(["train-embeddings", "--corpus", "x", "--out", "y", "--bogus"]) == EXIT_VALIDATION

    def test_unknown_subcommand(self):
        """Test an unknown subcommand."""
        assert main(["translate"]) == EXIT_VALIDATION

    def test_help(self, capsys):
        """Test --help exits cleanly."""
        assert main(["--help"]) == EXIT_OK
        assert "learn-mapping" in capsys.readouterr().out

    def test_missing_input(self, tmp_path, capsys):
        """Test a missing corpus file."""
        code = main(["train-embeddings", "--corpus", str(tmp_path / "none.txt"), "--out", str(tmp_path / "e.vec")])
        assert code == EXIT_VALIDATION
        assert "error:" in capsys.readouterr().err

    def test_malformed_embeddings(self, tmp_path):
        """Test a malformed embedding file passed to learn-mapping."""
        bad = tmp_path / "bad.vec"
        bad.write_text("2 3\na 1 2\n", encoding="utf-8")
        (tmp_path / "d.tsv").write_text("a\tb\n", encoding="utf-8")
        code = main([
            "learn-mapping", "--dict", str(tmp_path / "d.tsv"), "--src", str(bad), "--tgt", str(bad),
            "--out", str(tmp_path / "m.map"),
        ])
        assert code == EXIT_VALIDATION

    def test_numeric_failure(self, tmp_path):
        """Test that a zero vector in orthogonal mapping is a non-validation failure."""
        vocab = Vocabulary(words=("a", "b"), counts=(2, 1))
        emb = WordEmbeddings(vocab, np.array([[1.0, 0.0], [0.0, 0.0]]))
        save_embeddings(tmp_path / "e.vec", emb)
        (tmp_path / "d.tsv").write_text("a\ta\nb\tb\n", encoding="utf-8")
        code = main([
            "learn-mapping", "--dict", str(tmp_path / "d.tsv"), "--src", str(tmp_path / "e.vec"),
            "--tgt", str(tmp_path / "e.vec"), "--kind", "orthogonal", "--out", str(tmp_path / "m.map"),
        ])
        assert code == EXIT_FAILURE

    def test_bad_environment_default(self, monkeypatch, tmp_path, capsys):
        """Test that a non-integer XLRE_SEED is reported instead of crashing."""
        monkeypatch.setenv("XLRE_SEED", "abc")
        assert main(["gen-synth", "--out-dir", str(tmp_path / "x")]) == EXIT_VALIDATION
        assert "XLRE_SEED" in capsys.readouterr().err
        assert not (tmp_path / "x").exists()

    def test_undecodable_corpus(self, tmp_path, capsys):
        """Test that a non-UTF-8 corpus exits with 1 and a one-line message."""
        corpus = tmp_path / "c.txt"
        corpus.write_bytes(b"a b \xff\xfe c\n")
        code = main(["train-embeddings", "--corpus", str(corpus), "--out", str(tmp_path / "e.vec")])
        assert code == EXIT_VALIDATION
        err = capsys.readouterr().err
        assert "UTF-8" in err
        assert "Traceback" not in err

    def test_undecodable_checkpoint(self, tmp_path, synth_dir):
        """Test a model checkpoint that is not UTF-8 text."""
        model = tmp_path / "m.json"
        model.write_bytes(b"\xff\xfe{}")
        code = main([
            "transfer", "--model", str(model), "--mapping", "m.map", "--tgt-emb", "t.vec",
            "--data", str(synth_dir / "target.jsonl"), "--out", str(tmp_path / "p.jsonl"),
        ])
        assert code == EXIT_VALIDATION


        assert code == EXIT_FAILURE


class TestCommands:
    """Tests for individual subcommands."""

    def test_train_embeddings(self, tmp_path):
        """Test training and writing embeddings."""
        corpus = tmp_path / "c.txt"
        corpus.write_text("the cat sat on the mat\nthe dog sat on the log\n", encoding="utf-8")
        out = tmp_path / "c.vec"
        code = main([
            "train-embeddings", "--corpus", str(corpus), "--out", str(out), "--dim", "4",
            "--window", "2", "--epochs", "2", "--no-progress",
        ])
        assert code == EXIT_OK
        assert out.read_text(encoding="utf-8").splitlines()[0] == "7 4"
        emb = load_embeddings(out)
        assert emb.vocabulary.words[0] == "the"

    def test_learn_orthogonal_mapping(self, tmp_path):
        """Test that an orthogonal mapping file satisfies M^T M = I."""
        rng = np.random.default_rng(0)
        words = tuple(f"w{i}" for i in range(30))
        vocab = Vocabulary(words=words, counts=tuple(range(30, 0, -1)))
        x = rng.normal(size=(5, 30))
        q = ortho_group.rvs(5, random_state=0)
        save_embeddings(tmp_path / "src.vec", WordEmbeddings(vocab, x))
        save_embeddings(tmp_path / "tgt.vec", WordEmbeddings(vocab, q @ x))
        (tmp_path / "d.tsv").write_text("".join(f"{w}\t{w}\n" for w in words), encoding="utf-8")

        for kind in ("orthogonal", "self-learn"):
            out = tmp_path / f"{kind}.map"
            code = main([
                "learn-mapping", "--dict", str(tmp_path / "d.tsv"), "--src", str(tmp_path / "src.vec"),
                "--tgt", str(tmp_path / "tgt.vec"), "--kind", kind, "--out", str(out),
                "--induced-dict", str(tmp_path / "induced.tsv"),
            ])
            assert code == EXIT_OK
            mapping = load_mapping(out)
            assert mapping.kind == "orthogonal"
            assert orthogonality_error(mapping.matrix) < 1e-8
            assert np.allclose(mapping.matrix, q.T, atol=1e-6)
        assert (tmp_path / "induced.tsv").read_text(encoding="utf-8").count("\n") == 30

    def test_gen_synth(self, synth_dir, capsys):
        """Test the generated files."""
        for name in ("source.txt", "target.txt", "lexicon.tsv", "source.jsonl", "target.jsonl"):
            assert (synth_dir / name).is_file()
        assert len((synth_dir / "lexicon.tsv").read_text(encoding="utf-8").splitlines()) == 300


class TestPipeline:
    """The stage-by-stage protocol through the command line."""

    def test_stages(self, synth_dir, tmp_path):
        """Test embeddings, mapping, source model, transfer and evaluation."""
        work = tmp_path / "work"
        work.mkdir()
        for lang in ("source", "target"):
            assert main([
                "train-embeddings", "--corpus", str(synth_dir / f"{lang}.txt"),
                "--out", str(work / f"{lang}.vec"), "--dim", "8", "--window", "2", "--epochs", "1",
                "--no-progress",
            ]) == EXIT_OK

        assert main([
            "learn-mapping", "--dict", str(synth_dir / "lexicon.tsv"), "--src", str(work / "source.vec"),
            "--tgt", str(work / "target.vec"), "--kind", "regular", "--size", "100",
            "--out", str(work / "m.map"),
        ]) == EXIT_OK

        assert main([
            "train-re", "--train", str(synth_dir / "source.jsonl"), "--emb", str(work / "source.vec"),
            "--context", "cnn", "--hidden-dim", "6", "--entity-label-dim", "4", "--epochs", "2",
            "--out", str(work / "re.json"), "--no-progress",
        ]) == EXIT_OK
        model = load_model(work / "re.json")
        assert model.config.context_kind == "cnn"

        assert main([
            "transfer", "--model", str(work / "re.json"), "--mapping", str(work / "m.map"),
            "--tgt-emb", str(work / "target.vec"), "--data", str(synth_dir / "target.jsonl"),
            "--out", str(work / "pred.jsonl"), "--report", str(work / "transfer.json"),
        ]) == EXIT_OK
        record = json.loads((work / "transfer.json").read_text(encoding="utf-8"))
        assert {"precision", "recall", "f1"} <= set(record)

        assert main([
            "evaluate", "--predictions", str(work / "pred.jsonl"), "--out", str(work / "eval.json"),
        ]) == EXIT_OK
        again = json.loads((work / "eval.json").read_text(encoding="utf-8"))
        assert again["f1"] == record["f1"]

        assert main([
            "sweep-dict", "--dict", str(synth_dir / "lexicon.tsv"), "--src", str(work / "source.vec"),
            "--tgt", str(work / "target.vec"), "--model", str(work / "re.json"),
            "--data", str(synth_dir / "target.jsonl"), "--sizes", "20,50,100", "--out", str(work / "s.csv"),
        ]) == EXIT_OK
        lines = (work / "s.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "size,f1"
        assert [line.split(",")[0] for line in lines[1:]] == ["20", "50", "100"]

    def test_sweep_rejects_bad_sizes(self, synth_dir, tmp_path):
        """Test that sweep sizes are validated before any work."""
        code = main([
            "sweep-dict", "--dict", str(synth_dir / "lexicon.tsv"), "--src", "x.vec", "--tgt", "y.vec",
            "--model", "m.json", "--data", str(synth_dir / "target.jsonl"), "--sizes", "a,b",
        ])
        assert code == EXIT_VALIDATION


def run_all_stages(synth_dir, work):
    """Run every artifact-writing subcommand into ``work``."""
    work.mkdir()
    quiet = ["--no-progress", "--seed", "3"]
    for lang in ("source", "target"):
        assert main([
            "train-embeddings", "--corpus", str(synth_dir / f"{lang}.txt"),
            "--out", str(work / f"{lang}.vec"), "--dim", "8", "--window", "2", "--epochs", "1",
        ] + quiet) == EXIT_OK
    assert main([
        "learn-mapping", "--dict", str(synth_dir / "lexicon.tsv"), "--src", str(work / "source.vec"),
        "--tgt", str(work / "target.vec"), "--kind", "self-learn", "--size", "100",
        "--out", str(work / "m.map"), "--induced-dict", str(work / "induced.tsv"),
    ] + quiet) == EXIT_OK
    assert main([
        "train-re", "--train", str(synth_dir / "source.jsonl"), "--emb", str(work / "source.vec"),
        "--context", "bilstm", "--hidden-dim", "4", "--entity-label-dim", "3", "--epochs", "2",
        "--out", str(work / "re.json"),
    ] + quiet) == EXIT_OK
    assert main([
        "transfer", "--model", str(work / "re.json"), "--mapping", str(work / "m.map"),
        "--tgt-emb", str(work / "target.vec"), "--data", str(synth_dir / "target.jsonl"),
        "--out", str(work / "pred.jsonl"), "--report", str(work / "transfer.json"),
    ] + quiet) == EXIT_OK
    assert main([
        "sweep-dict", "--dict", str(synth_dir / "lexicon.tsv"), "--src", str(work / "source.vec"),
        "--tgt", str(work / "target.vec"), "--model", str(work / "re.json"),
        "--data", str(synth_dir / "target.jsonl"), "--sizes", "20,100", "--out", str(work / "s.csv"),
    ] + quiet) == EXIT_OK


class TestReproducibility:
    """Same inputs and seed give byte-identical artifacts."""

    def test_gen_synth_rerun(self, tmp_path):
        """Test that two generations with one seed write the same files."""
        dirs = [tmp_path / "a", tmp_path / "b"]
        for out in dirs:
            assert main([
                "gen-synth", "--out-dir", str(out), "--vocab-size", "300", "--tokens", "3000",
                "--sentences", "40", "--seed", "5",
            ]) == EXIT_OK
        names = sorted(p.name for p in dirs[0].iterdir())
        assert names == sorted(p.name for p in dirs[1].iterdir())
        for name in names:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name

    def test_stage_reruns(self, synth_dir, tmp_path):
        """Test embeddings, mapping, model, predictions and sweep on a rerun."""
        first, second = tmp_path / "first", tmp_path / "second"
        run_all_stages(synth_dir, first)
        run_all_stages(synth_dir, second)
        names = sorted(p.name for p in first.iterdir())
        assert {"source.vec", "m.map", "induced.tsv", "re.json", "pred.jsonl", "s.csv"} <= set(names)
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
