"""End-to-end command-line pipeline on a tiny corpus."""

import json

import pytest

from editsimp.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from editsimp.corpus import load_corpus
from editsimp.oracle import load_programs
from editsimp.program import execute, validate

from corpora import toy_corpus

TRAIN_ARGS = [
    "--vocab-size", "100", "--epochs", "2", "--batch-size", "8", "--lr", "0.003",
    "--dropout", "0.0", "--hidden", "16", "--d-word", "8", "--d-pos", "4",
    "--seed", "3", "--dev-fraction", "0.0",
]


@pytest.fixture()
def corpus_file(tmp_path):
    path = tmp_path / "corpus.tsv"
    rows = []
    for p in toy_corpus(12):
        rows.append("\t".join([
            " ".join(p.complex.tokens), " ".join(p.simple.tokens),
        ]))
    rows.append("same same\tsame same")  # identical pair, should be skipped
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture()
def built(tmp_path, corpus_file, capsys):
    programs = tmp_path / "programs.txt"
    rc = main(["build-labels", "--corpus", str(corpus_file), "--out", str(programs),
               "--dummy-pos"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "skipped 1 identical pair" in out
    return corpus_file, programs


class TestBuildLabels:
    def test_programs_replay_to_simple_side(self, built):
        corpus_file, programs_file = built
        pairs = [p for p in load_corpus(corpus_file).pairs if not p.is_identical]
        programs = load_programs(programs_file)
        assert len(pairs) == len(programs)
        for pair, prog in zip(pairs, programs):
            assert execute(pair.complex.tokens, prog) == list(pair.simple.tokens)

    def test_stats_table_printed(self, built, capsys):
        _, programs_file = built
        assert main(["stats", "--programs", str(programs_file)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "KEEP" in out and "STOP" in out and "weights" in out

    def test_empty_corpus_is_data_error(self, tmp_path, capsys):
        f = tmp_path / "empty.tsv"
        f.write_text("")
        rc = main(["build-labels", "--corpus", str(f), "--out", str(tmp_path / "p.txt")])
        assert rc == EXIT_DATA

    def test_malformed_corpus_is_data_error(self, tmp_path, capsys):
        f = tmp_path / "bad.tsv"
        f.write_text("only one column\n")
        rc = main(["build-labels", "--corpus", str(f), "--out", str(tmp_path / "p.txt")])
        assert rc == EXIT_DATA
        assert "line 1" in capsys.readouterr().err

    def test_skip_bad_rows(self, tmp_path, capsys):
        f = tmp_path / "bad.tsv"
        f.write_text("only one column\na b\tb\n")
        rc = main(["build-labels", "--corpus", str(f), "--out", str(tmp_path / "p.txt"),
                   "--skip-bad-rows"])
        assert rc == EXIT_OK


class TestTrainInfer:
    def test_full_pipeline(self, tmp_path, built, capsys):
        corpus_file, programs_file = built
        runs = tmp_path / "runs"
        rc = main(["train", "--corpus", str(corpus_file), "--dummy-pos",
                   "--programs", str(programs_file), "--out", str(runs), *TRAIN_ARGS])
        assert rc == EXIT_OK
        run_dirs = list(runs.glob("run-*"))
        assert len(run_dirs) == 1
        run_dir = run_dirs[0]
        config = json.loads((run_dir / "config.json").read_text())
        assert config["seed"] == 3
        assert (run_dir / "vocab.txt").exists()
        assert (run_dir / "latest.ckpt").exists()
        assert (run_dir / "train_log.tsv").exists()

        src = tmp_path / "input.txt"
        sentences = ["the very cat runs and the dog today", "the owl sits"]
        src.write_text("\n".join(sentences) + "\n")
        out = tmp_path / "output.txt"
        rc = main(["infer", "--input", str(src), "--checkpoint", str(run_dir),
                   "--out", str(out), "--trace"])
        assert rc == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        traces = load_programs(str(out) + ".trace")
        for sent, prog in zip(sentences, traces):
            assert validate(sent.split(), prog).ok

        ref = tmp_path / "refs.txt"
        ref.write_text("\n".join(["cat goes", "owl stays"]) + "\n")
        report = tmp_path / "report.kv"
        rc = main(["evaluate", "--source", str(src), "--output", str(out),
                   "--refs", str(ref), "--report-out", str(report)])
        assert rc == EXIT_OK
        printed = capsys.readouterr().out
        assert "SARI" in printed
        kv = dict(line.split("=", 1) for line in report.read_text().splitlines())
        assert 0.0 <= float(kv["sari"]) <= 100.0
        assert kv["delete_mode"] == "f1"

    def test_no_pad_flag_changes_output(self, tmp_path, built):
        corpus_file, programs_file = built
        runs = tmp_path / "runs"
        main(["train", "--corpus", str(corpus_file), "--dummy-pos",
              "--programs", str(programs_file), "--out", str(runs), *TRAIN_ARGS])
        run_dir = next(runs.glob("run-*"))
        src = tmp_path / "in.txt"
        src.write_text("the very cat runs and the dog today\n")
        out_pad = tmp_path / "a.txt"
        out_nopad = tmp_path / "b.txt"
        main(["infer", "--input", str(src), "--checkpoint", str(run_dir), "--out", str(out_pad)])
        main(["infer", "--input", str(src), "--checkpoint", str(run_dir),
              "--out", str(out_nopad), "--no-pad"])
        padded = out_pad.read_text().splitlines()[0].split()
        unpadded = out_nopad.read_text().splitlines()[0].split()
        assert len(unpadded) <= len(padded)

    def test_empty_input_file(self, tmp_path, built):
        corpus_file, programs_file = built
        runs = tmp_path / "runs"
        main(["train", "--corpus", str(corpus_file), "--dummy-pos",
              "--programs", str(programs_file), "--out", str(runs), *TRAIN_ARGS])
        run_dir = next(runs.glob("run-*"))
        src = tmp_path / "empty.txt"
        src.write_text("")
        out = tmp_path / "out.txt"
        assert main(["infer", "--input", str(src), "--checkpoint", str(run_dir),
                     "--out", str(out)]) == EXIT_OK
        assert out.read_text() == ""

    def test_missing_checkpoint_is_data_error(self, tmp_path):
        src = tmp_path / "in.txt"
        src.write_text("a b\n")
        rc = main(["infer", "--input", str(src), "--checkpoint", str(tmp_path / "ghost"),
                   "--out", str(tmp_path / "o.txt")])
        assert rc == EXIT_DATA

    def test_mismatched_program_file_is_data_error(self, tmp_path, built, capsys):
        corpus_file, _ = built
        bad_programs = tmp_path / "bad_programs.txt"
        bad_programs.write_text("KEEP STOP\n")
        rc = main(["train", "--corpus", str(corpus_file), "--dummy-pos",
                   "--programs", str(bad_programs), "--out", str(tmp_path / "r"), *TRAIN_ARGS])
        assert rc == EXIT_DATA

    def test_f64_check_flag(self, tmp_path, built, capsys):
        corpus_file, programs_file = built
        rc = main(["train", "--corpus", str(corpus_file), "--dummy-pos",
                   "--programs", str(programs_file), "--out", str(tmp_path / "r"),
                   "--f64-check", *TRAIN_ARGS])
        assert rc == EXIT_OK
        assert "gradient self-check" in capsys.readouterr().out


class TestEvaluateCommand:
    def test_perfect_output_scores_100(self, tmp_path, capsys):
        (tmp_path / "src.txt").write_text("a b\n")
        (tmp_path / "out.txt").write_text("a\n")
        (tmp_path / "ref.txt").write_text("a\n")
        rc = main(["evaluate", "--source", str(tmp_path / "src.txt"),
                   "--output", str(tmp_path / "out.txt"),
                   "--refs", str(tmp_path / "ref.txt")])
        assert rc == EXIT_OK
        assert "SARI 100.00" in capsys.readouterr().out

    def test_delete_mode_flag(self, tmp_path, capsys):
        (tmp_path / "src.txt").write_text("a b\n")
        (tmp_path / "out.txt").write_text("a\n")
        (tmp_path / "ref.txt").write_text("a\n")
        rc = main(["evaluate", "--source", str(tmp_path / "src.txt"),
                   "--output", str(tmp_path / "out.txt"),
                   "--refs", str(tmp_path / "ref.txt"),
                   "--delete-mode", "precision", "--empty-convention", "zero"])
        assert rc == EXIT_OK
        assert "SARI 25.00" in capsys.readouterr().out

    def test_line_count_mismatch(self, tmp_path, capsys):
        (tmp_path / "src.txt").write_text("a b\nc\n")
        (tmp_path / "out.txt").write_text("a\n")
        (tmp_path / "ref.txt").write_text("a\n")
        rc = main(["evaluate", "--source", str(tmp_path / "src.txt"),
                   "--output", str(tmp_path / "out.txt"),
                   "--refs", str(tmp_path / "ref.txt")])
        assert rc == EXIT_DATA


class TestExitCodes:
    def test_unknown_command_is_usage(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_missing_required_flag_is_usage(self):
        assert main(["stats"]) == EXIT_USAGE

    def test_bad_ratio_is_usage(self, tmp_path, built):
        corpus_file, programs_file = built
        rc = main(["control-sweep", "--corpus", str(corpus_file), "--dummy-pos",
                   "--programs", str(programs_file), "--ratios", "1:2", *TRAIN_ARGS])
        assert rc == EXIT_USAGE

    def test_single_ratio_is_usage(self, tmp_path, built):
        corpus_file, programs_file = built
        rc = main(["control-sweep", "--corpus", str(corpus_file), "--dummy-pos",
                   "--programs", str(programs_file), "--ratios", "10:1:1", *TRAIN_ARGS])
        assert rc == EXIT_USAGE

    def test_missing_file_is_data_error(self, tmp_path):
        rc = main(["stats", "--programs", str(tmp_path / "nope.txt")])
        assert rc == EXIT_DATA


class TestControlSweep:
    def test_three_ratio_table(self, tmp_path, built, capsys):
        corpus_file, programs_file = built
        rc = main(["control-sweep", "--corpus", str(corpus_file), "--dummy-pos",
                   "--programs", str(programs_file),
                   "--ratios", "10:1:1,1:10:1,1:1:10", *TRAIN_ARGS])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        lines = [ln for ln in out.splitlines() if "|" in ln]
        assert len(lines) == 4  # header + three rows
        assert "avg len" in lines[0]
        assert "10:1:1" in lines[1]
