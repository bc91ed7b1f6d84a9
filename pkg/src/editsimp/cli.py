"""Command-line pipeline: build-labels, stats, train, infer, evaluate, control-sweep.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
``EDITSIMP_THREADS`` caps kernel threads; ``EDITSIMP_BACKEND`` picks the
numba/numpy kernel backend (see kernels module).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import kernels, metrics
from .corpus import CorpusError, Vocabulary, build_vocab, load_corpus
from .oracle import (
    EditProgram,
    K_ADD,
    K_DEL,
    K_KEEP,
    ProgramFormatError,
    construct_program,
    label_statistics,
    load_programs,
    save_programs,
    weights_with_ratio,
)
from .model import (
    CheckpointError,
    DecodeConfig,
    ModelConfig,
    NumericError,
    ProgramMismatchError,
    SimplifierModel,
    TrainConfig,
    load_params,
    train,
)
from .program import trace as trace_program

log = logging.getLogger("editsimp")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve 2 for data errors
        raise UsageError(message)


def _parse_ratio(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"ratio must look like A:K:D, got {text!r}")
    try:
        a, k, d = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"ratio parts must be numbers: {text!r}") from None
    if min(a, k, d) <= 0:
        raise UsageError("ratio parts must be positive")
    return a, k, d


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _load_corpus_checked(path, fmt, dummy_pos, skip_bad):
    result = load_corpus(path, fmt, dummy_pos=dummy_pos)
    if result.errors:
        for e in result.errors:
            print(f"error: {e}", file=sys.stderr)
        if not skip_bad:
            raise CorpusError(f"{len(result.errors)} malformed row(s) in {path}")
    return result.pairs


def _read_token_lines(path):
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_build_labels(args) -> int:
    pairs = _load_corpus_checked(args.corpus, args.format, args.dummy_pos, args.skip_bad_rows)
    if not pairs:
        raise CorpusError(f"no usable pairs in {args.corpus}")
    kept, programs = [], []
    skipped = 0
    for pair in pairs:
        if pair.is_identical:
            skipped += 1
            continue
        kept.append(pair)
        programs.append(construct_program(pair.complex.tokens, pair.simple.tokens))
    if skipped:
        print(f"skipped {skipped} identical pair(s)")
    if not programs:
        raise CorpusError("every pair is identical; nothing to label")
    save_programs(programs, args.out)
    stats = label_statistics(programs)
    print(f"wrote {len(programs)} programs to {args.out}")
    print(stats.format_table())
    return EXIT_OK


def cmd_stats(args) -> int:
    programs = load_programs(args.programs)
    if not programs:
        raise CorpusError(f"no programs in {args.programs}")
    print(label_statistics(programs).format_table())
    return EXIT_OK


def _train_model(pairs, programs, args, ratio=None, out_dir=None, quiet=False,
                 vocab=None, params=None, start_epoch=0):
    vocab = vocab or build_vocab(pairs, args.vocab_size)
    weights = None
    if not args.unweighted:
        stats = label_statistics(programs)
        weights = stats.weights
        if ratio is not None:
            weights = weights_with_ratio(stats, ratio)
    if params is not None:
        model_config = params.config  # resuming: the checkpoint owns the architecture
    else:
        model_config = ModelConfig(
            vocab_size=vocab.size,
            d_word=args.d_word,
            d_pos=args.d_pos,
            hidden=args.hidden,
            d_bottleneck=args.hidden,
            bidirectional=not args.unidirectional,
            dtype="float64" if args.f64 else "float32",
        )
    config = TrainConfig(
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        grad_clip=args.grad_clip,
        dropout=args.dropout,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        dev_fraction=args.dev_fraction,
        label_weights=weights,
    )
    result = train(pairs, programs, vocab, model_config, config, out_dir=out_dir,
                   params=params, start_epoch=start_epoch)
    if not quiet:
        for row in result.log_rows:
            print(f"epoch {row['epoch']}: loss {row['loss']:.4f} "
                  f"dev_acc {row['dev_edit_accuracy']:.4f}")
    return result, vocab


def _gradient_self_check() -> float:
    """Finite-difference check on a tiny 64-bit model; returns worst error."""
    from .corpus import Sentence, SentencePair

    vocab = Vocabulary(["a", "b", "c", "d", "e"])
    cfg = ModelConfig(vocab_size=vocab.size, d_word=6, d_pos=4, hidden=8,
                      d_bottleneck=8, dtype="float64")
    model = SimplifierModel(cfg, vocab, rng=np.random.default_rng(7))
    pair = SentencePair(Sentence(["a", "b", "c"]), Sentence(["a", "d"]))
    prog = construct_program(pair.complex.tokens, pair.simple.tokens)
    bd = model.teacher_forced_loss(pair, prog)
    bd.loss.backward()
    h = 1e-5
    worst = 0.0
    for _, t in model.params.items():
        flat = t.data.reshape(-1)
        grad = t.grad.reshape(-1)
        probe = np.linspace(0, flat.size - 1, min(8, flat.size)).astype(int)
        for i in probe:
            old = flat[i]
            flat[i] = old + h
            lp = model.teacher_forced_loss(pair, prog, check_round_trip=False).loss.item()
            flat[i] = old - h
            lm = model.teacher_forced_loss(pair, prog, check_round_trip=False).loss.item()
            flat[i] = old
            fd = (lp - lm) / (2 * h)
            denom = abs(fd) + abs(grad[i])
            if denom > 1e-4:
                worst = max(worst, abs(fd - grad[i]) / denom)
            else:
                worst = max(worst, abs(fd - grad[i]) * 1e-2)
    return worst


def cmd_train(args) -> int:
    if args.f64_check:
        worst = _gradient_self_check()
        print(f"gradient self-check: worst relative error {worst:.2e}")
        if worst >= 1e-4:
            raise NumericError(f"gradient self-check failed: {worst:.2e} >= 1e-4")
    pairs = _load_corpus_checked(args.corpus, args.format, args.dummy_pos, args.skip_bad_rows)
    pairs = [p for p in pairs if not p.is_identical]
    programs = load_programs(args.programs)
    run_config = {k: v for k, v in vars(args).items() if k != "func" and not callable(v)}
    run_dir = Path(args.out) / f"run-{_config_hash(run_config)}"
    if run_dir.exists() and not args.resume:
        print(f"run directory {run_dir} already exists for this config; reusing name")
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "config.json", "w", encoding="utf-8") as f:
        json.dump(run_config, f, indent=2, sort_keys=True)
    ratio = _parse_ratio(args.ratio) if args.ratio else None
    vocab = params = None
    start_epoch = 0
    if args.resume and (run_dir / "latest.ckpt").exists():
        vocab = Vocabulary.load(run_dir / "vocab.txt")
        params = load_params(run_dir / "latest.ckpt", expected_vocab_size=vocab.size)
        log_path = run_dir / "train_log.tsv"
        if log_path.exists():
            rows = log_path.read_text().splitlines()
            if rows:
                start_epoch = int(rows[-1].split("\t")[0])
        print(f"resuming from epoch {start_epoch}")
    result, vocab = _train_model(pairs, programs, args, ratio=ratio, out_dir=run_dir,
                                 vocab=vocab, params=params, start_epoch=start_epoch)
    vocab.save(run_dir / "vocab.txt")
    print(f"run directory: {run_dir}")
    return EXIT_OK


def _load_checkpoint(path) -> tuple[SimplifierModel, DecodeConfig]:
    path = Path(path)
    if path.is_dir():
        ckpt = path / "latest.ckpt"
        vocab_path = path / "vocab.txt"
    else:
        ckpt = path
        vocab_path = path.parent / "vocab.txt"
    if not ckpt.exists():
        raise CheckpointError(f"no checkpoint at {ckpt}")
    if not vocab_path.exists():
        raise CheckpointError(f"no vocabulary file at {vocab_path}")
    vocab = Vocabulary.load(vocab_path)
    params = load_params(ckpt, expected_vocab_size=vocab.size)
    model = SimplifierModel(params.config, vocab, params=params)
    return model, DecodeConfig()


def cmd_infer(args) -> int:
    model, decode = _load_checkpoint(args.checkpoint)
    decode.pad_on_early_stop = not args.no_pad
    if args.add_budget is not None:
        decode.add_budget = args.add_budget
    lines = _read_token_lines(args.input)
    outputs, traces = [], []
    for tokens in lines:
        if not tokens:
            outputs.append("")
            traces.append("")
            continue
        prog, out = model.infer(tokens, decode)
        outputs.append(" ".join(out))
        traces.append(prog.render())
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("\n".join(outputs) + ("\n" if outputs else ""))
    if args.trace:
        trace_path = args.trace_out or (str(args.out) + ".trace")
        with open(trace_path, "w", encoding="utf-8") as f:
            f.write("\n".join(traces) + ("\n" if traces else ""))
        print(f"traces: {trace_path}")
    print(f"wrote {len(outputs)} output line(s) to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    sources = _read_token_lines(args.source)
    outputs = _read_token_lines(args.output)
    ref_files = [_read_token_lines(r) for r in args.refs]
    lengths = {len(sources), len(outputs), *(len(r) for r in ref_files)}
    if len(lengths) != 1:
        raise CorpusError(f"line counts differ across files: {sorted(lengths)}")
    instances = []
    for i, (src, out) in enumerate(zip(sources, outputs)):
        refs = [rf[i] for rf in ref_files if rf[i]]
        if not src or not refs:
            raise CorpusError(f"line {i + 1}: empty source or references")
        instances.append(metrics.EvalInstance(src, out, refs))
    report = metrics.evaluate(
        instances,
        delete_mode=args.delete_mode,
        empty_convention=args.empty_convention,
        aggregation=args.aggregation,
    )
    print(report.one_line())
    for note in report.notes:
        print(f"note: {note}")
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as f:
            f.write(report.key_values())
    return EXIT_OK


def cmd_control_sweep(args) -> int:
    ratios = [_parse_ratio(r) for r in args.ratios.split(",") if r]
    if len(ratios) < 2:
        raise UsageError("control-sweep needs at least two ratio triples")
    pairs = _load_corpus_checked(args.corpus, args.format, args.dummy_pos, args.skip_bad_rows)
    pairs = [p for p in pairs if not p.is_identical]
    programs = load_programs(args.programs)
    rows = []
    for ratio in ratios:
        result, _ = _train_model(pairs, programs, args, ratio=ratio, quiet=True)
        instances = []
        for pair in pairs:
            _, out = result.model.infer(pair.complex)
            instances.append(metrics.EvalInstance(pair.complex.tokens, out,
                                                  [pair.simple.tokens]))
        avg_len, pct_copied, pct_novel = metrics.length_and_novelty_stats(instances)
        rows.append((ratio, avg_len, pct_copied, pct_novel))
    print(f"{'add:keep:delete':>16} | {'avg len':>8} | {'% copied':>8} | {'% novel':>8}")
    for (a, k, d), alen, cop, nov in rows:
        name = f"{a:g}:{k:g}:{d:g}"
        print(f"{name:>16} | {alen:8.2f} | {cop:8.2f} | {nov:8.2f}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_corpus_args(p):
    p.add_argument("--corpus", required=True, help="corpus file (see --format)")
    p.add_argument("--format", choices=["tsv", "parallel_files"], default="tsv")
    p.add_argument("--dummy-pos", action="store_true",
                   help="assign the unknown POS tag to every token")
    p.add_argument("--skip-bad-rows", action="store_true",
                   help="drop malformed rows instead of aborting")


def _add_train_args(p):
    p.add_argument("--vocab-size", type=int, default=30000)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-6)
    p.add_argument("--grad-clip", type=float, default=1.0)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dev-fraction", type=float, default=0.1)
    p.add_argument("--hidden", type=int, default=200)
    p.add_argument("--d-word", type=int, default=100)
    p.add_argument("--d-pos", type=int, default=30)
    p.add_argument("--unidirectional", action="store_true")
    p.add_argument("--unweighted", action="store_true",
                   help="disable inverse-frequency label weights")
    p.add_argument("--f64", action="store_true", help="train in float64")


def build_parser() -> _Parser:
    parser = _Parser(prog="editsimp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-labels", help="construct expert edit programs from a corpus")
    _add_corpus_args(p)
    p.add_argument("--out", required=True, help="program file to write")
    p.set_defaults(func=cmd_build_labels)

    p = sub.add_parser("stats", help="label counts and loss weights for a program file")
    p.add_argument("--programs", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train the programmer-interpreter")
    _add_corpus_args(p)
    p.add_argument("--programs", required=True, help="program file from build-labels")
    p.add_argument("--out", required=True, help="directory for run directories")
    p.add_argument("--ratio", default=None, metavar="A:K:D",
                   help="extra loss-weight multipliers for ADD:KEEP:DELETE")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--f64-check", action="store_true",
                   help="run a finite-difference gradient self-check first")
    _add_train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="simplify sentences with a trained model")
    p.add_argument("--input", required=True, help="one tokenized sentence per line")
    p.add_argument("--checkpoint", required=True, help="run directory or checkpoint file")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", action="store_true", help="also write edit programs")
    p.add_argument("--trace-out", default=None)
    p.add_argument("--no-pad", action="store_true",
                   help="do not KEEP-pad the source suffix on early STOP")
    p.add_argument("--add-budget", type=int, default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="SARI/FKGL/unchanged report")
    p.add_argument("--source", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--refs", required=True, nargs="+")
    p.add_argument("--delete-mode", choices=["f1", "precision"], default="f1")
    p.add_argument("--empty-convention", choices=["perfect", "zero"], default="perfect")
    p.add_argument("--aggregation", choices=["macro", "micro"], default="macro")
    p.add_argument("--report-out", default=None, help="write key=value report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("control-sweep", help="train per loss-weight ratio; report output stats")
    _add_corpus_args(p)
    p.add_argument("--programs", required=True)
    p.add_argument("--ratios", required=True,
                   help="comma-separated ratio triples, e.g. 10:1:1,1:10:1,1:1:10")
    _add_train_args(p)
    p.set_defaults(func=cmd_control_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("EDITSIMP_LOGLEVEL", "WARNING"))
    threads = os.environ.get("EDITSIMP_THREADS")
    if threads:
        try:
            kernels.set_num_threads(int(threads))
        except ValueError:
            print(f"warning: ignoring bad EDITSIMP_THREADS={threads!r}", file=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, ProgramFormatError, ProgramMismatchError, CheckpointError,
            FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
