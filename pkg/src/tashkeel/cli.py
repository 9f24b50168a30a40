"""Operator surface: prepare / stats / train / sweep / predict / evaluate.

Exit codes: 0 success, 1 internal or training failure, 2 usage or input
error. Stdout carries only data; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from tashkeel import corpus as cp
from tashkeel import report
from tashkeel.ambiguity import build_lexicon, histogram, summarize
from tashkeel.errors import InputError, TashkeelError
from tashkeel.evaluation import corpus_wer
from tashkeel.model import CharVocab, ModelConfig, Seq2SeqModel
from tashkeel.runconfig import RunConfig, parse_sizes, resolve
from tashkeel.trainer import TrainConfig, sweep, train

MANIFEST_NAME = "manifest.txt"
CONFIG_NAME = "run.config"
SPLITS = ("train", "valid", "test")


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not valid UTF-8: {exc}") from exc


def _out_dir(path: Path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _marks(cfg: RunConfig) -> cp.DiacriticSet:
    return cp.DiacriticSet.default(extended=cfg.extended_marks)


def _overrides(args: argparse.Namespace) -> dict[str, object]:
    keys = (
        "seed", "profile", "precision", "chunk_size", "extended_marks",
        "selector", "embed_dim", "hidden_dim", "dropout", "steps",
        "batch_size", "learning_rate", "validate_every", "checkpoint_every",
        "valid_decode_limit", "sizes",
    )
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def _load_pairs(path: Path, cfg: RunConfig) -> tuple[list[cp.SentencePair], cp.BuildStats]:
    sentences = cp.extract_sentences(_read_text(path), cfg.selector)
    stats = cp.BuildStats()
    pairs = cp.build_pairs(sentences, _marks(cfg), stats)
    return pairs, stats


def cmd_prepare(args: argparse.Namespace) -> int:
    cfg = resolve(args.config, _overrides(args))
    out = _out_dir(args.out)
    pairs, stats = _load_pairs(args.input, cfg)
    split = cp.split_corpus(pairs, cfg.seed)
    parts = {"train": split.train, "valid": split.valid, "test": split.test}
    for name, part in parts.items():
        chunks = cp.chunk_corpus(part, cfg.chunk_size, stats)
        cp.write_dataset(chunks, out / f"{name}.src", out / f"{name}.tgt")
        cp.write_sentences(part, out / f"{name}.sent.src", out / f"{name}.sent.tgt")
    cp.write_manifest(out / MANIFEST_NAME, {
        "schema": 1,
        "seed": cfg.seed,
        "ratio_train": split.ratios[0],
        "ratio_valid": split.ratios[1],
        "ratio_test": split.ratios[2],
        "diacritic_set": _marks(cfg).spec(),
        "chunk_size": cfg.chunk_size,
        "normalization": "NFC",
        "input_sha256": cp.sha256_file(args.input),
        "pairs_kept": stats.kept,
        "dropped_empty": stats.dropped_empty,
        "skipped_mismatch": stats.skipped_mismatch,
        "n_train": len(split.train),
        "n_valid": len(split.valid),
        "n_test": len(split.test),
    })
    cfg.write(out / CONFIG_NAME)
    _say(f"prepared {stats.kept} pairs "
         f"({len(split.train)}/{len(split.valid)}/{len(split.test)}) "
         f"into {out} (chunk size {cfg.chunk_size}, "
         f"{stats.dropped_empty} empty dropped)")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = resolve(args.config, _overrides(args))
    out = _out_dir(args.out)
    pairs, _ = _load_pairs(args.input, cfg)
    lexicon = build_lexicon(pairs)
    hist = histogram(lexicon)
    paths = report.emit_ambiguity(hist, out)
    print(report.render_ambiguity_table(hist))
    for line in summarize(hist):
        print(line)
    _say("wrote " + ", ".join(str(p) for p in paths))
    return 0


def _model_config(cfg: RunConfig, chunk_size: int | str) -> ModelConfig:
    return ModelConfig(
        embed_dim=cfg.embed_dim,
        hidden_dim=cfg.hidden_dim,
        dropout=cfg.resolved_dropout(),
        chunk_size=chunk_size,
        input_feed=cfg.input_feed,
        max_decode_factor=cfg.max_decode_factor,
    )


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        steps=cfg.steps,
        batch_size=cfg.batch_size,
        profile=cfg.profile,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed,
        validate_every=cfg.validate_every,
        checkpoint_every=cfg.checkpoint_every,
        precision=cfg.precision,
        valid_decode_limit=cfg.valid_decode_limit,
    )


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve(args.config, _overrides(args))
    data = Path(args.data)
    out = _out_dir(args.out)
    manifest_path = data / MANIFEST_NAME
    manifest = cp.read_manifest(manifest_path)
    chunk_size = cp.parse_chunk_size(manifest.get("chunk_size", cfg.chunk_size))
    train_chunks = cp.read_dataset(data / "train.src", data / "train.tgt", chunk_size)
    valid_chunks = cp.read_dataset(data / "valid.src", data / "valid.tgt", chunk_size)
    if not train_chunks:
        raise InputError(f"{data}: empty training set")
    vocab = CharVocab.build(train_chunks)
    train_cfg = _train_config(cfg)
    model = Seq2SeqModel(_model_config(cfg, chunk_size), vocab,
                         seed=cfg.seed, dtype=train_cfg.dtype)
    log = train(model, train_chunks, valid_chunks or None, train_cfg,
                ckpt_dir=out, manifest_sha256=cp.sha256_file(manifest_path))
    log.write(out / "train_log.tsv")
    log.write_validations(out / "valid_log.tsv")
    report.plot_training_curve(log, out / "training_loss.png")
    cfg.write(out / CONFIG_NAME)
    best = f", best valid loss {log.best_valid_loss:.4f} at step {log.best_step}" \
        if log.best_step else ""
    _say(f"trained {train_cfg.steps} steps in {log.wall_clock:.1f}s, "
         f"final loss {log.losses[-1][1]:.4f}{best}; checkpoints in {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve(args.config, _overrides(args))
    data = Path(args.data)
    out = _out_dir(args.out)
    manifest = cp.read_manifest(data / MANIFEST_NAME)
    parts = {
        name: cp.read_sentences(data / f"{name}.sent.src", data / f"{name}.sent.tgt")
        for name in SPLITS
    }
    split = cp.CorpusSplit(train=parts["train"], valid=parts["valid"],
                           test=parts["test"], seed=int(manifest.get("seed", 0)))
    sizes = parse_sizes(cfg.sizes)
    result = sweep(split, sizes, _train_config(cfg),
                   _model_config(cfg, sizes[0]), out_dir=out)
    paths = report.emit_sweep(result, out)
    cfg.write(out / CONFIG_NAME)
    print(report.render_sweep_table(result))
    failures = [c for c in result.cells if c.error]
    for cell in failures:
        _say(f"cell {cell.size}: {cell.error}")
    _say("wrote " + ", ".join(str(p) for p in paths))
    return 1 if failures else 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = Seq2SeqModel.load(args.checkpoint)
    if args.input is not None:
        lines = _read_text(args.input).splitlines()
    else:
        lines = [line.rstrip("\n") for line in sys.stdin]
    mismatches = 0
    for line in lines:
        text, diag = model.predict_sentence(line, beam_width=args.beam)
        mismatches += sum(diag.mismatch_flags)
        print(text)
    if mismatches:
        _say(f"{mismatches} chunk(s) changed word count during decoding")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    refs = cp.read_lines(args.reference)
    hyps = cp.read_lines(args.hypothesis)
    result = corpus_wer(refs, hyps)
    print(f"{result.micro_pct:.2f}")
    if args.out is not None:
        out = _out_dir(args.out)
        paths = report.emit_wer(result, out)
        (out / "summary.txt").write_text(
            report.render_wer_summary(result) + "\n", encoding="utf-8")
        _say("wrote " + ", ".join(str(p) for p in paths))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, metavar="FILE",
                        help="key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--profile", choices=["desk", "paper"])
    common.add_argument("--precision", choices=["32", "64"])

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--steps", type=int)
    training.add_argument("--batch-size", type=int, dest="batch_size")
    training.add_argument("--embed-dim", type=int, dest="embed_dim")
    training.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    training.add_argument("--dropout", type=float)
    training.add_argument("--learning-rate", type=float, dest="learning_rate")
    training.add_argument("--validate-every", type=int, dest="validate_every")
    training.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    training.add_argument("--valid-decode-limit", type=int,
                          dest="valid_decode_limit")

    parser = argparse.ArgumentParser(
        prog="tashkeel",
        description="Diacritic restoration pipeline: corpus preparation, "
                    "seq2seq training, and WER evaluation.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("prepare", parents=[common],
                       help="build, split and chunk a parallel corpus")
    p.add_argument("input", type=Path, help="XML or plaintext corpus file")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--selector", help="XML element holding one sentence")
    p.add_argument("--chunk-size", dest="chunk_size",
                   help="words per chunk (1..10) or 'sentence'")
    p.add_argument("--extended-marks", dest="extended_marks",
                   action="store_const", const=True,
                   help="also strip hamza marks U+0653..U+0655")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("stats", parents=[common],
                       help="ambiguity histograms over a corpus")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--selector")
    p.add_argument("--extended-marks", dest="extended_marks",
                   action="store_const", const=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common, training],
                       help="train one model on a prepared corpus")
    p.add_argument("data", type=Path, help="directory produced by prepare")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", parents=[common, training],
                       help="train one model per chunk size and report WER")
    p.add_argument("data", type=Path, help="directory produced by prepare")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sizes", help="comma list of chunk sizes, e.g. 1,3,5,sentence")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="diacritize text with a trained model")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, help="default: stdin")
    p.add_argument("--beam", type=int, help="beam width (default: greedy)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="WER between two sentence files")
    p.add_argument("reference", type=Path)
    p.add_argument("hypothesis", type=Path)
    p.add_argument("--out", type=Path, help="write CSV and figure here")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    for stream in (sys.stdout, sys.stderr):
        if hasattr(stream, "reconfigure"):
            stream.reconfigure(encoding="utf-8")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except InputError as exc:
        _say(f"error: {exc}")
        return 2
    except TashkeelError as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
