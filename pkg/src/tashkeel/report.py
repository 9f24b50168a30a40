"""Report rendering: delimited files, aligned text, and figures.

Computation lives in the ambiguity/evaluation/trainer modules; this is
the downstream emitter that turns their results into CSV tables and
matplotlib figures written next to each other in the run's output
directory.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from tashkeel.ambiguity import AmbiguityHistogram, write_histogram_csv
from tashkeel.corpus import SENTENCE
from tashkeel.evaluation import WerReport, wer
from tashkeel.trainer import SweepReport, TrainLog

FIGSIZE = (7.0, 4.2)


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# -- ambiguity -------------------------------------------------------


def render_ambiguity_table(hist: AmbiguityHistogram) -> str:
    lines = [f"{'k':>4} {'types':>10} {'type %':>8} {'tokens':>10} {'token %':>8}"]
    for k in sorted(hist.buckets):
        tc, tp, nc, np_ = hist.buckets[k]
        lines.append(f"{k:>4} {tc:>10} {tp:>8.2f} {nc:>10} {np_:>8.2f}")
    return "\n".join(lines)


def plot_ambiguity(hist: AmbiguityHistogram, path: Path, level: str) -> None:
    """Bar chart of the variant-count distribution at type or token level."""
    ks = sorted(hist.buckets)
    col = 1 if level == "type" else 3
    values = [hist.buckets[k][col] for k in ks]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.bar(ks, values, color="#4878a8")
    ax.set_xlabel("distinct diacritized variants per word")
    ax.set_ylabel(f"% of {level}s")
    ax.set_title(f"Degree of ambiguity ({level} level)")
    ax.set_xticks(ks)
    _save(fig, path)


def emit_ambiguity(hist: AmbiguityHistogram, out_dir: Path) -> list[Path]:
    """Write the CSV and both figures; returns the paths written."""
    out_dir = Path(out_dir)
    csv_path = out_dir / "ambiguity.csv"
    write_histogram_csv(hist, csv_path)
    type_png = out_dir / "ambiguity_type.png"
    token_png = out_dir / "ambiguity_token.png"
    plot_ambiguity(hist, type_png, "type")
    plot_ambiguity(hist, token_png, "token")
    return [csv_path, type_png, token_png]


# -- sweep -----------------------------------------------------------


def _size_label(size: int | str) -> str:
    if size == SENTENCE:
        return "sentence"
    return f"{size} word" + ("s" if size != 1 else "")


def _sweep_columns(report: SweepReport) -> list[tuple[str, float | None]]:
    cols: list[tuple[str, float | None]] = [
        ("no prediction", report.no_prediction_pct)
    ]
    if report.baseline_pct is not None:
        cols.append(("baseline", report.baseline_pct))
    word_cells = sorted(
        (c for c in report.cells if c.size != SENTENCE), key=lambda c: c.size
    )
    sentence_cells = [c for c in report.cells if c.size == SENTENCE]
    for cell in word_cells + sentence_cells:
        cols.append((_size_label(cell.size), cell.wer_pct))
    return cols


def write_sweep_csv(report: SweepReport, path: Path) -> None:
    """One header row of model names, one row of WER percentages."""
    cols = _sweep_columns(report)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model"] + [name for name, _ in cols])
        writer.writerow(
            ["WER"] + ["" if v is None else f"{v:.2f}" for _, v in cols]
        )


def render_sweep_table(report: SweepReport) -> str:
    cols = _sweep_columns(report)
    width = max(len(name) for name, _ in cols)
    lines = [f"{'model'.ljust(width)}    WER"]
    for name, value in cols:
        shown = "failed" if value is None else f"{value:6.2f}"
        lines.append(f"{name.ljust(width)} {shown}")
    return "\n".join(lines)


def plot_sweep(report: SweepReport, path: Path) -> None:
    cols = _sweep_columns(report)
    names = [name for name, _ in cols]
    values = [v for _, v in cols]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    xs = range(len(names))
    heights = [0.0 if v is None else v for v in values]
    colors = ["#a85454" if name in ("no prediction", "baseline") else "#4878a8"
              for name in names]
    ax.bar(xs, heights, color=colors)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("WER %")
    ax.set_title("WER by context size")
    _save(fig, path)


def emit_sweep(report: SweepReport, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    csv_path = out_dir / "sweep.csv"
    txt_path = out_dir / "sweep.txt"
    png_path = out_dir / "wer_by_chunk.png"
    write_sweep_csv(report, csv_path)
    txt_path.write_text(render_sweep_table(report) + "\n", encoding="utf-8")
    plot_sweep(report, png_path)
    return [csv_path, txt_path, png_path]


# -- training --------------------------------------------------------


def plot_training_curve(log: TrainLog, path: Path) -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    steps = [s for s, _ in log.losses]
    losses = [v for _, v in log.losses]
    ax.plot(steps, losses, lw=0.9, label="train loss")
    if log.validations:
        vsteps = [s for s, _, _ in log.validations]
        vlosses = [v for _, v, _ in log.validations]
        ax.plot(vsteps, vlosses, "o-", ms=3, label="valid loss")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend()
    _save(fig, path)


# -- evaluation ------------------------------------------------------


def write_wer_csv(report: WerReport, path: Path) -> None:
    """Per-sentence counts plus the corpus aggregates."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sentence", "S", "D", "I", "C", "wer_pct"])
        for idx, counts in enumerate(report.sentences):
            writer.writerow([
                idx, counts.S, counts.D, counts.I, counts.C,
                f"{100.0 * wer(counts):.2f}",
            ])
        t = report.totals
        writer.writerow(["micro", t.S, t.D, t.I, t.C, f"{report.micro_pct:.2f}"])
        writer.writerow(["macro", "", "", "", "", f"{report.macro_pct:.2f}"])


def plot_wer_histogram(report: WerReport, path: Path) -> None:
    """Distribution of per-sentence WER percentages."""
    rates = [100.0 * wer(c) for c in report.sentences]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.hist(rates, bins=min(30, max(5, len(set(rates)))), color="#4878a8")
    ax.axvline(report.micro_pct, color="#a85454", lw=1.2,
               label=f"micro {report.micro_pct:.2f}")
    ax.set_xlabel("per-sentence WER %")
    ax.set_ylabel("sentences")
    ax.legend()
    _save(fig, path)


def emit_wer(report: WerReport, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    csv_path = out_dir / "wer.csv"
    png_path = out_dir / "wer_hist.png"
    write_wer_csv(report, csv_path)
    plot_wer_histogram(report, png_path)
    return [csv_path, png_path]


def render_wer_summary(report: WerReport) -> str:
    return (
        f"sentences: {report.sentence_count}\n"
        f"micro WER: {report.micro_pct:.2f}\n"
        f"macro WER: {report.macro_pct:.2f}"
    )
