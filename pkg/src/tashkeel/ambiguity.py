"""Corpus ambiguity statistics.

For every undiacritized word form, count how many distinct diacritized
variants it takes in the corpus, then bucket the counts at type and
token level. The same lexicon backs the most-frequent-form baseline in
the evaluation module.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from tashkeel.corpus import SentencePair
from tashkeel.errors import InputError

TYPE = "type"
TOKEN = "token"


@dataclass
class AmbiguityLexicon:
    """Map from undiacritized word to a multiset of diacritized forms."""

    entries: dict[str, Counter]

    def total_tokens(self) -> int:
        return sum(sum(forms.values()) for forms in self.entries.values())

    def most_frequent(self, word: str) -> str | None:
        """Most frequent diacritized form of `word`; ties break to the
        lexicographically smallest form. None for out-of-vocabulary words."""
        forms = self.entries.get(word)
        if not forms:
            return None
        return min(forms.items(), key=lambda kv: (-kv[1], kv[0]))[0]


@dataclass
class AmbiguityHistogram:
    """Buckets keyed by variant count k.

    Each bucket holds (type count, type %, token count, token %); the
    percentages of either column sum to 100 up to rounding.
    """

    buckets: dict[int, tuple[int, float, int, float]]
    max_k: int
    mode: str

    def share(self, k: int) -> float:
        """Percentage of types (or tokens, per mode) with exactly k variants."""
        if k not in self.buckets:
            return 0.0
        type_pct, token_pct = self.buckets[k][1], self.buckets[k][3]
        return type_pct if self.mode == TYPE else token_pct


def build_lexicon(pairs: Iterable[SentencePair]) -> AmbiguityLexicon:
    """Count diacritized variants per undiacritized word over `pairs`."""
    entries: dict[str, Counter] = {}
    for pair in pairs:
        src_words = pair.src.split()
        tgt_words = pair.tgt.split()
        if len(src_words) != len(tgt_words):
            raise InputError(
                f"pair {pair.id}: source/target word counts differ "
                f"({len(src_words)} vs {len(tgt_words)})"
            )
        for bare, full in zip(src_words, tgt_words):
            entries.setdefault(bare, Counter())[full] += 1
    return AmbiguityLexicon(entries=dict(sorted(entries.items())))


def histogram(lexicon: AmbiguityLexicon, mode: str = TYPE) -> AmbiguityHistogram:
    """Bucket words by their number of distinct diacritized variants.

    TYPE mode counts each word form once; TOKEN mode weights each form
    by its running-text frequency. Both count columns are populated
    regardless of mode; `mode` selects which share() reports.
    """
    if mode not in (TYPE, TOKEN):
        raise InputError(f"mode must be {TYPE!r} or {TOKEN!r}, got {mode!r}")
    if not lexicon.entries:
        raise InputError("cannot build a histogram from an empty lexicon")
    type_counts: Counter = Counter()
    token_counts: Counter = Counter()
    for forms in lexicon.entries.values():
        k = len(forms)
        type_counts[k] += 1
        token_counts[k] += sum(forms.values())
    n_types = sum(type_counts.values())
    n_tokens = sum(token_counts.values())
    buckets = {
        k: (
            type_counts[k],
            100.0 * type_counts[k] / n_types,
            token_counts[k],
            100.0 * token_counts[k] / n_tokens,
        )
        for k in sorted(type_counts)
    }
    return AmbiguityHistogram(buckets=buckets, max_k=max(buckets), mode=mode)


CSV_HEADER = ("k", "type_count", "type_pct", "token_count", "token_pct")


def write_histogram_csv(hist: AmbiguityHistogram, path: Path) -> None:
    """Emit `k,type_count,type_pct,token_count,token_pct` rows sorted by k."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for k in sorted(hist.buckets):
            tc, tp, nc, np_ = hist.buckets[k]
            writer.writerow([k, tc, f"{tp:.4f}", nc, f"{np_:.4f}"])


def summarize(hist: AmbiguityHistogram) -> list[str]:
    """Human-readable summary lines for the CLI."""
    one_type = hist.buckets.get(1, (0, 0.0, 0, 0.0))
    return [
        f"types with a single diacritization: {one_type[1]:.1f}%",
        f"tokens with a single diacritization: {one_type[3]:.1f}%",
        f"maximum variants for one word: {hist.max_k}",
    ]
