"""Word-level alignment, WER, and baselines.

WER = (S + D + I) / (S + D + C) over a minimal edit alignment of
whitespace-delimited words; ties between minimal alignments resolve
toward the most correct words. A word counts as correct only when it
matches the reference exactly (after NFC), so a single wrong diacritic
makes the whole word wrong.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from tashkeel.ambiguity import AmbiguityLexicon
from tashkeel.errors import InputError


@dataclass(frozen=True)
class WerCounts:
    """Substitution/deletion/insertion/correct tallies.

    Always satisfies S + D + C == len(ref) and S + I + C == len(hyp).
    """

    S: int
    D: int
    I: int
    C: int

    def __add__(self, other: "WerCounts") -> "WerCounts":
        return WerCounts(self.S + other.S, self.D + other.D,
                         self.I + other.I, self.C + other.C)


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> WerCounts:
    """Minimal-cost word alignment with unit S/D/I costs.

    Among all minimal alignments the one with the most matches wins
    (match-preferred tie-breaking), which pins down all four counts.
    """
    n_ref, n_hyp = len(ref), len(hyp)
    # dp rows hold (cost, matches) for the current reference prefix
    prev = [(j, 0) for j in range(n_hyp + 1)]
    for i in range(1, n_ref + 1):
        cur = [(i, 0)] + [None] * n_hyp
        r_word = ref[i - 1]
        for j in range(1, n_hyp + 1):
            match = r_word == hyp[j - 1]
            d_cost, d_c = prev[j - 1]
            diag = (d_cost + (0 if match else 1), d_c + (1 if match else 0))
            del_cost, del_c = prev[j]
            ins_cost, ins_c = cur[j - 1]
            best = diag
            for cand in ((del_cost + 1, del_c), (ins_cost + 1, ins_c)):
                if cand[0] < best[0] or (cand[0] == best[0] and cand[1] > best[1]):
                    best = cand
            cur[j] = best
        prev = cur
    cost, correct = prev[n_hyp]
    insertions = cost - (n_ref - correct)
    deletions = cost - (n_hyp - correct)
    substitutions = n_ref - correct - deletions
    return WerCounts(S=substitutions, D=deletions, I=insertions, C=correct)


def wer(counts: WerCounts) -> float:
    """Word error rate (S + D + I) / (S + D + C)."""
    denom = counts.S + counts.D + counts.C
    if denom == 0:
        raise InputError("WER undefined for an empty reference")
    return (counts.S + counts.D + counts.I) / denom


@dataclass
class WerReport:
    """Per-sentence counts with micro and macro corpus aggregates.

    Micro sums counts over the corpus before applying the formula and
    is the headline number; macro is the mean of per-sentence rates.
    """

    sentences: list[WerCounts]
    totals: WerCounts
    micro: float
    macro: float

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)

    @property
    def micro_pct(self) -> float:
        return 100.0 * self.micro

    @property
    def macro_pct(self) -> float:
        return 100.0 * self.macro


def corpus_wer(refs: Sequence[str], hyps: Sequence[str]) -> WerReport:
    """Score line-aligned corpora; each element is one sentence."""
    if len(refs) != len(hyps):
        raise InputError(
            f"reference has {len(refs)} sentences, hypothesis {len(hyps)}"
        )
    if not refs:
        raise InputError("empty corpus")
    per_sentence = []
    rates = []
    totals = WerCounts(0, 0, 0, 0)
    for ref, hyp in zip(refs, hyps):
        counts = align_words(ref.split(), hyp.split())
        per_sentence.append(counts)
        rates.append(wer(counts))
        totals = totals + counts
    return WerReport(
        sentences=per_sentence,
        totals=totals,
        micro=wer(totals),
        macro=sum(rates) / len(rates),
    )


def no_prediction(refs: Sequence[str], srcs: Sequence[str]) -> WerReport:
    """Baseline scoring the undiacritized input against the reference."""
    return corpus_wer(refs, srcs)


def lexicon_baseline(lexicon: AmbiguityLexicon, src_sentence: str) -> str:
    """Replace each word with its most frequent diacritized form.

    Ties go to the lexicographically smallest form; out-of-vocabulary
    words pass through unchanged, so the output always strips back to
    the input.
    """
    out = []
    for word in src_sentence.split():
        form = lexicon.most_frequent(word)
        out.append(form if form is not None else word)
    return " ".join(out)
