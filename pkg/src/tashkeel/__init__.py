"""Diacritic restoration for Arabic-script text.

The package covers the full pipeline: building a parallel corpus from
diacritized source text, character-level seq2seq modeling with chunked
context windows, and word-level error-rate evaluation.
"""

__version__ = "0.1.0"

from tashkeel.corpus import (
    DiacriticSet,
    SentencePair,
    SENTENCE,
    build_pairs,
    chunk_pairs,
    detokenize,
    split_corpus,
    strip_diacritics,
    tokenize_chars,
)
from tashkeel.evaluation import WerCounts, align_words, corpus_wer, wer

__all__ = [
    "DiacriticSet",
    "SentencePair",
    "SENTENCE",
    "WerCounts",
    "align_words",
    "build_pairs",
    "chunk_pairs",
    "corpus_wer",
    "detokenize",
    "split_corpus",
    "strip_diacritics",
    "tokenize_chars",
    "wer",
]
