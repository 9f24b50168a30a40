"""Synthetic diacritized corpora for tests and demos.

Sentences are random words over a small Arabic consonant alphabet; the
diacritization rule is deterministic per character (each consonant gets
the short vowel picked by its codepoint), so a character-level model
can both memorize and generalize it.
"""

from __future__ import annotations

import numpy as np

# A dozen common Arabic consonants.
ALPHABET = "بتجدرسشكلمنه"

# fatha, damma, kasra
VOWELS = ("َ", "ُ", "ِ")


def vowel_for(ch: str) -> str:
    return VOWELS[ord(ch) % len(VOWELS)]


def diacritize_rule(bare: str) -> str:
    """Insert the rule vowel after every alphabet character."""
    out = []
    for ch in bare:
        out.append(ch)
        if ch in ALPHABET:
            out.append(vowel_for(ch))
    return "".join(out)


def make_sentences(
    count: int,
    seed: int,
    min_words: int = 3,
    max_words: int = 8,
    min_chars: int = 2,
    max_chars: int = 5,
) -> list[str]:
    """Generate `count` diacritized sentences under the fixed rule."""
    rng = np.random.default_rng(seed)
    sentences = []
    for _ in range(count):
        n_words = int(rng.integers(min_words, max_words + 1))
        words = []
        for _ in range(n_words):
            n_chars = int(rng.integers(min_chars, max_chars + 1))
            letters = rng.integers(0, len(ALPHABET), size=n_chars)
            words.append("".join(ALPHABET[i] for i in letters))
        sentences.append(diacritize_rule(" ".join(words)))
    return sentences
