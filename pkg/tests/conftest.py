import numpy as np
import pytest

from tashkeel.corpus import build_pairs, chunk_corpus
from tashkeel.model import CharVocab, ModelConfig, Seq2SeqModel
from tashkeel.synthetic import make_sentences

# Arabic letters plus the default mark set, for fuzzed text.
ARABIC_LETTERS = "ابتثجحخدذرزسشصضطظعغفقكلمنهوي"
ARABIC_MARKS = "".join(chr(cp) for cp in range(0x064B, 0x0653)) + "ٰ"


def random_sentence(rng: np.random.Generator, with_marks: bool = True,
                    max_words: int = 8) -> str:
    words = []
    for _ in range(int(rng.integers(1, max_words + 1))):
        chars = []
        for _ in range(int(rng.integers(1, 6))):
            chars.append(ARABIC_LETTERS[int(rng.integers(0, len(ARABIC_LETTERS)))])
            if with_marks and rng.random() < 0.5:
                chars.append(ARABIC_MARKS[int(rng.integers(0, len(ARABIC_MARKS)))])
        words.append("".join(chars))
    return " ".join(words)


@pytest.fixture(scope="session")
def toy_pairs():
    """50 synthetic sentence pairs under the deterministic vowel rule."""
    return build_pairs(make_sentences(50, seed=101))


@pytest.fixture(scope="session")
def toy_chunks(toy_pairs):
    return chunk_corpus(toy_pairs, 2)


@pytest.fixture(scope="session")
def toy_vocab(toy_chunks):
    return CharVocab.build(toy_chunks)


def tiny_model(vocab, hidden=12, embed=8, chunk_size=1, seed=0, **kw) -> Seq2SeqModel:
    config = ModelConfig(embed_dim=embed, hidden_dim=hidden,
                         chunk_size=chunk_size, dropout=0.0, **kw)
    return Seq2SeqModel(config, vocab, seed=seed)
