"""Parallel-corpus construction for diacritic restoration.

Ingests diacritized text (XML or plaintext), strips the diacritics to
produce aligned source/target sentence pairs, splits them 70/15/15,
windows them into n-word chunks, and (de)tokenizes chunks into the
character format the models consume.

All text is NFC-normalized at ingestion so combining-mark order is
canonical before any comparison.
"""

from __future__ import annotations

import hashlib
import re
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from tashkeel.errors import FormatError, InputError, XmlParseError

# Sentinel chunk size: one chunk spanning the whole sentence.
SENTENCE = "sentence"

# Word-boundary token inside character-tokenized chunks.
BOUNDARY = "_"

# Combining marks stripped by default: tanwin, short vowels, shadda,
# sukun (U+064B..U+0652) plus the dagger alif (U+0670).
DEFAULT_MARKS = frozenset(range(0x064B, 0x0653)) | {0x0670}

# Optional extension: hamza marks U+0653..U+0655.
EXTENDED_MARKS = frozenset(range(0x0653, 0x0656))

_WS_RE = re.compile(r"\s+")


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class DiacriticSet:
    """The set of combining marks treated as diacritics.

    Membership is total over all Unicode scalars: anything not in
    `codepoints` is kept by `strip`.
    """

    codepoints: frozenset[int] = DEFAULT_MARKS

    def __post_init__(self):
        if not self.codepoints:
            raise InputError("diacritic set must not be empty")
        for cp in self.codepoints:
            if not (0x0600 <= cp <= 0x06FF) or unicodedata.combining(chr(cp)) == 0:
                raise InputError(
                    f"U+{cp:04X} is not a combining mark in the Arabic block"
                )
        object.__setattr__(
            self, "_table", {cp: None for cp in self.codepoints}
        )

    @classmethod
    def default(cls, extended: bool = False) -> "DiacriticSet":
        cps = DEFAULT_MARKS | EXTENDED_MARKS if extended else DEFAULT_MARKS
        return cls(frozenset(cps))

    def __contains__(self, ch: str) -> bool:
        return ord(ch) in self.codepoints

    def strip(self, text: str) -> str:
        return text.translate(self._table)

    def spec(self) -> str:
        """Compact textual form for manifests, e.g. '064B-0652,0670'."""
        cps = sorted(self.codepoints)
        runs = []
        start = prev = cps[0]
        for cp in cps[1:]:
            if cp == prev + 1:
                prev = cp
                continue
            runs.append((start, prev))
            start = prev = cp
        runs.append((start, prev))
        return ",".join(
            f"{a:04X}" if a == b else f"{a:04X}-{b:04X}" for a, b in runs
        )

    @classmethod
    def from_spec(cls, spec: str) -> "DiacriticSet":
        cps: set[int] = set()
        for part in spec.split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-")
                cps.update(range(int(a, 16), int(b, 16) + 1))
            elif part:
                cps.add(int(part, 16))
        return cls(frozenset(cps))


def strip_diacritics(text: str, marks: DiacriticSet | None = None) -> str:
    """Delete every codepoint of `marks` from `text`, keeping all else.

    Total and idempotent; expects NFC-normalized input.
    """
    marks = marks or DiacriticSet()
    return marks.strip(text)


@dataclass(frozen=True)
class SentencePair:
    """Aligned (undiacritized, diacritized) sentence; the atomic corpus unit."""

    src: str
    tgt: str
    id: int

    def check(self, marks: DiacriticSet) -> None:
        if marks.strip(self.tgt) != self.src:
            raise InputError(f"pair {self.id}: stripping tgt does not yield src")
        if any(ch in marks for ch in self.src):
            raise InputError(f"pair {self.id}: src still carries diacritics")


@dataclass
class CorpusSplit:
    """Deterministic 70/15/15 partition of the corpus."""

    train: list[SentencePair]
    valid: list[SentencePair]
    test: list[SentencePair]
    seed: int
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class ChunkPair:
    """An n-word window of a sentence pair, character-tokenized.

    Inter-word boundaries appear as the reserved token "_"; no token is
    whitespace.
    """

    src_tokens: tuple[str, ...]
    tgt_tokens: tuple[str, ...]
    chunk_size: int | str
    origin: tuple[int, int]


@dataclass
class BuildStats:
    """Diagnostics from corpus construction."""

    kept: int = 0
    dropped_empty: int = 0
    skipped_mismatch: int = 0
    skipped_ids: list[int] = field(default_factory=list)


def _collapse_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def extract_sentences_xml(document: str, selector: str) -> list[str]:
    """Extract one sentence per element matching `selector`, in order.

    `selector` is a tag name or an ElementTree path. Text content is
    whitespace-collapsed; empty fields are dropped.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        data = document.encode("utf-8")
        offset = sum(len(ln) + 1 for ln in data.split(b"\n")[: line - 1]) + col
        raise XmlParseError(f"malformed XML: {exc}", offset) from exc
    if "/" in selector or selector.startswith("."):
        elems = root.findall(selector)
    else:
        elems = list(root.iter(selector))
    if not elems:
        raise InputError(f"selector {selector!r} matched no elements")
    out = []
    for el in elems:
        text = _collapse_ws("".join(el.itertext()))
        if text:
            out.append(text)
    return out


def extract_sentences_lines(document: str) -> list[str]:
    """Plaintext ingestion: one sentence per line, blank lines dropped."""
    out = []
    for line in document.splitlines():
        line = _collapse_ws(line)
        if line:
            out.append(line)
    return out


def extract_sentences(document: str, selector: str | None = None) -> list[str]:
    if selector is None:
        return extract_sentences_lines(document)
    return extract_sentences_xml(document, selector)


def build_pairs(
    sentences: Iterable[str],
    marks: DiacriticSet | None = None,
    stats: BuildStats | None = None,
) -> list[SentencePair]:
    """Pair each sentence with its diacritic-stripped form.

    Sentences whose stripped form is empty are dropped and counted in
    `stats`. Input is NFC-normalized here.
    """
    marks = marks or DiacriticSet()
    stats = stats if stats is not None else BuildStats()
    pairs = []
    for tgt in sentences:
        tgt = _collapse_ws(nfc(tgt))
        src = marks.strip(tgt)
        if not src.strip():
            stats.dropped_empty += 1
            continue
        pair = SentencePair(src=src, tgt=tgt, id=len(pairs))
        pairs.append(pair)
        stats.kept += 1
    return pairs


def split_corpus(
    pairs: Sequence[SentencePair],
    seed: int,
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> CorpusSplit:
    """Shuffle and partition `pairs` into train/valid/test.

    The shuffle is a permutation drawn from numpy's PCG64 generator
    seeded with `seed`, so the split is bit-reproducible across
    platforms. Split sizes are within one item of the exact ratios.
    """
    if len(pairs) < 10:
        raise InputError(f"need at least 10 pairs to split, got {len(pairs)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InputError(f"split ratios must sum to 1, got {ratios}")
    order = np.random.default_rng(seed).permutation(len(pairs))
    shuffled = [pairs[i] for i in order]
    n = len(pairs)
    n_train = int(ratios[0] * n + 0.5)
    n_valid = int(ratios[1] * n + 0.5)
    return CorpusSplit(
        train=shuffled[:n_train],
        valid=shuffled[n_train : n_train + n_valid],
        test=shuffled[n_train + n_valid :],
        seed=seed,
        ratios=ratios,
    )


def parse_chunk_size(value: int | str) -> int | str:
    if isinstance(value, str):
        if value.lower() == SENTENCE:
            return SENTENCE
        try:
            value = int(value)
        except ValueError:
            raise InputError(f"chunk size must be 1..10 or 'sentence', got {value!r}")
    if not 1 <= value <= 10:
        raise InputError(f"chunk size must be 1..10 or 'sentence', got {value}")
    return value


def tokenize_chars(chunk: str) -> tuple[str, ...]:
    """Split a chunk into character tokens, spaces becoming "_".

    The chunk must have no leading/trailing/duplicate spaces, and must
    not contain a literal "_" (the reserved boundary token).
    """
    if BOUNDARY in chunk:
        raise InputError(f"input contains reserved boundary character {BOUNDARY!r}")
    if chunk != _collapse_ws(chunk):
        raise InputError("chunk has leading/trailing/duplicate whitespace")
    return tuple(BOUNDARY if ch == " " else ch for ch in chunk)


def detokenize(tokens: Iterable[str]) -> str:
    """Inverse of tokenize_chars: "_" becomes a space, the rest concatenate."""
    return "".join(" " if tok == BOUNDARY else tok for tok in tokens)


def chunk_pairs(
    pair: SentencePair,
    n: int | str,
    stats: BuildStats | None = None,
) -> list[ChunkPair]:
    """Window a sentence pair into consecutive non-overlapping n-word chunks.

    The final window may be shorter. Window i of the source aligns with
    window i of the target; pairs whose sides disagree on word count are
    skipped with a diagnostic (possible only for externally supplied
    parallel data). n = SENTENCE yields a single chunk.
    """
    n = parse_chunk_size(n)
    src_words = pair.src.split()
    tgt_words = pair.tgt.split()
    if len(src_words) != len(tgt_words):
        if stats is not None:
            stats.skipped_mismatch += 1
            stats.skipped_ids.append(pair.id)
        return []
    width = len(src_words) if n == SENTENCE else n
    chunks = []
    for idx, start in enumerate(range(0, len(src_words), width)):
        src_chunk = " ".join(src_words[start : start + width])
        tgt_chunk = " ".join(tgt_words[start : start + width])
        chunks.append(
            ChunkPair(
                src_tokens=tokenize_chars(src_chunk),
                tgt_tokens=tokenize_chars(tgt_chunk),
                chunk_size=n,
                origin=(pair.id, idx),
            )
        )
    return chunks


def chunk_corpus(
    pairs: Iterable[SentencePair],
    n: int | str,
    stats: BuildStats | None = None,
) -> list[ChunkPair]:
    out: list[ChunkPair] = []
    for pair in pairs:
        out.extend(chunk_pairs(pair, n, stats))
    return out


def _check_dataset_text(raw: bytes, path: Path) -> str:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not valid UTF-8: {exc}") from exc
    if "\r" in text:
        raise FormatError(f"{path}: CRLF line endings are not allowed")
    if "\t" in text:
        raise FormatError(f"{path}: tab characters are not allowed")
    return text


def _parse_dataset_side(path: Path) -> list[tuple[str, ...]]:
    text = _check_dataset_text(path.read_bytes(), path)
    rows = []
    for ln, line in enumerate(text.split("\n")[:-1], start=1):
        tokens = line.split(" ")
        if any(tok == "" for tok in tokens):
            raise FormatError(f"{path}:{ln}: empty token (stray space)")
        rows.append(tuple(tokens))
    if text and not text.endswith("\n"):
        raise FormatError(f"{path}: missing trailing newline")
    return rows


def write_dataset(chunks: Sequence[ChunkPair], src_path: Path, tgt_path: Path) -> None:
    """Write line-aligned source/target token files.

    UTF-8, LF endings, one chunk per line, tokens joined by single
    spaces. Reading the files back reproduces the chunks bit-exactly.
    """
    src_path = Path(src_path)
    tgt_path = Path(tgt_path)
    try:
        with open(src_path, "w", encoding="utf-8", newline="\n") as fsrc, open(
            tgt_path, "w", encoding="utf-8", newline="\n"
        ) as ftgt:
            for chunk in chunks:
                fsrc.write(" ".join(chunk.src_tokens) + "\n")
                ftgt.write(" ".join(chunk.tgt_tokens) + "\n")
    except OSError as exc:
        raise InputError(f"cannot write dataset ({src_path}, {tgt_path}): {exc}") from exc


def read_dataset(
    src_path: Path, tgt_path: Path, chunk_size: int | str = SENTENCE
) -> list[ChunkPair]:
    """Read line-aligned dataset files written by write_dataset."""
    src_path = Path(src_path)
    tgt_path = Path(tgt_path)
    try:
        src_rows = _parse_dataset_side(src_path)
        tgt_rows = _parse_dataset_side(tgt_path)
    except OSError as exc:
        raise InputError(f"cannot read dataset ({src_path}, {tgt_path}): {exc}") from exc
    if len(src_rows) != len(tgt_rows):
        raise FormatError(
            f"line count mismatch: {src_path} has {len(src_rows)}, "
            f"{tgt_path} has {len(tgt_rows)}"
        )
    return [
        ChunkPair(src_tokens=s, tgt_tokens=t, chunk_size=chunk_size, origin=(i, 0))
        for i, (s, t) in enumerate(zip(src_rows, tgt_rows))
    ]


def write_sentences(pairs: Sequence[SentencePair], src_path: Path, tgt_path: Path) -> None:
    """Write line-aligned sentence files (one sentence per line)."""
    with open(src_path, "w", encoding="utf-8", newline="\n") as fsrc, open(
        tgt_path, "w", encoding="utf-8", newline="\n"
    ) as ftgt:
        for pair in pairs:
            fsrc.write(pair.src + "\n")
            ftgt.write(pair.tgt + "\n")


def read_sentences(src_path: Path, tgt_path: Path) -> list[SentencePair]:
    src = read_lines(src_path)
    tgt = read_lines(tgt_path)
    if len(src) != len(tgt):
        raise FormatError(
            f"line count mismatch: {src_path} has {len(src)}, {tgt_path} has {len(tgt)}"
        )
    return [SentencePair(src=s, tgt=t, id=i) for i, (s, t) in enumerate(zip(src, tgt))]


def read_lines(path: Path) -> list[str]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    text = _check_dataset_text(raw, path)
    return text.split("\n")[:-1] if text else []


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(path: Path, entries: dict[str, object]) -> None:
    """Write a key-value manifest, one `key = value` per line, sorted."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(entries):
            fh.write(f"{key} = {entries[key]}\n")


def read_manifest(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for ln, line in enumerate(read_lines(path), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{ln}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries
