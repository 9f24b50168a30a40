"""Corpus construction: stripping, pairing, splitting, chunking, files."""

import unicodedata

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tashkeel.corpus import (
    BuildStats,
    DiacriticSet,
    SENTENCE,
    SentencePair,
    build_pairs,
    chunk_corpus,
    chunk_pairs,
    detokenize,
    extract_sentences,
    read_dataset,
    read_manifest,
    split_corpus,
    strip_diacritics,
    tokenize_chars,
    write_dataset,
    write_manifest,
)
from tashkeel.errors import FormatError, InputError, XmlParseError

from conftest import ARABIC_LETTERS, ARABIC_MARKS, random_sentence

KATABA = "كَتَبَ"  # katab with three fathas
KTB = "كتب"


class TestDiacriticSet:
    def test_default_covers_short_vowels_and_dagger_alif(self):
        marks = DiacriticSet()
        assert "َ" in marks and "ّ" in marks and "ٰ" in marks
        assert "ٓ" not in marks

    def test_extended_set_adds_hamza_marks(self):
        marks = DiacriticSet.default(extended=True)
        assert "ٓ" in marks and "ٕ" in marks

    def test_non_combining_codepoint_rejected(self):
        with pytest.raises(InputError):
            DiacriticSet(frozenset({0x0628}))  # beh, a base letter

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            DiacriticSet(frozenset())

    def test_spec_roundtrip(self):
        marks = DiacriticSet.default(extended=True)
        assert DiacriticSet.from_spec(marks.spec()).codepoints == marks.codepoints


class TestStripDiacritics:
    def test_text_without_marks_is_fixed_point(self):
        assert strip_diacritics(KTB) == KTB

    def test_marked_text_loses_listed_codepoints(self):
        assert strip_diacritics(KATABA) == KTB

    def test_shadda_plus_fatha_leaves_base_letter(self):
        # filter oracle: rescan codepoint by codepoint
        marks = DiacriticSet()
        text = unicodedata.normalize("NFC", "بَّج")
        expected = "".join(ch for ch in text if ord(ch) not in marks.codepoints)
        assert strip_diacritics(text, marks) == expected == "بج"

    def test_matches_codepoint_filter_oracle_on_fuzz(self):
        marks = DiacriticSet()
        rng = np.random.default_rng(5)
        for _ in range(300):
            text = random_sentence(rng)
            oracle = "".join(ch for ch in text if ord(ch) not in marks.codepoints)
            assert strip_diacritics(text, marks) == oracle

    @given(st.text(alphabet=ARABIC_LETTERS + ARABIC_MARKS + " ", max_size=40))
    def test_idempotent(self, text):
        once = strip_diacritics(text)
        assert strip_diacritics(once) == once


class TestExtractSentences:
    def test_xml_selector(self):
        assert extract_sentences("<d><s>A</s><s>B</s></d>", "s") == ["A", "B"]

    def test_plaintext_lines_drop_blanks(self):
        assert extract_sentences("A\n\n  \nB\n") == ["A", "B"]

    def test_selector_without_match_is_error(self):
        with pytest.raises(InputError, match="matched no elements"):
            extract_sentences("<d><x>A</x></d>", "s")

    def test_malformed_xml_reports_byte_offset(self):
        with pytest.raises(XmlParseError) as exc:
            extract_sentences("<d><s>A</d>", "s")
        assert exc.value.byte_offset > 0

    def test_nested_text_is_collapsed(self):
        doc = "<d><s>A  <i>B</i>\n C</s></d>"
        assert extract_sentences(doc, "s") == ["A B C"]


class TestBuildPairs:
    def test_single_sentence(self):
        pairs = build_pairs([KATABA])
        assert len(pairs) == 1
        assert pairs[0].src == KTB and pairs[0].tgt == KATABA

    def test_bare_sentence_gives_identical_sides(self):
        pairs = build_pairs([KTB])
        assert pairs[0].src == pairs[0].tgt == KTB

    def test_marks_only_sentence_dropped_and_counted(self):
        stats = BuildStats()
        pairs = build_pairs(["َُ", KATABA], stats=stats)
        assert len(pairs) == 1
        assert stats.dropped_empty == 1

    def test_invariant_holds_on_synthetic_corpus(self):
        rng = np.random.default_rng(11)
        sentences = [random_sentence(rng) for _ in range(100)]
        marks = DiacriticSet()
        pairs = build_pairs(sentences, marks)
        assert len(pairs) == 100
        for pair in pairs:
            pair.check(marks)  # strip(tgt) == src re-verification


class TestSplitCorpus:
    def _pairs(self, n):
        return [SentencePair(src=f"w{i}", tgt=f"w{i}", id=i) for i in range(n)]

    def test_20_pairs_give_14_3_3(self):
        split = split_corpus(self._pairs(20), seed=1)
        assert (len(split.train), len(split.valid), len(split.test)) == (14, 3, 3)

    def test_same_seed_same_split(self):
        pairs = self._pairs(57)
        a = split_corpus(pairs, seed=9)
        b = split_corpus(pairs, seed=9)
        assert [p.id for p in a.train] == [p.id for p in b.train]
        assert [p.id for p in a.test] == [p.id for p in b.test]

    def test_partition_set_algebra(self):
        pairs = self._pairs(1000)
        split = split_corpus(pairs, seed=4)
        train = {p.id for p in split.train}
        valid = {p.id for p in split.valid}
        test = {p.id for p in split.test}
        assert not (train & valid) and not (train & test) and not (valid & test)
        assert train | valid | test == {p.id for p in pairs}

    def test_sizes_within_one_of_exact_ratio(self):
        for n in (10, 13, 17, 101, 999):
            split = split_corpus(self._pairs(n), seed=0)
            for part, ratio in zip((split.train, split.valid, split.test),
                                   split.ratios):
                assert abs(len(part) - ratio * n) <= 1

    def test_too_few_pairs_rejected(self):
        with pytest.raises(InputError, match="at least 10"):
            split_corpus(self._pairs(9), seed=0)


class TestChunking:
    def test_eight_words_chunk_five_gives_5_and_3(self):
        words = ["w%d" % i for i in range(8)]
        pair = SentencePair(src=" ".join(words), tgt=" ".join(words), id=0)
        chunks = chunk_pairs(pair, 5)
        assert len(chunks) == 2
        assert detokenize(chunks[0].src_tokens).split() == words[:5]
        assert detokenize(chunks[1].src_tokens).split() == words[5:]

    def test_sentence_mode_gives_single_chunk(self):
        pair = SentencePair(src="a b c", tgt="a b c", id=0)
        chunks = chunk_pairs(pair, SENTENCE)
        assert len(chunks) == 1
        assert detokenize(chunks[0].src_tokens) == "a b c"

    def test_word_count_mismatch_skipped_with_diagnostic(self):
        stats = BuildStats()
        pair = SentencePair(src="a b", tgt="a b c", id=7)
        assert chunk_pairs(pair, 2, stats) == []
        assert stats.skipped_mismatch == 1 and stats.skipped_ids == [7]

    def test_invalid_sizes_rejected(self):
        pair = SentencePair(src="a b", tgt="a b", id=0)
        for bad in (0, 11, "word"):
            with pytest.raises(InputError):
                chunk_pairs(pair, bad)

    def test_concatenation_roundtrip_10k_sentences_all_sizes(self):
        rng = np.random.default_rng(3)
        sizes = list(range(1, 11)) + [SENTENCE]
        for i in range(10_000):
            sentence = random_sentence(rng, with_marks=False)
            pair = SentencePair(src=sentence, tgt=sentence, id=i)
            n = sizes[i % len(sizes)]
            chunks = chunk_pairs(pair, n)
            rebuilt = " ".join(detokenize(c.src_tokens) for c in chunks)
            assert rebuilt == sentence


class TestTokenize:
    def test_boundary_token_between_words(self):
        assert tokenize_chars("اب جد") == (
            "ا", "ب", "_", "ج", "د")

    def test_single_word_has_no_boundary(self):
        assert tokenize_chars("اب") == ("ا", "ب")

    def test_literal_underscore_is_reserved(self):
        with pytest.raises(InputError, match="reserved"):
            tokenize_chars("a_b")

    def test_detokenize_empty(self):
        assert detokenize([]) == ""

    @given(st.lists(
        st.text(alphabet=ARABIC_LETTERS + ARABIC_MARKS, min_size=1, max_size=8),
        min_size=1, max_size=6))
    @settings(max_examples=200)
    def test_roundtrip_property(self, words):
        text = " ".join(words)
        assert detokenize(tokenize_chars(text)) == text


class TestDatasetFiles:
    def _chunks(self, n_sentences):
        rng = np.random.default_rng(13)
        sentences = [random_sentence(rng) for _ in range(n_sentences)]
        return chunk_corpus(build_pairs(sentences), 3)

    def test_single_chunk_line_format(self, tmp_path):
        pair = SentencePair(src="اب جد",
                            tgt="اب جد", id=0)
        chunks = chunk_pairs(pair, SENTENCE)
        write_dataset(chunks, tmp_path / "x.src", tmp_path / "x.tgt")
        raw = (tmp_path / "x.src").read_bytes().decode("utf-8")
        assert raw == "ا ب _ ج د\n"

    def test_crlf_rejected(self, tmp_path):
        src = tmp_path / "bad.src"
        tgt = tmp_path / "bad.tgt"
        src.write_bytes("ا ب\r\n".encode("utf-8"))
        tgt.write_bytes("ا ب\n".encode("utf-8"))
        with pytest.raises(FormatError, match="CRLF"):
            read_dataset(src, tgt)

    def test_line_count_mismatch_rejected(self, tmp_path):
        (tmp_path / "a.src").write_text("x\ny\n", encoding="utf-8")
        (tmp_path / "a.tgt").write_text("x\n", encoding="utf-8")
        with pytest.raises(FormatError, match="mismatch"):
            read_dataset(tmp_path / "a.src", tmp_path / "a.tgt")

    def test_10k_chunks_roundtrip_byte_identical(self, tmp_path):
        chunks = self._chunks(6000)
        assert len(chunks) >= 10_000
        chunks = chunks[:10_000]
        src1, tgt1 = tmp_path / "d1.src", tmp_path / "d1.tgt"
        write_dataset(chunks, src1, tgt1)
        back = read_dataset(src1, tgt1, 3)
        assert [c.src_tokens for c in back] == [c.src_tokens for c in chunks]
        assert [c.tgt_tokens for c in back] == [c.tgt_tokens for c in chunks]
        src2, tgt2 = tmp_path / "d2.src", tmp_path / "d2.tgt"
        write_dataset(back, src2, tgt2)
        assert src1.read_bytes() == src2.read_bytes()
        assert tgt1.read_bytes() == tgt2.read_bytes()


class TestManifest:
    def test_roundtrip_with_comments(self, tmp_path):
        path = tmp_path / "manifest.txt"
        write_manifest(path, {"seed": 3, "chunk_size": "sentence"})
        text = path.read_text(encoding="utf-8")
        path.write_text("# header comment\n" + text, encoding="utf-8")
        assert read_manifest(path) == {"seed": "3", "chunk_size": "sentence"}

    def test_bad_line_rejected(self, tmp_path):
        path = tmp_path / "manifest.txt"
        path.write_text("no equals sign here\n", encoding="utf-8")
        with pytest.raises(FormatError):
            read_manifest(path)
