"""Tokenization and n-gram repetition statistics."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotforge.errors import InvalidN
from cotforge.textstats import (
    count_tokens,
    identity_tokenizer,
    repetition_rate,
    repetition_stats,
    word_ngrams,
)


class TestCountTokens:
    def test_empty(self):
        assert count_tokens("") == 0

    def test_whitespace_collapse(self):
        assert count_tokens("a b  c") == 3

    def test_large_synthetic(self):
        text = " ".join(f"w{i}" for i in range(10_000))
        assert count_tokens(text) == 10_000

    def test_identity_tokenizer_is_length(self):
        tokens = ["alpha", "beta", "gamma"]
        assert count_tokens(" ".join(tokens), identity_tokenizer) == len(tokens)


class TestWordNgrams:
    def test_basic(self):
        assert word_ngrams(["a", "b", "c"], 2) == [("a", "b"), ("b", "c")]

    def test_window_longer_than_text(self):
        assert word_ngrams([f"t{i}" for i in range(12)], 13) == []

    def test_count_formula(self):
        grams = word_ngrams([f"t{i}" for i in range(100)], 13)
        assert len(grams) == 88  # 100 - 13 + 1

    def test_invalid_n(self):
        with pytest.raises(InvalidN):
            word_ngrams(["a"], 0)


class TestRepetitionStats:
    def test_ten_identical_words(self):
        stats = repetition_stats("spam " * 10, 2)
        assert stats.total_ngrams == 9
        assert stats.unique_ngrams == 1
        assert stats.duplication_ratio == pytest.approx(1 - 1 / 9)

    def test_all_distinct(self):
        assert repetition_stats("a b c d e f", 2).duplication_ratio == 0.0

    def test_empty_text(self):
        assert repetition_stats("", 3).duplication_ratio == 0.0

    def test_short_text_zero(self):
        assert repetition_stats("one two", 10).duplication_ratio == 0.0

    def test_invalid_n(self):
        with pytest.raises(InvalidN):
            repetition_stats("a b", 0)


class TestRepetitionRate:
    def test_delegates_to_stats(self):
        for text, n in [("spam " * 10, 2), ("a b c d", 2), ("", 3)]:
            assert repetition_rate(text, n) == repetition_stats(text, n).duplication_ratio

    def test_unigram_repeat(self):
        assert repetition_rate("x x x x x", 1) == pytest.approx(0.8)

    def test_self_concat_never_decreases(self, rng):
        # brute-force property: doubling a text cannot reduce its n-gram
        # repetition rate
        vocab = [f"v{i}" for i in range(12)]
        for _ in range(200):
            k = int(rng.integers(1, 40))
            n = int(rng.integers(1, 6))
            text = " ".join(vocab[j] for j in rng.integers(0, len(vocab), size=k))
            assert repetition_rate(text + " " + text, n) >= repetition_rate(text, n) - 1e-12

    @given(st.text(alphabet="ab ", max_size=120), st.integers(1, 6))
    @settings(max_examples=300, deadline=None)
    def test_ratio_bounds(self, text, n):
        rate = repetition_rate(text, n)
        assert 0.0 <= rate <= 1.0

    def test_monotone_window(self, rng):
        # for fixed text, total n-gram count is non-increasing in n
        vocab = [f"v{i}" for i in range(8)]
        for _ in range(50):
            k = int(rng.integers(1, 50))
            text = " ".join(vocab[j] for j in rng.integers(0, len(vocab), size=k))
            totals = [repetition_stats(text, n).total_ngrams for n in range(1, 10)]
            assert all(a >= b for a, b in zip(totals, totals[1:]))
