"""Tokenization, shingling, and n-gram repetition statistics.

The default tokenizer is a normalized whitespace split. Length-percentile
sampling only consumes length *ranks*, for which whitespace counts are a
monotone proxy of subword counts at corpus scale; a subword tokenizer can be
injected anywhere a ``Tokenizer`` is accepted without touching callers.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import normalize_question
from .errors import InvalidN

#: Maps raw text to a token list. Must never emit empty-string tokens.
Tokenizer = Callable[[str], list[str]]

#: Default n-gram order and threshold for the curation-time repetition filter.
DEFAULT_REPETITION_N = 10
DEFAULT_REPETITION_THRESHOLD = 0.30


def whitespace_tokenizer(text: str) -> list[str]:
    """Normalize, then split on whitespace."""
    return normalize_question(text).split()


def identity_tokenizer(text: str) -> list[str]:
    """Split pre-tokenized input on raw whitespace, no normalization."""
    return text.split()


def count_tokens(text: str, tokenizer: Tokenizer = whitespace_tokenizer) -> int:
    return len(tokenizer(text))


def word_ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    """All contiguous windows of length ``n``; empty when the text is shorter."""
    if n < 1:
        raise InvalidN(n)
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


@dataclass(frozen=True)
class RepetitionStats:
    n: int
    total_ngrams: int
    unique_ngrams: int

    @property
    def duplication_ratio(self) -> float:
        if self.total_ngrams == 0:
            return 0.0
        return 1.0 - self.unique_ngrams / self.total_ngrams


def repetition_stats(
    text: str, n: int, tokenizer: Tokenizer = whitespace_tokenizer
) -> RepetitionStats:
    """Duplication ratio of word n-grams; 0 for texts shorter than ``n`` tokens."""
    if n < 1:
        raise InvalidN(n)
    grams = word_ngrams(tokenizer(text), n)
    return RepetitionStats(n=n, total_ngrams=len(grams), unique_ngrams=len(set(grams)))


def repetition_rate(
    text: str, n: int, tokenizer: Tokenizer = whitespace_tokenizer
) -> float:
    """Shared definition with `repetition_stats`; exposed under the reward
    layer's name so both call sites configure n independently."""
    return repetition_stats(text, n, tokenizer).duplication_ratio


def ngram_multiset(tokens: Sequence[str], n: int) -> Counter:
    """n-gram multiset, useful for overlap accounting in tests."""
    return Counter(word_ngrams(tokens, n))
