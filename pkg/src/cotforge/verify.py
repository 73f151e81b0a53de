"""Boxed-answer extraction, answer comparison, and rollout metrics.

Answer matching is a small rational/decimal normalizer, not a full math
verifier: multiple-choice letters compare case-insensitively, numerics
compare as exact rationals with a 1e-9 relative float fallback, everything
else falls back to whitespace/case-normalized string equality. When a
numeric comparison fails to parse on *both* sides the item is flagged
unverifiable rather than silently scored wrong.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .corpus import AnswerType, BenchmarkItem
from .errors import EmptyRollouts

_BOXED = "\\boxed{"
_FRAC_CMD = re.compile(r"\\[dt]?frac\{([^{}]+)\}\{([^{}]+)\}")
_WS = re.compile(r"\s+")


def extract_boxed(response: str) -> str | None:
    """Contents of the last balanced ``\\boxed{...}`` group, or None.

    Scans backwards so the final answer wins when several boxes appear;
    skips unbalanced groups entirely instead of returning a truncated one.
    """
    search_end = len(response)
    while True:
        idx = response.rfind(_BOXED, 0, search_end)
        if idx == -1:
            return None
        start = idx + len(_BOXED)
        depth = 1
        pos = start
        while pos < len(response) and depth > 0:
            ch = response[pos]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            pos += 1
        if depth == 0:
            return response[start : pos - 1]
        search_end = idx  # unbalanced; keep looking at earlier boxes


def parse_numeric(text: str) -> Fraction | None:
    """Parse ints, decimals, scientific notation, a/b, and \\frac{a}{b}."""
    s = text.strip().strip("$").replace(",", "").replace(" ", "")
    s = _FRAC_CMD.sub(r"(\1)/(\2)", s)
    s = s.replace("(", "").replace(")", "")
    if not s:
        return None
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        return None


def _normalize_text_answer(text: str) -> str:
    return _WS.sub(" ", text.strip().casefold()).rstrip(".")


def _normalize_choice(text: str) -> str | None:
    s = re.sub(r"[^0-9a-zA-Z]+", "", text)
    return s.upper() if len(s) == 1 else None


class MatchDetail(Enum):
    MATCH = "match"
    MISMATCH = "mismatch"
    UNVERIFIABLE = "unverifiable"


def _infer_answer_type(gold: str) -> AnswerType:
    if parse_numeric(gold) is not None:
        return AnswerType.NUMERIC
    if _normalize_choice(gold) is not None:
        return AnswerType.MULTIPLE_CHOICE
    return AnswerType.STRING


def match_detail(
    candidate: str, gold: str, answer_type: AnswerType | None = None
) -> MatchDetail:
    """Three-way comparison; benchmark items with no declared answer type
    are matched by the shape of the gold answer."""
    if answer_type is None:
        answer_type = _infer_answer_type(gold)

    if answer_type is AnswerType.MULTIPLE_CHOICE:
        c, g = _normalize_choice(candidate), _normalize_choice(gold)
        if g is None:
            return MatchDetail.UNVERIFIABLE
        return MatchDetail.MATCH if c == g else MatchDetail.MISMATCH

    if answer_type is AnswerType.NUMERIC:
        c, g = parse_numeric(candidate), parse_numeric(gold)
        if c is None and g is None:
            return MatchDetail.UNVERIFIABLE
        if c is None or g is None:
            return MatchDetail.MISMATCH
        if c == g:
            return MatchDetail.MATCH
        close = math.isclose(float(c), float(g), rel_tol=1e-9, abs_tol=0.0)
        return MatchDetail.MATCH if close else MatchDetail.MISMATCH

    same = _normalize_text_answer(candidate) == _normalize_text_answer(gold)
    return MatchDetail.MATCH if same else MatchDetail.MISMATCH


def answers_match(
    candidate: str, gold: str, answer_type: AnswerType | None = None
) -> bool:
    return match_detail(candidate, gold, answer_type) is MatchDetail.MATCH


def canonical_answer_key(answer: str, answer_type: AnswerType | None = None) -> str:
    """Equivalence key used for majority voting over extracted answers."""
    if answer_type is None:
        answer_type = _infer_answer_type(answer)
    if answer_type is AnswerType.NUMERIC:
        value = parse_numeric(answer)
        if value is not None:
            return f"num:{value}"
    if answer_type is AnswerType.MULTIPLE_CHOICE:
        choice = _normalize_choice(answer)
        if choice is not None:
            return f"mc:{choice}"
    return f"str:{_normalize_text_answer(answer)}"


# ---------------------------------------------------------------------------
# Rollout metrics
# ---------------------------------------------------------------------------

@dataclass
class RolloutSet:
    item_id: str
    gold_answer: str
    responses: list[str]
    answer_type: AnswerType | None = None

    @property
    def extracted(self) -> list[str | None]:
        return [extract_boxed(r) for r in self.responses]

    @property
    def verdicts(self) -> list[bool]:
        return [
            a is not None and answers_match(a, self.gold_answer, self.answer_type)
            for a in self.extracted
        ]


@dataclass(frozen=True)
class RolloutScores:
    pass1: float
    best_n: int
    maj_n: int


def majority_answer(rollouts: RolloutSet) -> str | None:
    """Strictly modal extracted answer, or None on ties / no extractions."""
    answers = [a for a in rollouts.extracted if a is not None]
    if not answers:
        return None
    counts = Counter(canonical_answer_key(a, rollouts.answer_type) for a in answers)
    ranked = counts.most_common(2)
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return None
    top_key = ranked[0][0]
    for a in answers:
        if canonical_answer_key(a, rollouts.answer_type) == top_key:
            return a
    return None


def score_rollouts(rollouts: RolloutSet) -> RolloutScores:
    if not rollouts.responses:
        raise EmptyRollouts()
    verdicts = rollouts.verdicts
    pass1 = sum(verdicts) / len(verdicts)
    best_n = 1 if any(verdicts) else 0
    maj = majority_answer(rollouts)
    maj_n = (
        1
        if maj is not None and answers_match(maj, rollouts.gold_answer, rollouts.answer_type)
        else 0
    )
    return RolloutScores(pass1=pass1, best_n=best_n, maj_n=maj_n)


# ---------------------------------------------------------------------------
# Failure indicator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FailureRecord:
    item_id: str
    question: str
    gold_answer: str
    model_answer: str | None
    w: int

    def to_dict(self) -> dict:
        d: dict = {
            "item_id": self.item_id,
            "question": self.question,
            "gold_answer": self.gold_answer,
        }
        if self.model_answer is not None:
            d["model_answer"] = self.model_answer
        d["w"] = self.w
        return d

    @staticmethod
    def from_dict(obj: dict) -> "FailureRecord":
        return FailureRecord(
            item_id=str(obj["item_id"]),
            question=obj["question"],
            gold_answer=obj["gold_answer"],
            model_answer=obj.get("model_answer"),
            w=int(obj["w"]),
        )


def failure_indicator(
    item: BenchmarkItem, response: str, answer_type: AnswerType | None = None
) -> FailureRecord:
    """w = 0 iff a boxed answer exists and verifies; unextractable fails."""
    answer = extract_boxed(response)
    correct = answer is not None and answers_match(answer, item.gold_answer, answer_type)
    return FailureRecord(
        item_id=item.id,
        question=item.question,
        gold_answer=item.gold_answer,
        model_answer=answer,
        w=0 if correct else 1,
    )
