"""Record schemas, text normalization, and newline-delimited JSON corpus I/O.

All pipeline stages exchange `Sample` records serialized one-per-line as
UTF-8 JSON. Optional fields serialize as absent keys (never ``null``) so
golden files stay byte-stable.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DuplicateId, IoError, MalformedRecord


class Domain(str, Enum):
    MATH = "Math"
    STEM = "STEM"
    HUMANITIES_SOCIAL_SCIENCE = "HumanitiesSocialScience"
    BUSINESS = "Business"
    MEDICINE_BIOLOGY = "MedicineBiology"
    CODE = "Code"


class EducationLevel(str, Enum):
    ELEMENTARY = "Elementary"
    JUNIOR_SECONDARY = "JuniorSecondary"
    SENIOR_SECONDARY = "SeniorSecondary"
    UNDERGRADUATE = "Undergraduate"
    GRADUATE = "Graduate"
    COMPETITION = "Competition"


class AnswerType(str, Enum):
    BOOLEAN = "Boolean"
    MULTIPLE_CHOICE = "MultipleChoice"
    NUMERIC = "Numeric"
    VECTOR_MATRIX = "VectorMatrix"
    INTERVAL = "Interval"
    EXPRESSION = "Expression"
    STRING = "String"
    PROOF = "Proof"
    TEXTUAL_EXPLANATION = "TextualExplanation"
    OTHER = "Other"


#: Answer types whose records must carry a verified answer (narrow-sense
#: verifiability).
VERIFIABLE_TYPES = frozenset({AnswerType.MULTIPLE_CHOICE, AnswerType.NUMERIC})


@dataclass(frozen=True)
class Annotation:
    valid: bool
    domain: Domain
    education_level: EducationLevel
    answer_type: AnswerType
    verified_answer: str | None = None

    def __post_init__(self) -> None:
        if self.answer_type in VERIFIABLE_TYPES and self.verified_answer is None:
            raise ValueError(
                f"answer_type {self.answer_type.value} requires verified_answer"
            )

    def to_dict(self) -> dict:
        d = {
            "valid": self.valid,
            "domain": self.domain.value,
            "education_level": self.education_level.value,
            "answer_type": self.answer_type.value,
        }
        if self.verified_answer is not None:
            d["verified_answer"] = self.verified_answer
        return d

    @staticmethod
    def from_dict(obj: dict) -> "Annotation":
        return Annotation(
            valid=bool(obj["valid"]),
            domain=Domain(obj["domain"]),
            education_level=EducationLevel(obj["education_level"]),
            answer_type=AnswerType(obj["answer_type"]),
            verified_answer=obj.get("verified_answer"),
        )

    @property
    def verifiable(self) -> bool:
        return self.verified_answer is not None


@dataclass(frozen=True)
class Sample:
    """One curated training record."""

    id: str
    question: str
    source: str
    annotations: Annotation
    response: str | None = None
    token_length: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if self.token_length is not None and self.token_length < 0:
            raise ValueError("token_length must be non-negative")

    def to_dict(self) -> dict:
        d: dict = {"id": self.id, "question": self.question}
        if self.response is not None:
            d["response"] = self.response
        d["source"] = self.source
        d["annotations"] = self.annotations.to_dict()
        if self.token_length is not None:
            d["token_length"] = self.token_length
        return d

    @staticmethod
    def from_dict(obj: dict) -> "Sample":
        tl = obj.get("token_length")
        return Sample(
            id=str(obj["id"]),
            question=obj["question"],
            source=obj["source"],
            annotations=Annotation.from_dict(obj["annotations"]),
            response=obj.get("response"),
            token_length=int(tl) if tl is not None else None,
        )


@dataclass(frozen=True)
class BenchmarkItem:
    """One held-out evaluation item used for decontamination and scoring."""

    id: str
    question: str
    gold_answer: str

    def __post_init__(self) -> None:
        if not self.gold_answer:
            raise ValueError("gold_answer must be non-empty")

    def to_dict(self) -> dict:
        return {"id": self.id, "question": self.question, "gold_answer": self.gold_answer}

    @staticmethod
    def from_dict(obj: dict) -> "BenchmarkItem":
        return BenchmarkItem(
            id=str(obj["id"]),
            question=obj["question"],
            gold_answer=obj["gold_answer"],
        )


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

# Anything that is not a letter/digit collapses to a single space. Underscore
# is treated as punctuation so `\w`-style tokens do not glue across it.
_NON_ALNUM = re.compile(r"[\W_]+", re.UNICODE)


def normalize_question(q: str) -> str:
    """Canonical form used for fingerprinting and shingling.

    NFKC-normalized, casefolded, punctuation collapsed to spaces, whitespace
    collapsed, trimmed. Idempotent.
    """
    q = unicodedata.normalize("NFKC", q).casefold()
    return _NON_ALNUM.sub(" ", q).strip()


# ---------------------------------------------------------------------------
# Corpus I/O
# ---------------------------------------------------------------------------

def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_no, parsed object) for every non-empty line of a JSONL file."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record is not a JSON object")
            yield line_no, obj


def load_corpus(path: str | Path) -> list[Sample]:
    """Read a sample corpus, rejecting malformed records and duplicate ids."""
    samples: list[Sample] = []
    seen: set[str] = set()
    for line_no, obj in iter_jsonl(path):
        try:
            sample = Sample.from_dict(obj)
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
        if sample.id in seen:
            raise DuplicateId(sample.id)
        seen.add(sample.id)
        samples.append(sample)
    return samples


def load_benchmark(path: str | Path) -> list[BenchmarkItem]:
    items: list[BenchmarkItem] = []
    seen: set[str] = set()
    for line_no, obj in iter_jsonl(path):
        try:
            item = BenchmarkItem.from_dict(obj)
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
        if item.id in seen:
            raise DuplicateId(item.id)
        seen.add(item.id)
        items.append(item)
    return items


def write_jsonl(records: Iterable[dict], path: str | Path) -> int:
    """Atomically write dict records as JSONL; returns the record count.

    Writes to a temp file in the destination directory and renames, so a
    crashed run never leaves a truncated corpus behind.
    """
    path = Path(path)
    count = 0
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                for rec in records:
                    fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
                    fh.write("\n")
                    count += 1
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return count


def write_corpus(samples: Iterable[Sample], path: str | Path) -> int:
    return write_jsonl((s.to_dict() for s in samples), path)


def write_benchmark(items: Iterable[BenchmarkItem], path: str | Path) -> int:
    return write_jsonl((b.to_dict() for b in items), path)
