"""cotforge: data engine for long chain-of-thought reasoning corpora.

Curation (dedup, decontamination, stratified sampling), failure-driven
retrieval/synthesis distribution construction, verifiable-reward math, and
a finite-problem lab that checks the distribution-matching theory exactly.
"""

from .corpus import (
    Annotation,
    AnswerType,
    BenchmarkItem,
    Domain,
    EducationLevel,
    Sample,
    load_benchmark,
    load_corpus,
    normalize_question,
    write_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnswerType",
    "BenchmarkItem",
    "Domain",
    "EducationLevel",
    "Sample",
    "load_benchmark",
    "load_corpus",
    "normalize_question",
    "write_corpus",
    "__version__",
]
