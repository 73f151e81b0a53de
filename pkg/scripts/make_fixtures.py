#!/usr/bin/env python3
"""Generate synthetic corpora for pipeline runs and throughput checks.

Writes a curation corpus with planted exact duplicates, near duplicates,
and benchmark-contaminated records, plus the benchmark file, a failures
file, and a knowledge-documents file:

    python scripts/make_fixtures.py --out /tmp/fixtures --size 1000 \
        --exact-dups 100 --near-dups 50 --contaminated 10
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from cotforge.corpus import (
    Annotation,
    AnswerType,
    BenchmarkItem,
    Domain,
    EducationLevel,
    Sample,
    write_benchmark,
    write_corpus,
    write_jsonl,
)
from cotforge.textstats import count_tokens

WORDS = [f"word{i:04d}" for i in range(4000)]
DOMAINS = list(Domain)
LEVELS = list(EducationLevel)


def random_text(rng: np.random.Generator, n_words: int) -> str:
    return " ".join(WORDS[j] for j in rng.integers(0, len(WORDS), size=n_words))


def make_sample(rng: np.random.Generator, idx: int, question: str, response_words: int) -> Sample:
    response = random_text(rng, response_words) + f" final answer \\boxed{{{idx % 97}}}"
    return Sample(
        id=f"s{idx:07d}",
        question=question,
        source="fixture",
        response=response,
        token_length=count_tokens(response),
        annotations=Annotation(
            valid=True,
            domain=DOMAINS[idx % len(DOMAINS)],
            education_level=LEVELS[idx % len(LEVELS)],
            answer_type=AnswerType.NUMERIC,
            verified_answer=str(idx % 97),
        ),
    )


def build_curation_fixture(
    out: Path,
    size: int,
    exact_dups: int,
    near_dups: int,
    contaminated: int,
    invalid: int,
    bench_size: int,
    seed: int,
) -> None:
    rng = np.random.default_rng(seed)
    samples: list[Sample] = []
    idx = 0

    # each near-dup unit plants a (original, variant) pair
    base_count = size - exact_dups - 2 * near_dups - contaminated - invalid
    if base_count <= 0:
        raise ValueError("size too small for the requested planted records")
    for _ in range(base_count):
        q = random_text(rng, int(rng.integers(12, 40)))
        samples.append(make_sample(rng, idx, q, int(rng.integers(20, 400))))
        idx += 1

    # Exact duplicates: copies of existing questions (same normalized form).
    for k in range(exact_dups):
        victim = samples[int(rng.integers(0, base_count))]
        dup = make_sample(rng, idx, victim.question.upper() + " ?", int(rng.integers(20, 200)))
        samples.append(dup)
        idx += 1

    # Near duplicates: long question with a single token substituted.
    for k in range(near_dups):
        tokens = random_text(rng, 130).split()
        original = " ".join(tokens)
        tokens[int(rng.integers(5, 120))] = f"variant{k}"
        samples.append(make_sample(rng, idx, original, int(rng.integers(20, 200))))
        idx += 1
        samples.append(make_sample(rng, idx, " ".join(tokens), int(rng.integers(20, 200))))
        idx += 1

    # Benchmark plus planted contamination via verbatim 13-token windows.
    bench = []
    for b in range(bench_size):
        q = random_text(rng, int(rng.integers(20, 40)))
        bench.append(BenchmarkItem(id=f"b{b:04d}", question=q, gold_answer=str(b % 13)))
    for k in range(contaminated):
        source = bench[int(rng.integers(0, bench_size))]
        window = " ".join(source.question.split()[:13])
        q = random_text(rng, 6) + " " + window + " " + random_text(rng, 6)
        samples.append(make_sample(rng, idx, q, int(rng.integers(20, 200))))
        idx += 1

    for _ in range(invalid):
        q = random_text(rng, int(rng.integers(12, 40)))
        s = make_sample(rng, idx, q, 30)
        samples.append(
            Sample(
                id=s.id,
                question=s.question,
                source=s.source,
                response=s.response,
                token_length=s.token_length,
                annotations=Annotation(
                    valid=False,
                    domain=s.annotations.domain,
                    education_level=s.annotations.education_level,
                    answer_type=AnswerType.PROOF,
                ),
            )
        )
        idx += 1

    order = rng.permutation(len(samples))
    shuffled = [samples[i] for i in order]
    write_corpus(shuffled, out / "corpus.jsonl")
    write_benchmark(bench, out / "benchmark.jsonl")


def build_stage2_fixture(out: Path, n_failures: int, n_documents: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_failures):
        failures.append(
            {
                "item_id": f"f{i:03d}",
                "question": random_text(rng, 18),
                "gold_answer": str(i),
                "w": 1,
            }
        )
    write_jsonl(failures, out / "failures.jsonl")

    docs = []
    subjects = ["Math", "STEM", "MedicineBiology", "Code"]
    for i in range(n_documents):
        docs.append(
            {
                "id": f"d{i:04d}",
                "text": random_text(rng, int(rng.integers(40, 120))),
                "subject": subjects[i % len(subjects)],
                "quality_score": float(np.round(rng.uniform(0.5, 1.0), 3)),
                "usefulness_score": float(np.round(rng.uniform(0.5, 1.0), 3)),
            }
        )
    write_jsonl(docs, out / "documents.jsonl")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--size", type=int, default=1000)
    parser.add_argument("--exact-dups", type=int, default=100)
    parser.add_argument("--near-dups", type=int, default=50)
    parser.add_argument("--contaminated", type=int, default=10)
    parser.add_argument("--invalid", type=int, default=20)
    parser.add_argument("--bench-size", type=int, default=50)
    parser.add_argument("--failures", type=int, default=10)
    parser.add_argument("--documents", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    build_curation_fixture(
        args.out,
        size=args.size,
        exact_dups=args.exact_dups,
        near_dups=args.near_dups,
        contaminated=args.contaminated,
        invalid=args.invalid,
        bench_size=args.bench_size,
        seed=args.seed,
    )
    build_stage2_fixture(args.out, args.failures, args.documents, seed=args.seed + 1)
    print(f"fixtures written to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
