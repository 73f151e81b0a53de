"""Failure-driven retrieval and synthesis: builds the failure-biased query
distribution, retrieves knowledge documents through a temperature softmax
kernel, synthesizes candidate QA pairs with two-pass answer verification,
and assembles the synthetic training distribution and its mixture with the
original corpus.

Generators are pluggable: an in-process deterministic mock ships for tests
and fixtures, and a line-oriented subprocess protocol is the integration
point for real models (one JSON request per line, one JSON response per
line; no API clients in-core).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .corpus import (
    Annotation,
    AnswerType,
    Domain,
    EducationLevel,
    Sample,
)
from .errors import (
    DimMismatch,
    EmptyCandidates,
    EmptyStore,
    GeneratorError,
    MalformedRecord,
    NoFailures,
    PreconditionError,
)
from .textstats import count_tokens
from .verify import FailureRecord, answers_match, canonical_answer_key, parse_numeric

EMBEDDING_MAGIC = b"LGEMB1\n"


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------

@dataclass
class EmbeddingStore:
    """Unit-norm vectors keyed by id, kept in insertion order."""

    dim: int
    ids: list[str]
    matrix: np.ndarray  # (N, dim), rows unit-norm

    @staticmethod
    def from_entries(entries: Iterable[tuple[str, np.ndarray]], dim: int) -> "EmbeddingStore":
        ids: list[str] = []
        rows: list[np.ndarray] = []
        for key, vec in entries:
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise DimMismatch(dim, int(vec.shape[0]) if vec.ndim == 1 else -1)
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                raise PreconditionError(f"zero embedding for id {key!r}")
            ids.append(key)
            # leave already-unit vectors untouched so file round-trips are
            # bit-exact
            rows.append(vec if abs(norm - 1.0) <= 1e-6 else vec / norm)
        matrix = np.vstack(rows) if rows else np.zeros((0, dim))
        return EmbeddingStore(dim=dim, ids=ids, matrix=matrix)

    def __len__(self) -> int:
        return len(self.ids)

    def vector(self, key: str) -> np.ndarray:
        return self.matrix[self.ids.index(key)]


def write_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        header = {"dim": store.dim, "count": len(store.ids)}
        fh.write((json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8"))
        for key, row in zip(store.ids, store.matrix):
            line = json.dumps(
                {"id": key, "vec": [float(v) for v in row]}, separators=(",", ":")
            )
            fh.write((line + "\n").encode("utf-8"))


def load_embeddings(path: str | Path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        magic = fh.read(len(EMBEDDING_MAGIC))
        if magic != EMBEDDING_MAGIC:
            raise MalformedRecord(1, f"bad embedding magic {magic!r}")
        header_line = fh.readline().decode("utf-8")
        try:
            header = json.loads(header_line)
            dim, count = int(header["dim"]), int(header["count"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(2, f"bad embedding header: {exc}") from exc
        entries: list[tuple[str, np.ndarray]] = []
        for line_no in range(count):
            raw = fh.readline().decode("utf-8")
            if not raw:
                raise MalformedRecord(3 + line_no, "truncated embedding file")
            obj = json.loads(raw)
            entries.append((str(obj["id"]), np.array(obj["vec"], dtype=np.float64)))
    return EmbeddingStore.from_entries(entries, dim)


class HashingEmbedder:
    """Deterministic text embedder: seeded hash projections per token.

    Stands in for a real embedding model in tests and fixtures. Identical
    texts map to identical unit vectors; overlapping token sets correlate.
    """

    def __init__(self, dim: int = 32, seed: int = 0):
        from .dedup import _mix64

        self.dim = dim
        self._seed_bytes = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
        base = np.arange(dim, dtype=np.uint64) + np.uint64(
            (seed * 2654435761 + 1) & 0xFFFFFFFFFFFFFFFF
        )
        self._dim_seeds = _mix64(base)

    def embed(self, text: str) -> np.ndarray:
        from .corpus import normalize_question
        from .dedup import _mix64

        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = normalize_question(text).split() or [""]
        for tok in tokens:
            base = int.from_bytes(
                hashlib.blake2b(
                    tok.encode("utf-8"), digest_size=8, key=self._seed_bytes
                ).digest(),
                "little",
            )
            words = _mix64(np.uint64(base) ^ self._dim_seeds).astype(np.float64)
            vec += words / 2.0**63 - 1.0
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else np.eye(self.dim)[0]


# ---------------------------------------------------------------------------
# Failure-biased query distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FailureQueryDist:
    """Evaluation distribution restricted and renormalized onto failures."""

    support: tuple[str, ...]
    probabilities: tuple[float, ...]


def failure_query_dist(
    q_weights: dict[str, float], failures: dict[str, int]
) -> FailureQueryDist:
    if not q_weights or sum(q_weights.values()) <= 0:
        raise PreconditionError("query weights must have positive total mass")
    support = [k for k in q_weights if failures.get(k, 0) == 1]
    total = sum(q_weights[k] for k in support)
    if total <= 0:
        raise NoFailures()
    return FailureQueryDist(
        support=tuple(support),
        probabilities=tuple(q_weights[k] / total for k in support),
    )


# ---------------------------------------------------------------------------
# Retrieval kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelConfig:
    tau: float = 0.05
    top_k: int = 30

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


def retrieval_kernel(
    query_vec: np.ndarray, store: EmbeddingStore, cfg: KernelConfig
) -> list[tuple[str, float]]:
    """Softmax over cosine similarities restricted to the top-k documents.

    Zero mass outside the top-k set; ranked by (similarity desc, id asc) so
    ties resolve identically on every run.
    """
    if len(store) == 0:
        raise EmptyStore()
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (store.dim,):
        raise DimMismatch(store.dim, int(query_vec.shape[0]) if query_vec.ndim == 1 else -1)

    sims = store.matrix @ query_vec
    order = sorted(range(len(store)), key=lambda i: (-sims[i], store.ids[i]))
    top = order[: min(cfg.top_k, len(store))]
    top_sims = sims[top]
    logits = (top_sims - top_sims.max()) / cfg.tau
    weights = np.exp(logits)
    probs = weights / weights.sum()
    return [(store.ids[i], float(p)) for i, p in zip(top, probs)]


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Document:
    id: str
    text: str
    subject: str
    quality_score: float
    usefulness_score: float


def load_documents(
    path: str | Path,
    min_quality: float = 0.0,
    min_usefulness: float = 0.0,
) -> list[Document]:
    """Documents corpus with precomputed quality/usefulness scores.

    The two score fields stand in for upstream filter models; documents
    below either threshold never enter the knowledge base.
    """
    from .corpus import iter_jsonl

    docs: list[Document] = []
    for line_no, obj in iter_jsonl(path):
        try:
            doc = Document(
                id=str(obj["id"]),
                text=obj["text"],
                subject=obj.get("subject", ""),
                quality_score=float(obj.get("quality_score", 1.0)),
                usefulness_score=float(obj.get("usefulness_score", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
        if doc.quality_score >= min_quality and doc.usefulness_score >= min_usefulness:
            docs.append(doc)
    return docs


# ---------------------------------------------------------------------------
# Two-pass synthesis
# ---------------------------------------------------------------------------

class TwoPassGenerator(Protocol):
    """Pass 1 drafts (question, answer) from a document; pass 2 answers the
    question cold. Implementations may be stateful but must be deterministic
    for a fixed seed under serial invocation."""

    def pass1(self, document_text: str) -> tuple[str, str, int]: ...

    def pass2(self, question: str) -> tuple[str, int]: ...


@dataclass(frozen=True)
class SynthesisCandidate:
    document_id: str
    question: str
    answer_pass1: str
    answer_pass2: str
    cot_length_pass2: int
    accepted: bool
    hard_example: bool
    extra_answers: tuple[str, ...] | None = None
    consensus_answer: str | None = None

    @property
    def final_answer(self) -> str | None:
        if not self.accepted:
            return None
        return self.consensus_answer if self.hard_example else self.answer_pass1


CANDIDATES_PER_DOCUMENT = 2
DEFAULT_VOTE_COUNT = 5


def _strict_majority(answers: list[str]) -> str | None:
    counts: dict[str, int] = {}
    rep: dict[str, str] = {}
    for a in answers:
        key = canonical_answer_key(a)
        counts[key] = counts.get(key, 0) + 1
        rep.setdefault(key, a)
    best_key = max(counts, key=lambda k: counts[k])
    if counts[best_key] * 2 > len(answers):
        return rep[best_key]
    return None


def synthesize(
    document: Document,
    generator: TwoPassGenerator,
    vote_count: int = DEFAULT_VOTE_COUNT,
) -> list[SynthesisCandidate]:
    """Exactly two candidates per document.

    A candidate is accepted when both passes agree on the answer; on
    disagreement the consensus of ``vote_count`` extra answers decides, and
    survivors are marked hard examples. No strict majority means rejection.
    """
    candidates: list[SynthesisCandidate] = []
    for _ in range(CANDIDATES_PER_DOCUMENT):
        try:
            question, answer1, _cot1 = generator.pass1(document.text)
            answer2, cot2 = generator.pass2(question)
        except GeneratorError:
            raise
        except Exception as exc:
            raise GeneratorError(document.id, str(exc)) from exc

        if answers_match(answer2, answer1):
            candidates.append(
                SynthesisCandidate(
                    document_id=document.id,
                    question=question,
                    answer_pass1=answer1,
                    answer_pass2=answer2,
                    cot_length_pass2=cot2,
                    accepted=True,
                    hard_example=False,
                )
            )
            continue

        try:
            extra = [generator.pass2(question)[0] for _ in range(vote_count)]
        except GeneratorError:
            raise
        except Exception as exc:
            raise GeneratorError(document.id, str(exc)) from exc
        consensus = _strict_majority(extra)
        candidates.append(
            SynthesisCandidate(
                document_id=document.id,
                question=question,
                answer_pass1=answer1,
                answer_pass2=answer2,
                cot_length_pass2=cot2,
                accepted=consensus is not None,
                hard_example=consensus is not None,
                extra_answers=tuple(extra),
                consensus_answer=consensus,
            )
        )
    return candidates


# ---------------------------------------------------------------------------
# Synthetic distribution and mixture
# ---------------------------------------------------------------------------

CandidateKey = tuple[str, str]  # (question, answer)


def psyn_distribution(
    qdist: FailureQueryDist,
    kernels: dict[str, list[tuple[str, float]]],
    acceptance: dict[str, dict[CandidateKey, float]],
) -> dict[CandidateKey, float]:
    """Chain the failure, retrieval, and acceptance distributions.

    Documents with no accepted candidates contribute nothing; the result is
    renormalized over the surviving candidate set.
    """
    mass: dict[CandidateKey, float] = {}
    for item_id, q_prob in zip(qdist.support, qdist.probabilities):
        for doc_id, k_prob in kernels.get(item_id, []):
            for cand, g_prob in acceptance.get(doc_id, {}).items():
                mass[cand] = mass.get(cand, 0.0) + q_prob * k_prob * g_prob
    total = sum(mass.values())
    if total <= 0:
        raise EmptyCandidates()
    return {cand: p / total for cand, p in mass.items()}


@dataclass(frozen=True)
class MixtureConfig:
    lam: float = 0.5  # weight of the original distribution

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("mixture weight must lie in [0, 1]")


def mixture_p1(p0: dict, psyn: dict, cfg: MixtureConfig) -> dict:
    """Pointwise convex combination over the union support."""
    out: dict = {}
    for key in set(p0) | set(psyn):
        out[key] = cfg.lam * p0.get(key, 0.0) + (1.0 - cfg.lam) * psyn.get(key, 0.0)
    return out


# ---------------------------------------------------------------------------
# Mock and subprocess generators
# ---------------------------------------------------------------------------

_QUESTION_TAG = re.compile(r"\[k:([0-9a-f]{16})\]")


def _unit_draw(seed: int, *parts: str) -> float:
    payload = "\x1f".join(parts).encode("utf-8")
    digest = hashlib.blake2b(
        payload,
        digest_size=8,
        key=(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
    ).digest()
    return int.from_bytes(digest, "little") / 2.0**64


class MockGenerator:
    """Deterministic stand-in for an LLM synthesis backend.

    Pass 1 derives a question and numeric answer from the document text; a
    tag in the question lets pass 2 recover the true answer without state.
    ``match_prob`` controls how often the cold pass agrees, and
    ``vote_match_prob`` how often each extra vote lands on the true answer
    (dissenting votes are unique strings, so only the true answer can reach
    a majority).
    """

    def __init__(self, seed: int = 0, match_prob: float = 1.0, vote_match_prob: float = 1.0):
        self.seed = seed
        self.match_prob = match_prob
        self.vote_match_prob = vote_match_prob
        self._doc_counter: dict[str, int] = {}
        self._question_counter: dict[str, int] = {}

    @staticmethod
    def _answer_for_tag(tag: str) -> str:
        return str(int(tag, 16) % 997)

    def pass1(self, document_text: str) -> tuple[str, str, int]:
        k = self._doc_counter.get(document_text, 0)
        self._doc_counter[document_text] = k + 1
        tag = hashlib.blake2b(
            f"{k}:{document_text}".encode("utf-8"),
            digest_size=8,
            key=(self.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
        ).hexdigest()
        snippet = " ".join(document_text.split()[:8])
        question = f"Given the passage '{snippet}', compute the key quantity [k:{tag}]."
        answer = self._answer_for_tag(tag)
        cot_length = 40 + int(_unit_draw(self.seed, "cot1", tag) * 400)
        return question, answer, cot_length

    def pass2(self, question: str) -> tuple[str, int]:
        m = _QUESTION_TAG.search(question)
        if m is None:
            raise ValueError("question lacks a recoverable tag")
        tag = m.group(1)
        call = self._question_counter.get(question, 0)
        self._question_counter[question] = call + 1
        truth = self._answer_for_tag(tag)
        cot_length = 60 + int(_unit_draw(self.seed, "cot2", tag, str(call)) * 600)
        if call == 0:
            agrees = _unit_draw(self.seed, "match", tag) < self.match_prob
        else:
            agrees = _unit_draw(self.seed, "vote", tag, str(call)) < self.vote_match_prob
        if agrees:
            return truth, cot_length
        return f"wrong-{tag}-{call}", cot_length


class SubprocessGenerator:
    """Drives an external generator over the line-oriented JSON protocol.

    Requests: {"mode":"pass1","document":...} or {"mode":"pass2","question":...}
    Responses: {"question"?,"answer","cot_length"}; one line each way.
    Serial by design — callers must not invoke it concurrently.
    """

    def __init__(self, command: list[str]):
        self.command = command
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def _roundtrip(self, request: dict) -> dict:
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(json.dumps(request, separators=(",", ":")) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError("generator subprocess closed its output")
        return json.loads(line)

    def pass1(self, document_text: str) -> tuple[str, str, int]:
        resp = self._roundtrip({"mode": "pass1", "document": document_text})
        return str(resp["question"]), str(resp["answer"]), int(resp["cot_length"])

    def pass2(self, question: str) -> tuple[str, int]:
        resp = self._roundtrip({"mode": "pass2", "question": question})
        return str(resp["answer"]), int(resp["cot_length"])

    def close(self) -> None:
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "SubprocessGenerator":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def serve_generator_stdio(generator: TwoPassGenerator, stdin, stdout) -> None:
    """Answer protocol requests on a stream pair until EOF (server side)."""
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        if req.get("mode") == "pass1":
            question, answer, cot = generator.pass1(req["document"])
            resp = {"question": question, "answer": answer, "cot_length": cot}
        elif req.get("mode") == "pass2":
            answer, cot = generator.pass2(req["question"])
            resp = {"answer": answer, "cot_length": cot}
        else:
            resp = {"error": f"unknown mode {req.get('mode')!r}"}
        stdout.write(json.dumps(resp, separators=(",", ":")) + "\n")
        stdout.flush()


# ---------------------------------------------------------------------------
# End-to-end stage-2 corpus construction
# ---------------------------------------------------------------------------

@dataclass
class Stage2Config:
    kernel: KernelConfig = field(default_factory=KernelConfig)
    mixture: MixtureConfig = field(default_factory=MixtureConfig)
    vote_count: int = DEFAULT_VOTE_COUNT
    min_quality: float = 0.0
    min_usefulness: float = 0.0
    select_high_difficulty_only: bool = False
    synth_source: str = "failure-synth"
    synth_education_level: EducationLevel = EducationLevel.GRADUATE


@dataclass
class ProvenanceRow:
    sample_id: str
    failure_id: str
    document_id: str
    candidate_index: int
    hard_example: bool
    high_difficulty: bool
    cot_length_pass2: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Stage2Report:
    failures_total: int = 0
    failures_used: int = 0
    documents_available: int = 0
    kernel_truncated_to: int | None = None
    documents_synthesized: int = 0
    candidates_total: int = 0
    candidates_accepted: int = 0
    candidates_hard: int = 0
    candidates_rejected: int = 0
    samples_emitted: int = 0
    high_difficulty_cutoff: int | None = None
    psyn_support: int = 0
    psyn_entropy: float = 0.0
    generator_errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _subject_to_domain(subject: str) -> Domain:
    wanted = subject.strip().casefold()
    for dom in Domain:
        if dom.value.casefold() == wanted:
            return dom
    return Domain.STEM


def build_stage2_corpus(
    failures: list[FailureRecord],
    doc_store: EmbeddingStore,
    documents: list[Document],
    generator: TwoPassGenerator,
    cfg: Stage2Config,
    query_embedder=None,
    query_store: EmbeddingStore | None = None,
    strict: bool = True,
) -> tuple[list[Sample], list[ProvenanceRow], Stage2Report, dict[CandidateKey, float]]:
    """Retrieve, synthesize, filter, and materialize the stage-2 corpus.

    Fully deterministic for a fixed generator seed: failures are processed
    in sorted id order and synthesis runs serially per unique document.
    With ``strict`` off, a generator failure skips that document and is
    recorded in the report instead of aborting the run.
    """
    report = Stage2Report(
        failures_total=len(failures), documents_available=len(documents)
    )
    failed = sorted((f for f in failures if f.w == 1), key=lambda f: f.item_id)
    if not failed:
        raise NoFailures()
    report.failures_used = len(failed)

    doc_by_id = {d.id: d for d in documents}
    covered = [i for i, key in enumerate(doc_store.ids) if key in doc_by_id]
    if len(covered) < len(doc_store):
        doc_store = EmbeddingStore(
            dim=doc_store.dim,
            ids=[doc_store.ids[i] for i in covered],
            matrix=doc_store.matrix[covered],
        )
    if len(doc_store) == 0:
        raise PreconditionError("no document has an embedding in the store")

    if cfg.kernel.top_k > len(doc_store):
        report.kernel_truncated_to = len(doc_store)

    # Uniform evaluation weights: every evaluated item counts once.
    qdist = failure_query_dist(
        {f.item_id: 1.0 for f in failures}, {f.item_id: f.w for f in failures}
    )

    kernels: dict[str, list[tuple[str, float]]] = {}
    for f in failed:
        if query_store is not None:
            vec = query_store.vector(f.item_id)
        elif query_embedder is not None:
            vec = query_embedder.embed(f.question)
        else:
            raise PreconditionError("need a query embedder or a query embedding store")
        kernels[f.item_id] = retrieval_kernel(vec, doc_store, cfg.kernel)

    retrieved_doc_ids = sorted({d for ks in kernels.values() for d, _ in ks})
    candidates_by_doc: dict[str, list[SynthesisCandidate]] = {}
    for doc_id in retrieved_doc_ids:
        try:
            cands = synthesize(doc_by_id[doc_id], generator, cfg.vote_count)
        except GeneratorError as exc:
            if strict:
                raise
            report.generator_errors.append(str(exc))
            continue
        candidates_by_doc[doc_id] = cands
        report.documents_synthesized += 1
        report.candidates_total += len(cands)
        for c in cands:
            if c.accepted:
                report.candidates_accepted += 1
                if c.hard_example:
                    report.candidates_hard += 1
            else:
                report.candidates_rejected += 1

    accepted_lengths = sorted(
        c.cot_length_pass2
        for cands in candidates_by_doc.values()
        for c in cands
        if c.accepted
    )
    cutoff: int | None = None
    if accepted_lengths:
        cutoff = accepted_lengths[len(accepted_lengths) // 2]
        report.high_difficulty_cutoff = cutoff

    acceptance: dict[str, dict[CandidateKey, float]] = {}
    for doc_id, cands in candidates_by_doc.items():
        keep = [c for c in cands if c.accepted]
        if keep:
            acceptance[doc_id] = {
                (c.question, c.final_answer): 1.0 / len(keep) for c in keep
            }

    samples: list[Sample] = []
    provenance: list[ProvenanceRow] = []
    for f in failed:
        for doc_id in sorted(d for d, _prob in kernels[f.item_id]):
            for idx, cand in enumerate(candidates_by_doc.get(doc_id, [])):
                if not cand.accepted:
                    continue
                high_difficulty = cutoff is not None and cand.cot_length_pass2 > cutoff
                if cfg.select_high_difficulty_only and not high_difficulty:
                    continue
                answer = cand.final_answer
                response = f"\\boxed{{{answer}}}"
                answer_type = (
                    AnswerType.NUMERIC
                    if parse_numeric(answer) is not None
                    else AnswerType.STRING
                )
                sample = Sample(
                    id=f"syn-{f.item_id}-{doc_id}-{idx}",
                    question=cand.question,
                    source=cfg.synth_source,
                    response=response,
                    token_length=count_tokens(response),
                    annotations=Annotation(
                        valid=True,
                        domain=_subject_to_domain(doc_by_id[doc_id].subject),
                        education_level=cfg.synth_education_level,
                        answer_type=answer_type,
                        verified_answer=answer,
                    ),
                )
                samples.append(sample)
                provenance.append(
                    ProvenanceRow(
                        sample_id=sample.id,
                        failure_id=f.item_id,
                        document_id=doc_id,
                        candidate_index=idx,
                        hard_example=cand.hard_example,
                        high_difficulty=high_difficulty,
                        cot_length_pass2=cand.cot_length_pass2,
                    )
                )
    report.samples_emitted = len(samples)

    psyn = psyn_distribution(qdist, kernels, acceptance) if acceptance else {}
    if not acceptance:
        report.psyn_support = 0
    else:
        report.psyn_support = len(psyn)
        report.psyn_entropy = -sum(p * math.log(p) for p in psyn.values() if p > 0)
    return samples, provenance, report, psyn
