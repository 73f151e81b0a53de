"""Exact dedup (MD5), near-dedup (MinHash LSH), and benchmark decontamination.

Signatures use 240 hash functions arranged as 24 bands of 10 rows. The 240
functions are realized as one strong 64-bit base hash (blake2b) per shingle,
remixed against 240 fixed seeds (``minhash_seeds.json``, shipped in-repo).
Changing the seed table is a breaking change to every golden file.

Near-duplicate groups are the connected components of bucket co-membership
(union-find over shared band hashes), so a chain of pairwise near-duplicates
collapses to a single representative.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

import numpy as np

from .corpus import BenchmarkItem, Sample, normalize_question
from .textstats import word_ngrams

NUM_BANDS = 24
BAND_WIDTH = 10
NUM_HASHES = NUM_BANDS * BAND_WIDTH
DEFAULT_SHINGLE_N = 3
DECONTAM_NGRAM = 13

_U64 = np.uint64
_MIX_C1 = _U64(0x9E3779B97F4A7C15)
_MIX_C2 = _U64(0xBF58476D1CE4E5B9)
_MIX_C3 = _U64(0x94D049BB133111EB)


def _load_seed_table() -> np.ndarray:
    text = resources.files(__package__).joinpath("minhash_seeds.json").read_text()
    obj = json.loads(text)
    seeds = np.array([int(s, 16) for s in obj["seeds"]], dtype=_U64)
    if seeds.shape != (NUM_HASHES,):
        raise ValueError(f"seed table must hold {NUM_HASHES} values")
    return seeds


SEEDS: np.ndarray = _load_seed_table()

# Per-band fold seeds keep band hashes from aliasing across bands.
_BAND_SEEDS = (np.arange(NUM_BANDS, dtype=_U64) + _U64(1)) * _MIX_C1


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer over uint64 arrays. Mutates writable array
    inputs in place (the hot path hands it freshly created arrays)."""
    x = x + _MIX_C1
    x ^= x >> _U64(30)
    x *= _MIX_C2
    x ^= x >> _U64(27)
    x *= _MIX_C3
    x ^= x >> _U64(31)
    return x


def _base_hash(shingle: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(shingle.encode("utf-8"), digest_size=8).digest(), "little"
    )


def _base_hash_array(shingles: Iterable[str]) -> np.ndarray:
    buf = b"".join(
        hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest() for s in shingles
    )
    return np.frombuffer(buf, dtype="<u8")


def shingle_set(question: str, shingle_n: int = DEFAULT_SHINGLE_N) -> set[str]:
    """Word shingles over the normalized question.

    Questions shorter than ``shingle_n`` words shingle to their full token
    string; the empty question maps to a single empty-marker shingle.
    """
    tokens = normalize_question(question).split()
    if not tokens:
        return {""}
    n = min(shingle_n, len(tokens))
    return {" ".join(g) for g in word_ngrams(tokens, n)}


@dataclass(frozen=True)
class Fingerprint:
    digest: str  # 32 lowercase hex chars


def md5_fingerprint(question: str) -> Fingerprint:
    """MD5 over the UTF-8 bytes of the normalized question."""
    return Fingerprint(
        hashlib.md5(normalize_question(question).encode("utf-8")).hexdigest()
    )


@dataclass(frozen=True)
class MinHashSignature:
    """240 hash minima, logically 24 bands x 10 rows."""

    values: tuple[int, ...]
    shingle_n: int

    def __post_init__(self) -> None:
        if len(self.values) != NUM_HASHES:
            raise ValueError(f"signature must hold {NUM_HASHES} values")

    def band(self, b: int) -> tuple[int, ...]:
        return self.values[b * BAND_WIDTH : (b + 1) * BAND_WIDTH]


# ---------------------------------------------------------------------------
# Vectorized signature computation
# ---------------------------------------------------------------------------

def _signature_matrix(base_hashes: list[np.ndarray]) -> np.ndarray:
    """Row-wise MinHash signatures for a batch of shingle base-hash vectors.

    Processes the concatenated shingle stream in cache-sized chunks:
    minimum over h_i(s) = mix(base(s) ^ seed_i) per record.
    """
    n_records = len(base_hashes)
    out = np.empty((n_records, NUM_HASHES), dtype=_U64)
    chunk_budget = 4_000  # shingles per chunk: ~8 MB intermediates stay in cache
    start = 0
    while start < n_records:
        end = start
        total = 0
        while end < n_records and (total == 0 or total + len(base_hashes[end]) <= chunk_budget):
            total += len(base_hashes[end])
            end += 1
        concat = np.concatenate(base_hashes[start:end])
        mixed = _mix64(concat[:, None] ^ SEEDS[None, :])
        lengths = np.array([len(b) for b in base_hashes[start:end]])
        starts = np.zeros(len(lengths), dtype=np.intp)
        np.cumsum(lengths[:-1], out=starts[1:])
        out[start:end] = np.minimum.reduceat(mixed, starts, axis=0)
        start = end
    return out


def _band_hash_matrix(sig_matrix: np.ndarray) -> np.ndarray:
    """(N, 24) band hashes: per-band seeded fold of the 10 row minima."""
    rows = sig_matrix.reshape(-1, NUM_BANDS, BAND_WIDTH)
    h = np.broadcast_to(_mix64(_BAND_SEEDS), rows.shape[:2]).copy()
    for j in range(BAND_WIDTH):
        h = _mix64(h ^ rows[:, :, j])
    return h


def signature_of_shingles(
    shingles: set[str], shingle_n: int = DEFAULT_SHINGLE_N
) -> MinHashSignature:
    bases = np.array(sorted(_base_hash(s) for s in shingles), dtype=_U64)
    sig = _signature_matrix([bases])[0]
    return MinHashSignature(values=tuple(int(v) for v in sig), shingle_n=shingle_n)


def minhash_signature(
    question: str, shingle_n: int = DEFAULT_SHINGLE_N
) -> MinHashSignature:
    return signature_of_shingles(shingle_set(question, shingle_n), shingle_n)


def band_hashes(signature: MinHashSignature) -> tuple[int, ...]:
    sig = np.array(signature.values, dtype=_U64).reshape(1, -1)
    return tuple(int(v) for v in _band_hash_matrix(sig)[0])


def _corpus_band_hashes(questions: list[str], shingle_n: int) -> np.ndarray:
    bases = [_base_hash_array(shingle_set(q, shingle_n)) for q in questions]
    return _band_hash_matrix(_signature_matrix(bases))


# ---------------------------------------------------------------------------
# Union-find
# ---------------------------------------------------------------------------

class UnionFind:
    """Disjoint sets over dense integer indices, path-halving + union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


# ---------------------------------------------------------------------------
# Deduplication
# ---------------------------------------------------------------------------

@dataclass
class DedupReport:
    exact_removed: int = 0
    near_removed: int = 0
    buckets: dict[int, list[str]] = field(default_factory=dict)
    retained_ids: set[str] = field(default_factory=set)


def _retention_key(sample: Sample) -> tuple[int, str]:
    """Lower sorts first: valid+verifiable, then valid, then anything."""
    ann = sample.annotations
    if ann.valid and ann.verifiable:
        priority = 0
    elif ann.valid:
        priority = 1
    else:
        priority = 2
    return (priority, sample.id)


def exact_dedup(samples: list[Sample]) -> tuple[list[Sample], list[Sample]]:
    """One representative per MD5 fingerprint, chosen by retention priority."""
    groups: dict[str, list[Sample]] = {}
    for s in samples:
        groups.setdefault(md5_fingerprint(s.question).digest, []).append(s)
    keep_ids = {min(grp, key=_retention_key).id for grp in groups.values()}
    retained = [s for s in samples if s.id in keep_ids]
    removed = [s for s in samples if s.id not in keep_ids]
    return retained, removed


def near_dedup(
    samples: list[Sample], shingle_n: int = DEFAULT_SHINGLE_N
) -> tuple[list[Sample], DedupReport]:
    """Collapse MinHash-bucket components to one representative each."""
    report = DedupReport()
    if not samples:
        return [], report

    n = len(samples)
    bands = _corpus_band_hashes([s.question for s in samples], shingle_n)

    # Only hashes shared by >= 2 records matter; extract them vectorized so
    # the common case (no collisions) costs no Python-level bucket work.
    flat = bands.ravel()
    _uniq, inverse, counts = np.unique(flat, return_inverse=True, return_counts=True)
    colliding = counts[inverse] > 1
    rec_of_flat = np.repeat(np.arange(n), NUM_BANDS)
    rec_idx = rec_of_flat[colliding]
    hash_ids = inverse[colliding]
    order = np.argsort(hash_ids, kind="stable")
    rec_idx, hash_ids = rec_idx[order], hash_ids[order]
    flat_hashes = flat[colliding][order]

    uf = UnionFind(n)
    bucket_members: dict[int, list[int]] = {}
    run_start = 0
    for pos in range(1, len(hash_ids) + 1):
        if pos == len(hash_ids) or hash_ids[pos] != hash_ids[run_start]:
            members = [int(r) for r in rec_idx[run_start:pos]]
            bucket_members[int(flat_hashes[run_start])] = members
            for other in members[1:]:
                uf.union(members[0], other)
            run_start = pos

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)

    keep: set[int] = set()
    for members in groups.values():
        keep.add(min(members, key=lambda i: _retention_key(samples[i])))

    retained = [samples[i] for i in range(n) if i in keep]
    report.near_removed = n - len(retained)
    report.retained_ids = {s.id for s in retained}
    report.buckets = {
        h: sorted(samples[i].id for i in members)
        for h, members in sorted(bucket_members.items())
    }
    return retained, report


def _ngram_set(text: str, n: int) -> set[tuple[str, ...]]:
    return set(word_ngrams(normalize_question(text).split(), n))


def decontaminate(
    samples: list[Sample],
    bench: list[BenchmarkItem],
    shingle_n: int = DEFAULT_SHINGLE_N,
    ngram_n: int = DECONTAM_NGRAM,
    check_responses: bool = True,
) -> tuple[list[Sample], list[Sample]]:
    """Remove samples colliding with any benchmark item.

    A sample is removed iff (a) any MinHash band hash of its question matches
    a band hash of any benchmark question, or (b) its question — or response,
    unless ``check_responses`` is off — shares an exact word-level ``ngram_n``-
    gram with any benchmark question.
    """
    if not bench or not samples:
        return list(samples), []

    bench_bands: set[int] = set()
    for row in _corpus_band_hashes([b.question for b in bench], shingle_n):
        bench_bands.update(int(h) for h in row)
    bench_grams: set[tuple[str, ...]] = set()
    for b in bench:
        bench_grams.update(_ngram_set(b.question, ngram_n))

    sample_bands = _corpus_band_hashes([s.question for s in samples], shingle_n)

    clean: list[Sample] = []
    removed: list[Sample] = []
    for i, s in enumerate(samples):
        hit = any(int(h) in bench_bands for h in sample_bands[i])
        if not hit:
            grams = _ngram_set(s.question, ngram_n)
            if check_responses and s.response:
                grams |= _ngram_set(s.response, ngram_n)
            hit = not bench_grams.isdisjoint(grams)
        (removed if hit else clean).append(s)
    return clean, removed
