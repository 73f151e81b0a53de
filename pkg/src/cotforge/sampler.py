"""Difficulty-aware stratified sampling over response token lengths.

Retention is a per-record Bernoulli draw keyed by (seed, sample id), so the
retained set is identical under any iteration order or thread count, and
raising a band's retain fraction can only add samples (coupled uniforms).

Percentiles use the nearest-rank method (no interpolation) for exact
reproducibility on integer lengths. A sample sits "above the p-th
percentile" iff its length strictly exceeds the nearest-rank value, which
makes the default bands partition a uniform 1..100 grid into 25/25/30/20.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .corpus import EducationLevel, Sample
from .errors import MissingAnnotation, MissingLength

DEFAULT_BANDS: tuple[tuple[float, float, float], ...] = (
    (75.0, 100.0, 1.0),
    (50.0, 75.0, 0.5),
    (20.0, 50.0, 0.1),
    (0.0, 20.0, 0.0),
)


@dataclass(frozen=True)
class StratifiedPolicy:
    """Percentile bands with per-band retain fractions.

    Bands are (lower, upper] in percentile space after realizing thresholds;
    the bottom band is closed below and the top band open above. Bands must
    be disjoint, sorted, and cover (0, 100).
    """

    bands: tuple[tuple[float, float, float], ...] = DEFAULT_BANDS
    seed: int = 0

    def __post_init__(self) -> None:
        ordered = sorted(self.bands, key=lambda b: b[0])
        prev_upper = 0.0
        for lower, upper, frac in ordered:
            if not (0.0 <= lower < upper <= 100.0):
                raise ValueError(f"bad band ({lower}, {upper})")
            if not (0.0 <= frac <= 1.0):
                raise ValueError(f"retain fraction {frac} outside [0, 1]")
            if not math.isclose(lower, prev_upper):
                raise ValueError("bands must be contiguous from 0 to 100")
            prev_upper = upper
        if not math.isclose(prev_upper, 100.0):
            raise ValueError("bands must cover up to the 100th percentile")


@dataclass
class BandReport:
    lower_percentile: float
    upper_percentile: float
    retain_fraction: float
    population: int = 0
    retained: int = 0

    @property
    def empirical_fraction(self) -> float:
        return self.retained / self.population if self.population else 0.0


@dataclass
class SamplingReport:
    bands: list[BandReport] = field(default_factory=list)
    thresholds: dict[float, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "thresholds": {str(k): v for k, v in sorted(self.thresholds.items())},
            "bands": [
                {
                    "lower_percentile": b.lower_percentile,
                    "upper_percentile": b.upper_percentile,
                    "retain_fraction": b.retain_fraction,
                    "population": b.population,
                    "retained": b.retained,
                    "empirical_fraction": b.empirical_fraction,
                }
                for b in self.bands
            ],
        }


def nearest_rank(sorted_values: list[int], cut: float) -> int:
    """Value at ordinal rank ceil(cut/100 * N) of the sorted multiset."""
    n = len(sorted_values)
    rank = max(1, math.ceil(cut / 100.0 * n))
    return sorted_values[min(rank, n) - 1]


def length_percentiles(samples: list[Sample], cut_points: list[float]) -> list[int]:
    lengths = []
    for s in samples:
        if s.token_length is None:
            raise MissingLength(s.id)
        lengths.append(s.token_length)
    lengths.sort()
    return [nearest_rank(lengths, c) for c in cut_points]


def retention_draw(seed: int, record_id: str) -> float:
    """Uniform in [0, 1) keyed by (seed, id); stable across runs and threads."""
    h = hashlib.blake2b(
        record_id.encode("utf-8"),
        digest_size=8,
        key=(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
    ).digest()
    return int.from_bytes(h, "little") / 2.0**64


def _band_index(
    length: int, bands: tuple[tuple[float, float, float], ...], thresholds: dict[float, int]
) -> int:
    for i, (lower, upper, _frac) in enumerate(bands):
        above_lower = lower == 0.0 or length > thresholds[lower]
        at_most_upper = upper == 100.0 or length <= thresholds[upper]
        if above_lower and at_most_upper:
            return i
    raise AssertionError("contiguous bands must cover every length")


def stratified_sample(
    samples: list[Sample], policy: StratifiedPolicy
) -> tuple[list[Sample], SamplingReport]:
    """Bernoulli retention at each band's fraction; preserves input order."""
    report = SamplingReport(
        bands=[BandReport(lo, up, fr) for lo, up, fr in policy.bands]
    )
    if not samples:
        return [], report

    interior_cuts = sorted(
        {c for lo, up, _ in policy.bands for c in (lo, up) if 0.0 < c < 100.0}
    )
    cut_values = length_percentiles(samples, interior_cuts)
    report.thresholds = dict(zip(interior_cuts, cut_values))

    retained: list[Sample] = []
    for s in samples:
        idx = _band_index(s.token_length, policy.bands, report.thresholds)
        band = report.bands[idx]
        band.population += 1
        if retention_draw(policy.seed, s.id) < band.retain_fraction:
            band.retained += 1
            retained.append(s)
    return retained, report


def annotation_stratified_sample(
    samples: list[Sample],
    per_level_fractions: dict[EducationLevel, float],
    seed: int = 0,
) -> list[Sample]:
    """Bernoulli retention per education level; same keyed-RNG scheme."""
    retained: list[Sample] = []
    for s in samples:
        if s.annotations is None:
            raise MissingAnnotation(s.id)
        frac = per_level_fractions.get(s.annotations.education_level, 1.0)
        if retention_draw(seed, s.id) < frac:
            retained.append(s)
    return retained
