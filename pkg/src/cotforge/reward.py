"""Verifiable-reward mathematics for group-relative policy optimization.

Covers binary correctness, the length/repetition-aware shaping term, group
(or batch) advantage renormalization, the clip-higher token objective, and
the dynamic filters that drop uninformative rollout groups.

The clipped term is min(r * A, clamp(r, 1 - eps_low, 1 + eps_high) * A)
with asymmetric bounds, and the whole group is normalized by its total
token count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import AnswerType, BenchmarkItem
from .errors import NonFiniteRatio
from .textstats import repetition_rate
from .verify import extract_boxed, failure_indicator


@dataclass(frozen=True)
class RewardConfig:
    t_min: int = 1024
    t_max: int = 30720
    rep_n: int = 10
    rho_min: float = 0.05
    clip_low: float = 0.2
    clip_high: float = 0.28
    diff_low: float = 0.1
    diff_high: float = 0.95
    max_len: int = 32768
    len_weight: float = 0.1
    fmt_weight: float = 0.05

    def __post_init__(self) -> None:
        if not self.t_min < self.t_max:
            raise ValueError("t_min must be < t_max")
        if not self.diff_low < self.diff_high:
            raise ValueError("diff_low must be < diff_high")
        if self.clip_low <= 0 or self.clip_high <= 0:
            raise ValueError("clip ranges must be positive")


@dataclass
class RolloutResponse:
    text: str
    old_logprobs: list[float]
    new_logprobs: list[float]
    truncated: bool = False

    def __post_init__(self) -> None:
        if len(self.old_logprobs) != len(self.new_logprobs):
            raise ValueError("old/new logprob sequences must have equal length")

    @property
    def token_length(self) -> int:
        return len(self.new_logprobs)


@dataclass
class RolloutGroup:
    prompt_id: str
    gold: str
    responses: list[RolloutResponse]
    answer_type: AnswerType | None = None


# ---------------------------------------------------------------------------
# Reward components
# ---------------------------------------------------------------------------

def correctness_reward(
    response: str, gold: str, answer_type: AnswerType | None = None
) -> int:
    """1 iff the boxed final answer verifies against gold."""
    item = BenchmarkItem(id="_", question="_", gold_answer=gold)
    return 1 - failure_indicator(item, response, answer_type).w


def length_score(t: int, a: int, cfg: RewardConfig) -> float:
    """Piecewise normalized length score.

    Correct answers (or maximal length) score 1 so concise-but-correct
    reasoning is never discouraged; incorrect short answers score 0; in
    between the score ramps linearly.
    """
    if a == 1 or t >= cfg.t_max:
        return 1.0
    if t <= cfg.t_min:
        return 0.0
    return (t - cfg.t_min) / (cfg.t_max - cfg.t_min)


def repetition_penalty(text: str, cfg: RewardConfig) -> float:
    """rho in (0, 1]: linear in the n-gram repetition rate, floored."""
    rho = 1.0 - repetition_rate(text, cfg.rep_n)
    return min(1.0, max(cfg.rho_min, rho))


def length_reward(text: str, t: int, a: int, cfg: RewardConfig) -> float:
    return length_score(t, a, cfg) * repetition_penalty(text, cfg)


def total_reward(
    response: str,
    gold: str,
    answer_type: AnswerType | None = None,
    cfg: RewardConfig = RewardConfig(),
    token_length: int | None = None,
) -> float:
    """Correctness plus weighted length/repetition and format terms."""
    a = correctness_reward(response, gold, answer_type)
    t = token_length if token_length is not None else len(response.split())
    r_len = length_reward(response, t, a, cfg)
    fmt = 1.0 if extract_boxed(response) is not None else 0.0
    return a + cfg.len_weight * r_len + cfg.fmt_weight * fmt


# ---------------------------------------------------------------------------
# Advantages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdvantageVector:
    raw: tuple[float, ...]
    normalized: tuple[float, ...]
    degenerate: bool


def normalize_advantages(raw: list[float], std_floor: float = 1e-8) -> AdvantageVector:
    """Center and scale by the population standard deviation.

    Zero-variance groups are flagged degenerate (normalized to zeros) and
    left for the dynamic filter to drop, not raised as errors.
    """
    if len(raw) < 2:
        raise ValueError("advantage normalization needs a group of at least 2")
    mean = sum(raw) / len(raw)
    var = sum((x - mean) ** 2 for x in raw) / len(raw)
    std = math.sqrt(var)
    if std <= std_floor:
        return AdvantageVector(tuple(raw), tuple(0.0 for _ in raw), degenerate=True)
    return AdvantageVector(
        tuple(raw), tuple((x - mean) / std for x in raw), degenerate=False
    )


def normalize_advantages_batch(
    groups: list[list[float]], std_floor: float = 1e-8
) -> list[AdvantageVector]:
    """Batch-level variant: center/scale with moments pooled across groups."""
    flat = [x for g in groups for x in g]
    if len(flat) < 2:
        raise ValueError("batch normalization needs at least 2 rewards")
    mean = sum(flat) / len(flat)
    var = sum((x - mean) ** 2 for x in flat) / len(flat)
    std = math.sqrt(var)
    out = []
    for g in groups:
        if std <= std_floor:
            out.append(AdvantageVector(tuple(g), tuple(0.0 for _ in g), degenerate=True))
        else:
            out.append(
                AdvantageVector(
                    tuple(g), tuple((x - mean) / std for x in g), degenerate=False
                )
            )
    return out


# ---------------------------------------------------------------------------
# Clipped objective
# ---------------------------------------------------------------------------

def clipped_token_term(ratio: float, advantage: float, cfg: RewardConfig) -> float:
    clipped = min(max(ratio, 1.0 - cfg.clip_low), 1.0 + cfg.clip_high)
    return min(ratio * advantage, clipped * advantage)


def dapo_objective(
    group: RolloutGroup, advantages: AdvantageVector, cfg: RewardConfig
) -> float:
    """Token-length-normalized clipped objective over the whole group."""
    total_tokens = sum(r.token_length for r in group.responses)
    if total_tokens == 0:
        return 0.0
    acc = 0.0
    for i, resp in enumerate(group.responses):
        adv = advantages.normalized[i]
        for t, (old, new) in enumerate(zip(resp.old_logprobs, resp.new_logprobs)):
            try:
                ratio = math.exp(new - old)
            except OverflowError:
                raise NonFiniteRatio(i, t) from None
            if not math.isfinite(ratio):
                raise NonFiniteRatio(i, t)
            acc += clipped_token_term(ratio, adv, cfg)
    return acc / total_tokens


# ---------------------------------------------------------------------------
# Dynamic filtering
# ---------------------------------------------------------------------------

@dataclass
class FilterReport:
    overlong_responses: int = 0
    truncated_responses: int = 0
    low_mean_groups: int = 0
    high_mean_groups: int = 0
    degenerate_groups: int = 0
    kept_groups: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ScoredGroup:
    group: RolloutGroup
    rewards: list[float]

    @property
    def mean_reward(self) -> float:
        return sum(self.rewards) / len(self.rewards) if self.rewards else 0.0


def score_group(group: RolloutGroup, cfg: RewardConfig) -> ScoredGroup:
    rewards = [
        float(correctness_reward(r.text, group.gold, group.answer_type))
        for r in group.responses
    ]
    return ScoredGroup(group=group, rewards=rewards)


def dynamic_filter(
    scored: list[ScoredGroup], cfg: RewardConfig
) -> tuple[list[ScoredGroup], list[ScoredGroup], FilterReport]:
    """Drop overlong/truncated responses, then uninformative groups.

    A group is dropped when its mean correctness leaves (diff_low, diff_high)
    or its rewards have no variance left to normalize.
    """
    report = FilterReport()
    kept: list[ScoredGroup] = []
    dropped: list[ScoredGroup] = []
    for sg in scored:
        survivors: list[RolloutResponse] = []
        rewards: list[float] = []
        for resp, rew in zip(sg.group.responses, sg.rewards):
            if resp.truncated:
                report.truncated_responses += 1
                continue
            if resp.token_length > cfg.max_len:
                report.overlong_responses += 1
                continue
            survivors.append(resp)
            rewards.append(rew)

        trimmed = ScoredGroup(
            group=RolloutGroup(
                prompt_id=sg.group.prompt_id,
                gold=sg.group.gold,
                responses=survivors,
                answer_type=sg.group.answer_type,
            ),
            rewards=rewards,
        )
        if len(survivors) < 2:
            report.degenerate_groups += 1
            dropped.append(trimmed)
            continue
        mean = trimmed.mean_reward
        if mean < cfg.diff_low:
            report.low_mean_groups += 1
            dropped.append(trimmed)
            continue
        if mean > cfg.diff_high:
            report.high_mean_groups += 1
            dropped.append(trimmed)
            continue
        if normalize_advantages(rewards).degenerate:
            report.degenerate_groups += 1
            dropped.append(trimmed)
            continue
        report.kept_groups += 1
        kept.append(trimmed)
    return kept, dropped, report
