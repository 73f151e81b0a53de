"""Pipeline configuration: one TOML file, strict schema, explicit defaults.

Unknown keys are rejected so typos fail loudly instead of silently running
with defaults. Every run report embeds the fully resolved config, which
together with the seed and input hashes reproduces the run exactly.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .failure_engine import KernelConfig, MixtureConfig, Stage2Config
from .reward import RewardConfig
from .sampler import DEFAULT_BANDS, StratifiedPolicy
from .textstats import DEFAULT_REPETITION_N, DEFAULT_REPETITION_THRESHOLD

# Schema: section -> key -> (type, default). `float` accepts ints too.
_SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "": {"seed": (int, 0)},
    "paths": {
        "input": (str, None),
        "benchmark": (str, None),
        "output": (str, None),
        "report": (str, None),
        "failures": (str, None),
        "documents": (str, None),
        "doc_embeddings": (str, None),
        "query_embeddings": (str, None),
        "provenance": (str, None),
    },
    "curate": {
        "validity_filter": (bool, True),
        "exact_dedup": (bool, True),
        "near_dedup": (bool, True),
        "decontaminate": (bool, True),
        "repetition_filter": (bool, True),
        "stratified_sample": (bool, True),
        "repetition_n": (int, DEFAULT_REPETITION_N),
        "repetition_threshold": (float, DEFAULT_REPETITION_THRESHOLD),
        "shingle_n": (int, 3),
        "decontam_ngram": (int, 13),
        "decontam_check_responses": (bool, True),
        "bands": (list, [list(b) for b in DEFAULT_BANDS]),
    },
    "stage2": {
        "top_k": (int, 30),
        "tau": (float, 0.05),
        "mixture_lambda": (float, 0.5),
        "vote_count": (int, 5),
        "min_quality": (float, 0.0),
        "min_usefulness": (float, 0.0),
        "select_high_difficulty_only": (bool, False),
        "embedder_dim": (int, 32),
        "generator": (str, "mock"),
        "generator_cmd": (list, []),
        "mock_match_prob": (float, 1.0),
        "mock_vote_match_prob": (float, 1.0),
    },
    "reward": {
        "t_min": (int, 1024),
        "t_max": (int, 30720),
        "rep_n": (int, 10),
        "rho_min": (float, 0.05),
        "clip_low": (float, 0.2),
        "clip_high": (float, 0.28),
        "diff_low": (float, 0.1),
        "diff_high": (float, 0.95),
        "max_len": (int, 32768),
        "len_weight": (float, 0.1),
        "fmt_weight": (float, 0.05),
        "normalize_scope": (str, "group"),
    },
    "evaluate": {
        "failure_rule": (str, "majority"),
    },
    "theory": {
        "instances": (int, 1000),
        "mixture_lambda": (float, 0.5),
    },
}


@dataclass
class PipelineConfig:
    seed: int = 0
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)

    def get(self, section: str, key: str) -> Any:
        return self.sections[section][key]

    def to_dict(self) -> dict:
        return {"seed": self.seed, **self.sections}

    # Typed views over the raw sections -------------------------------------

    def stratified_policy(self, seed: int | None = None) -> StratifiedPolicy:
        bands = tuple(tuple(b) for b in self.get("curate", "bands"))
        try:
            return StratifiedPolicy(bands=bands, seed=self.seed if seed is None else seed)
        except ValueError as exc:
            raise ConfigError(f"curate.bands: {exc}") from exc

    def reward_config(self) -> RewardConfig:
        r = self.sections["reward"]
        try:
            return RewardConfig(
                t_min=r["t_min"],
                t_max=r["t_max"],
                rep_n=r["rep_n"],
                rho_min=r["rho_min"],
                clip_low=r["clip_low"],
                clip_high=r["clip_high"],
                diff_low=r["diff_low"],
                diff_high=r["diff_high"],
                max_len=r["max_len"],
                len_weight=r["len_weight"],
                fmt_weight=r["fmt_weight"],
            )
        except ValueError as exc:
            raise ConfigError(f"reward: {exc}") from exc

    def stage2_config(self) -> Stage2Config:
        s = self.sections["stage2"]
        try:
            return Stage2Config(
                kernel=KernelConfig(tau=s["tau"], top_k=s["top_k"]),
                mixture=MixtureConfig(lam=s["mixture_lambda"]),
                vote_count=s["vote_count"],
                min_quality=s["min_quality"],
                min_usefulness=s["min_usefulness"],
                select_high_difficulty_only=s["select_high_difficulty_only"],
            )
        except ValueError as exc:
            raise ConfigError(f"stage2: {exc}") from exc

    def path(self, key: str) -> str | None:
        return self.sections["paths"].get(key)


def _check_type(section: str, key: str, value: Any, expected: type) -> Any:
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is int and isinstance(value, bool):
        raise ConfigError(f"{section}.{key}: expected integer, got boolean")
    if not isinstance(value, expected):
        raise ConfigError(
            f"{section}.{key}: expected {expected.__name__}, got {type(value).__name__}"
        )
    return value


def resolve_config(raw: dict) -> PipelineConfig:
    """Validate raw TOML data against the strict schema and fill defaults."""
    sections: dict[str, dict[str, Any]] = {}
    top_schema = _SCHEMA[""]
    for key, value in raw.items():
        if key in top_schema:
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"unknown section [{key}]")
        if not isinstance(value, dict):
            raise ConfigError(f"[{key}] must be a table")
        for sub, sub_value in value.items():
            if sub not in _SCHEMA[key]:
                raise ConfigError(f"unknown key {key}.{sub}")
            _check_type(key, sub, sub_value, _SCHEMA[key][sub][0])

    seed = raw.get("seed", top_schema["seed"][1])
    _check_type("", "seed", seed, int)

    for section, keys in _SCHEMA.items():
        if section == "":
            continue
        given = raw.get(section, {})
        resolved = {}
        for key, (expected, default) in keys.items():
            if key in given:
                resolved[key] = _check_type(section, key, given[key], expected)
            else:
                resolved[key] = default
        sections[section] = resolved
    return PipelineConfig(seed=seed, sections=sections)


def load_config(path: str | Path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return resolve_config(raw)


def default_config() -> PipelineConfig:
    return resolve_config({})
