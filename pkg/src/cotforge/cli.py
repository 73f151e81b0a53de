"""Command-line pipeline orchestration.

Every subcommand is a thin wrapper over one module operation, shares the
same flags (--config, --seed, --input, --output, --strict, --threads), and
streams newline-delimited JSON events followed by a summary object. Reports
embed the resolved config, the seed, and content hashes of every input so a
run can be reproduced exactly. Exit codes: 0 success, 1 internal error,
2 precondition failure, 3 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

from . import corpus as corpus_mod
from . import dedup as dedup_mod
from . import failure_engine as fe
from . import reward as reward_mod
from . import sampler as sampler_mod
from . import theory_lab
from . import verify as verify_mod
from .config import PipelineConfig, default_config, load_config
from .corpus import Sample, load_benchmark, load_corpus, write_corpus, write_jsonl
from .errors import CotforgeError, MissingLength, PreconditionError
from .textstats import count_tokens, repetition_stats

SEED_ENV_VAR = "LOGICS_SEED"


def parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    """Order-preserving map over a worker pool; identical results at any width."""
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def read_corpus(path: str | Path, strict: bool) -> tuple[list[Sample], int]:
    """Load a corpus; under --strict any bad record aborts, otherwise bad
    records are skipped and counted so a long run can keep going."""
    if strict:
        return load_corpus(path), 0
    samples: list[Sample] = []
    seen: set[str] = set()
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                sample = Sample.from_dict(obj)
            except (json.JSONDecodeError, KeyError, ValueError, TypeError, AttributeError):
                skipped += 1
                continue
            if sample.id in seen:
                skipped += 1
                continue
            seen.add(sample.id)
            samples.append(sample)
    return samples, skipped


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunReport:
    """Streams event lines to stdout and accumulates them for the report file."""

    def __init__(self, command: str, config: PipelineConfig, seed: int, inputs: dict[str, str]):
        self.events: list[dict] = []
        self.summary: dict[str, Any] = {
            "command": command,
            "seed": seed,
            "config": config.to_dict(),
            "input_hashes": {name: file_sha256(p) for name, p in inputs.items()},
        }

    def event(self, stage: str, **fields: Any) -> None:
        evt = {"event": stage, **fields}
        self.events.append(evt)
        print(json.dumps(evt, ensure_ascii=False))

    def finish(self, report_path: str | None, **fields: Any) -> dict:
        self.summary.update(fields)
        final = {"event": "summary", **self.summary}
        print(json.dumps(final, ensure_ascii=False))
        if report_path:
            write_jsonl(self.events + [final], report_path)
        return final


def resolve_seed(args: argparse.Namespace, config: PipelineConfig) -> int:
    if args.seed is not None:
        return args.seed
    if config.seed != 0:
        return config.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return config.seed


def _load_config_arg(args: argparse.Namespace) -> PipelineConfig:
    if args.config:
        return load_config(args.config)
    return default_config()


def _require(args: argparse.Namespace, config: PipelineConfig, flag: str, path_key: str) -> str:
    value = getattr(args, flag.lstrip("-").replace("-", "_"), None) or config.path(path_key)
    if not value:
        raise PreconditionError(f"missing required flag {flag} (or paths.{path_key} in config)")
    return value


# ---------------------------------------------------------------------------
# curate
# ---------------------------------------------------------------------------

def run_curate(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    input_path = _require(args, config, "--input", "input")
    output_path = _require(args, config, "--output", "output")
    bench_path = args.benchmark or config.path("benchmark")
    c = config.sections["curate"]

    inputs = {"input": input_path}
    if bench_path and c["decontaminate"]:
        inputs["benchmark"] = bench_path
    report = RunReport("curate", config, seed, inputs)

    samples, skipped = read_corpus(input_path, args.strict)
    report.event("loaded", count=len(samples), skipped_malformed=skipped)

    if c["validity_filter"]:
        before = len(samples)
        valid = [s for s in samples if s.annotations.valid]
        expected_lengths = parallel_map(
            lambda s: count_tokens(s.response) if s.response is not None else None,
            valid,
            args.threads,
        )
        kept = []
        filled = 0
        for s, expected in zip(valid, expected_lengths):
            if expected is not None and s.token_length != expected:
                s = Sample(
                    id=s.id,
                    question=s.question,
                    source=s.source,
                    annotations=s.annotations,
                    response=s.response,
                    token_length=expected,
                )
                filled += 1
            kept.append(s)
        samples = kept
        report.event(
            "validity_filter", removed=before - len(samples),
            token_length_filled=filled, remaining=len(samples),
        )

    exact_removed = 0
    if c["exact_dedup"]:
        samples, removed = dedup_mod.exact_dedup(samples)
        exact_removed = len(removed)
        report.event("exact_dedup", removed=exact_removed, remaining=len(samples))

    near_removed = 0
    if c["near_dedup"]:
        samples, near_report = dedup_mod.near_dedup(samples, shingle_n=c["shingle_n"])
        near_removed = near_report.near_removed
        report.event("near_dedup", removed=near_removed, remaining=len(samples))

    decontam_removed = 0
    if c["decontaminate"] and bench_path:
        bench = load_benchmark(bench_path)
        samples, removed = dedup_mod.decontaminate(
            samples,
            bench,
            shingle_n=c["shingle_n"],
            ngram_n=c["decontam_ngram"],
            check_responses=c["decontam_check_responses"],
        )
        decontam_removed = len(removed)
        report.event("decontaminate", removed=decontam_removed, remaining=len(samples))

    repetition_removed = 0
    if c["repetition_filter"]:
        before = len(samples)
        samples = [
            s
            for s in samples
            if s.response is None
            or repetition_stats(s.response, c["repetition_n"]).duplication_ratio
            <= c["repetition_threshold"]
        ]
        repetition_removed = before - len(samples)
        report.event("repetition_filter", removed=repetition_removed, remaining=len(samples))

    if c["stratified_sample"]:
        for s in samples:
            if s.token_length is None:
                raise MissingLength(s.id)
        policy = config.stratified_policy(seed=seed)
        samples, sampling_report = sampler_mod.stratified_sample(samples, policy)
        report.event("stratified_sample", remaining=len(samples), **sampling_report.to_dict())

    count = write_corpus(samples, output_path)
    report.finish(
        args.report,
        output=output_path,
        final_count=count,
        exact_removed=exact_removed,
        near_removed=near_removed,
        decontam_removed=decontam_removed,
        repetition_removed=repetition_removed,
    )
    return 0


# ---------------------------------------------------------------------------
# dedup / decontam / sample
# ---------------------------------------------------------------------------

def run_dedup(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    input_path = _require(args, config, "--input", "input")
    output_path = _require(args, config, "--output", "output")
    report = RunReport("dedup", config, seed, {"input": input_path})

    started = time.monotonic()
    samples, skipped = read_corpus(input_path, args.strict)
    total = len(samples)
    if skipped:
        report.event("loaded", skipped_malformed=skipped)
    samples, removed = dedup_mod.exact_dedup(samples)
    report.event("exact_dedup", removed=len(removed), remaining=len(samples))
    samples, near_report = dedup_mod.near_dedup(samples)
    report.event("near_dedup", removed=near_report.near_removed, remaining=len(samples))
    elapsed = time.monotonic() - started

    count = write_corpus(samples, output_path)
    report.finish(
        args.report,
        output=output_path,
        final_count=count,
        exact_removed=len(removed),
        near_removed=near_report.near_removed,
        seconds=round(elapsed, 3),
        records_per_sec=round(total / elapsed, 1) if elapsed > 0 else None,
    )
    return 0


def run_decontam(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    input_path = _require(args, config, "--input", "input")
    output_path = _require(args, config, "--output", "output")
    bench_path = _require(args, config, "--benchmark", "benchmark")
    c = config.sections["curate"]
    report = RunReport("decontam", config, seed, {"input": input_path, "benchmark": bench_path})

    samples, skipped = read_corpus(input_path, args.strict)
    if skipped:
        report.event("loaded", skipped_malformed=skipped)
    bench = load_benchmark(bench_path)
    clean, removed = dedup_mod.decontaminate(
        samples,
        bench,
        shingle_n=c["shingle_n"],
        ngram_n=c["decontam_ngram"],
        check_responses=c["decontam_check_responses"],
    )
    report.event("decontaminate", removed=len(removed), remaining=len(clean))
    count = write_corpus(clean, output_path)
    report.finish(args.report, output=output_path, final_count=count, removed=len(removed))
    return 0


def run_sample(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    input_path = _require(args, config, "--input", "input")
    output_path = _require(args, config, "--output", "output")
    report = RunReport("sample", config, seed, {"input": input_path})

    samples, skipped = read_corpus(input_path, args.strict)
    if skipped:
        report.event("loaded", skipped_malformed=skipped)
    policy = config.stratified_policy(seed=seed)
    retained, sampling_report = sampler_mod.stratified_sample(samples, policy)
    report.event("stratified_sample", remaining=len(retained), **sampling_report.to_dict())
    count = write_corpus(retained, output_path)
    report.finish(args.report, output=output_path, final_count=count)
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def run_evaluate(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    bench_path = _require(args, config, "--benchmark", "benchmark")
    responses_path = _require(args, config, "--input", "input")
    output_path = _require(args, config, "--output", "output")
    failures_path = args.failures or config.path("failures")
    rule = config.get("evaluate", "failure_rule")
    if rule not in ("majority", "any", "first"):
        raise PreconditionError(f"unknown failure rule {rule!r}")

    report = RunReport(
        "evaluate", config, seed, {"benchmark": bench_path, "responses": responses_path}
    )
    bench = load_benchmark(bench_path)
    responses: dict[str, list[str]] = {}
    for _line_no, obj in corpus_mod.iter_jsonl(responses_path):
        responses[str(obj["item_id"])] = [str(r) for r in obj["responses"]]

    items = []
    failures = []
    agg = {"pass1": 0.0, "best_n": 0, "maj_n": 0, "missing": 0}
    for item in bench:
        resp = responses.get(item.id, [])
        if not resp:
            agg["missing"] += 1
            failures.append(
                verify_mod.FailureRecord(
                    item_id=item.id,
                    question=item.question,
                    gold_answer=item.gold_answer,
                    model_answer=None,
                    w=1,
                )
            )
            items.append({"item_id": item.id, "missing": True, "w": 1})
            continue
        rollouts = verify_mod.RolloutSet(
            item_id=item.id, gold_answer=item.gold_answer, responses=resp
        )
        scores = verify_mod.score_rollouts(rollouts)
        maj = verify_mod.majority_answer(rollouts)
        if rule == "majority":
            w = 1 - scores.maj_n
            model_answer = maj
        elif rule == "any":
            w = 1 - scores.best_n
            model_answer = maj
        else:
            first = verify_mod.failure_indicator(item, resp[0])
            w = first.w
            model_answer = first.model_answer
        failures.append(
            verify_mod.FailureRecord(
                item_id=item.id,
                question=item.question,
                gold_answer=item.gold_answer,
                model_answer=model_answer,
                w=w,
            )
        )
        agg["pass1"] += scores.pass1
        agg["best_n"] += scores.best_n
        agg["maj_n"] += scores.maj_n
        items.append(
            {
                "item_id": item.id,
                "pass1": scores.pass1,
                "best_n": scores.best_n,
                "maj_n": scores.maj_n,
                "w": w,
            }
        )

    n_scored = max(1, len(bench) - agg["missing"])
    metrics = {
        "items": items,
        "aggregate": {
            "pass1": agg["pass1"] / n_scored,
            "best_n": agg["best_n"] / n_scored,
            "maj_n": agg["maj_n"] / n_scored,
            "items_total": len(bench),
            "items_missing_responses": agg["missing"],
            "failures": sum(f.w for f in failures),
            "failure_rule": rule,
        },
    }
    Path(output_path).write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
    if failures_path:
        write_jsonl((f.to_dict() for f in failures), failures_path)
    report.finish(
        args.report, output=output_path, failures_file=failures_path,
        **metrics["aggregate"],
    )
    return 0


# ---------------------------------------------------------------------------
# failure-synth
# ---------------------------------------------------------------------------

def load_failures(path: str | Path) -> list[verify_mod.FailureRecord]:
    return [
        verify_mod.FailureRecord.from_dict(obj) for _ln, obj in corpus_mod.iter_jsonl(path)
    ]


def run_failure_synth(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    failures_path = _require(args, config, "--input", "failures")
    documents_path = _require(args, config, "--documents", "documents")
    output_path = _require(args, config, "--output", "output")
    s2 = config.sections["stage2"]
    cfg = config.stage2_config()

    inputs = {"failures": failures_path, "documents": documents_path}
    doc_emb_path = config.path("doc_embeddings")
    query_emb_path = config.path("query_embeddings")
    if doc_emb_path:
        inputs["doc_embeddings"] = doc_emb_path
    if query_emb_path:
        inputs["query_embeddings"] = query_emb_path
    report = RunReport("failure-synth", config, seed, inputs)

    failures = load_failures(failures_path)
    documents = fe.load_documents(
        documents_path, min_quality=cfg.min_quality, min_usefulness=cfg.min_usefulness
    )
    report.event("loaded", failures=len(failures), documents=len(documents))

    embedder = fe.HashingEmbedder(dim=s2["embedder_dim"], seed=seed)
    if doc_emb_path:
        doc_store = fe.load_embeddings(doc_emb_path)
    else:
        doc_store = fe.EmbeddingStore.from_entries(
            ((d.id, embedder.embed(d.text)) for d in documents), embedder.dim
        )
    query_store = fe.load_embeddings(query_emb_path) if query_emb_path else None

    if s2["generator"] == "mock":
        generator: fe.TwoPassGenerator = fe.MockGenerator(
            seed=seed,
            match_prob=s2["mock_match_prob"],
            vote_match_prob=s2["mock_vote_match_prob"],
        )
        closer = None
    elif s2["generator"] == "subprocess":
        if not s2["generator_cmd"]:
            raise PreconditionError("stage2.generator_cmd required for subprocess generator")
        sub = fe.SubprocessGenerator([str(c) for c in s2["generator_cmd"]])
        generator, closer = sub, sub.close
    else:
        raise PreconditionError(f"unknown generator kind {s2['generator']!r}")

    try:
        samples, provenance, stage_report, psyn = fe.build_stage2_corpus(
            failures=failures,
            doc_store=doc_store,
            documents=documents,
            generator=generator,
            cfg=cfg,
            query_embedder=embedder,
            query_store=query_store,
            strict=args.strict,
        )
    finally:
        if closer:
            closer()

    count = write_corpus(samples, output_path)
    provenance_path = args.provenance or config.path("provenance") or (output_path + ".provenance.jsonl")
    write_jsonl((p.to_dict() for p in provenance), provenance_path)

    top_psyn = sorted(psyn.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
    report.event("stage2", **stage_report.to_dict())
    report.finish(
        args.report,
        output=output_path,
        provenance=provenance_path,
        final_count=count,
        psyn_top=[{"question": q, "answer": a, "p": p} for (q, a), p in top_psyn],
    )
    return 0


# ---------------------------------------------------------------------------
# reward-check
# ---------------------------------------------------------------------------

def run_reward_check(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    input_path = _require(args, config, "--input", "input")
    output_path = _require(args, config, "--output", "output")
    cfg = config.reward_config()
    scope = config.get("reward", "normalize_scope")
    if scope not in ("group", "batch"):
        raise PreconditionError(f"unknown normalize scope {scope!r}")
    report = RunReport("reward-check", config, seed, {"input": input_path})

    groups: list[reward_mod.RolloutGroup] = []
    for _line_no, obj in corpus_mod.iter_jsonl(input_path):
        responses = [
            reward_mod.RolloutResponse(
                text=r["text"],
                old_logprobs=[float(v) for v in r["old_logprobs"]],
                new_logprobs=[float(v) for v in r["new_logprobs"]],
                truncated=bool(r.get("truncated", False)),
            )
            for r in obj["responses"]
        ]
        answer_type = obj.get("answer_type")
        groups.append(
            reward_mod.RolloutGroup(
                prompt_id=str(obj["prompt_id"]),
                gold=str(obj["gold"]),
                responses=responses,
                answer_type=corpus_mod.AnswerType(answer_type) if answer_type else None,
            )
        )

    scored = [reward_mod.score_group(g, cfg) for g in groups]
    kept, dropped, filter_report = reward_mod.dynamic_filter(scored, cfg)

    if scope == "batch" and kept:
        batch_adv = reward_mod.normalize_advantages_batch([sg.rewards for sg in kept])
        advantages = dict(zip((sg.group.prompt_id for sg in kept), batch_adv))
    else:
        advantages = {
            sg.group.prompt_id: reward_mod.normalize_advantages(sg.rewards) for sg in kept
        }

    rows = []
    for sg in kept:
        adv = advantages[sg.group.prompt_id]
        objective = reward_mod.dapo_objective(sg.group, adv, cfg)
        rows.append(
            {
                "prompt_id": sg.group.prompt_id,
                "kept": True,
                "rewards": sg.rewards,
                "mean_reward": sg.mean_reward,
                "advantages": list(adv.normalized),
                "objective": objective,
            }
        )
    for sg in dropped:
        rows.append(
            {
                "prompt_id": sg.group.prompt_id,
                "kept": False,
                "rewards": sg.rewards,
                "mean_reward": sg.mean_reward,
            }
        )

    out = {"groups": rows, "filter": filter_report.to_dict(), "normalize_scope": scope}
    Path(output_path).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    report.finish(args.report, output=output_path, **filter_report.to_dict())
    return 0


# ---------------------------------------------------------------------------
# theory-check
# ---------------------------------------------------------------------------

def run_theory_check(args: argparse.Namespace) -> int:
    config = _load_config_arg(args)
    seed = resolve_seed(args, config)
    output_path = _require(args, config, "--output", "output")
    instances = args.instances or config.get("theory", "instances")
    lam = config.get("theory", "mixture_lambda")
    report = RunReport("theory-check", config, seed, {})

    sweep = theory_lab.theorem_sweep(n_instances=instances, seed=seed, lam=lam)
    report.event("sweep", **{k: v for k, v in sweep.to_dict().items() if k != "violations"})

    scenario_rows = {}
    for scenario in theory_lab.scenario_suite():
        problem = scenario.make(seed)
        holds = scenario.predicate(problem)
        row: dict[str, Any] = {"predicate_holds": bool(holds)}
        if scenario.name == "support_mismatch":
            try:
                theory_lab.iw_risk(problem)
                row["iw_risk_raises"] = False
            except theory_lab.SupportMismatch:
                row["iw_risk_raises"] = True
        scenario_rows[scenario.name] = row
        report.event("scenario", name=scenario.name, **row)

    out = {
        "sweep": sweep.to_dict(),
        "scenarios": scenario_rows,
        "eta": 0.1 / theory_lab.SAFE_SMOOTHNESS_BOUND,
        "smoothness_bound": theory_lab.SAFE_SMOOTHNESS_BOUND,
        "seed": seed,
    }
    Path(output_path).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    report.finish(
        args.report,
        output=output_path,
        pass_rate=sweep.pass_rate,
        descent_bound_violations=sweep.descent_bound_violations,
    )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (fallback: config, then ${SEED_ENV_VAR})")
    parser.add_argument("--input", help="input file")
    parser.add_argument("--output", help="output file")
    parser.add_argument("--report", help="write the NDJSON run report here")
    parser.add_argument("--strict", action="store_true",
                        help="abort on any per-record error instead of counting it")
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cotforge",
        description="Data engine for long chain-of-thought corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    commands: dict[str, tuple[Callable, str]] = {
        "curate": (run_curate, "full curation pipeline: validity, dedup, decontam, repetition, sampling"),
        "dedup": (run_dedup, "exact + near deduplication"),
        "decontam": (run_decontam, "benchmark decontamination"),
        "sample": (run_sample, "length-stratified sampling"),
        "evaluate": (run_evaluate, "score rollouts against a benchmark and emit failures"),
        "failure-synth": (run_failure_synth, "retrieval + synthesis around failures"),
        "reward-check": (run_reward_check, "reward/advantage/objective math over rollout groups"),
        "theory-check": (run_theory_check, "run the distribution-matching verification sweep"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_shared_flags(p)
        if name in ("curate", "failure-synth"):
            # full-pipeline commands always run against an explicit config
            for action in p._actions:
                if action.dest == "config":
                    action.required = True
        if name in ("curate", "decontam", "evaluate"):
            p.add_argument("--benchmark", help="benchmark JSONL file")
        if name == "evaluate":
            p.add_argument("--failures", help="write failure records here")
        if name == "failure-synth":
            p.add_argument("--documents", help="knowledge documents JSONL")
            p.add_argument("--provenance", help="write provenance rows here")
        if name == "theory-check":
            p.add_argument("--instances", type=int, default=None)
        p.set_defaults(handler=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CotforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
