#!/usr/bin/env python3
"""End-to-end walkthrough on synthetic fixtures.

Generates a corpus with planted duplicates and contamination, curates it,
evaluates a mock model on the benchmark to collect failures, synthesizes a
stage-2 corpus around them, and runs the theory sweep:

    python scripts/demo_pipeline.py --workdir /tmp/demo
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def run(args: list[str]) -> None:
    print(f"\n$ {' '.join(args)}")
    subprocess.run(args, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, required=True)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    wd = args.workdir
    wd.mkdir(parents=True, exist_ok=True)

    config = wd / "config.toml"
    config.write_text(f"seed = {args.seed}\n[stage2]\ntop_k = 5\n")

    run([
        sys.executable, str(REPO_ROOT / "scripts" / "make_fixtures.py"),
        "--out", str(wd), "--size", "2000", "--seed", str(args.seed),
    ])
    run([
        sys.executable, "-m", "cotforge.cli", "curate",
        "--config", str(config),
        "--input", str(wd / "corpus.jsonl"),
        "--benchmark", str(wd / "benchmark.jsonl"),
        "--output", str(wd / "curated.jsonl"),
        "--report", str(wd / "curate_report.jsonl"),
    ])

    # mock rollouts: answer most benchmark items wrong so failures exist
    bench_lines = (wd / "benchmark.jsonl").read_text().splitlines()
    rollouts = []
    for i, line in enumerate(bench_lines):
        item = json.loads(line)
        answer = item["gold_answer"] if i % 4 == 0 else "999"
        rollouts.append(
            {"item_id": item["id"], "responses": [f"reasoning... \\boxed{{{answer}}}"] * 3}
        )
    (wd / "rollouts.jsonl").write_text(
        "\n".join(json.dumps(r) for r in rollouts) + "\n"
    )
    run([
        sys.executable, "-m", "cotforge.cli", "evaluate",
        "--benchmark", str(wd / "benchmark.jsonl"),
        "--input", str(wd / "rollouts.jsonl"),
        "--output", str(wd / "metrics.json"),
        "--failures", str(wd / "failures.jsonl"),
    ])
    run([
        sys.executable, "-m", "cotforge.cli", "failure-synth",
        "--config", str(config),
        "--input", str(wd / "failures.jsonl"),
        "--documents", str(wd / "documents.jsonl"),
        "--output", str(wd / "stage2.jsonl"),
        "--report", str(wd / "stage2_report.jsonl"),
    ])
    run([
        sys.executable, "-m", "cotforge.cli", "theory-check",
        "--output", str(wd / "theory.json"),
        "--instances", "300",
        "--seed", str(args.seed),
    ])

    print(f"\nall artifacts in {wd}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
