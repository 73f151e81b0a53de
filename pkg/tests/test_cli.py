"""End-to-end CLI behavior: pipelines, reports, exit codes, determinism."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from cotforge.cli import main
from cotforge.config import default_config, load_config, resolve_config
from cotforge.corpus import (
    BenchmarkItem,
    load_corpus,
    write_benchmark,
    write_corpus,
    write_jsonl,
)
from cotforge.errors import ConfigError

from conftest import make_annotation, make_sample, random_question

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_curation_fixture(tmp_path, rng):
    """Corpus with exactly 4 invalid, 5 exact dups, 3 near-dup extras, and
    2 benchmark-contaminated records planted on top of 40 clean ones."""
    samples = []
    idx = 0

    def add(question, **kw):
        nonlocal idx
        samples.append(make_sample(idx, id=f"s{idx:04d}", question=question, **kw))
        idx += 1

    for _ in range(40):
        add(random_question(rng, int(rng.integers(15, 40))))
    base_count = idx

    for k in range(5):
        victim = samples[k].question
        add(victim.upper() + " ???")

    for k in range(3):
        tokens = random_question(rng, 130).split()
        add(" ".join(tokens))
        tokens[50] = f"nearvar{k}"
        add(" ".join(tokens))

    bench = [
        BenchmarkItem(id=f"b{i}", question=random_question(rng, 30), gold_answer=str(i))
        for i in range(6)
    ]
    for k in range(2):
        window = " ".join(bench[k].question.split()[:13])
        add(f"leading words {window} trailing words {k}")

    for _ in range(4):
        add(
            random_question(rng, 20),
            annotations=make_annotation(valid=False),
        )

    corpus_path = tmp_path / "corpus.jsonl"
    bench_path = tmp_path / "benchmark.jsonl"
    write_corpus(samples, corpus_path)
    write_benchmark(bench, bench_path)
    return corpus_path, bench_path, len(samples)


def write_config(tmp_path, text=""):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


class TestArgumentSurface:
    @pytest.mark.parametrize(
        "command",
        ["curate", "dedup", "decontam", "sample", "evaluate",
         "failure-synth", "reward-check", "theory-check"],
    )
    def test_help_exits_zero(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        assert "--config" in capsys.readouterr().out

    def test_missing_config_flag_exits_two(self):
        proc = subprocess.run(
            [sys.executable, "-m", "cotforge.cli", "curate"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
        assert "--config" in proc.stderr

    def test_missing_input_precondition(self, tmp_path):
        cfg = write_config(tmp_path)
        rc = main(["curate", "--config", str(cfg), "--output", str(tmp_path / "o.jsonl")])
        assert rc == 2

    def test_unknown_config_key_exits_three(self, tmp_path):
        cfg = write_config(tmp_path, "[curate]\nbogus_key = 1\n")
        rc = main(
            ["curate", "--config", str(cfg), "--input", "x", "--output", "y"]
        )
        assert rc == 3

    def test_missing_config_file_exits_two(self, tmp_path):
        rc = main(["curate", "--config", str(tmp_path / "nope.toml"),
                   "--input", "x", "--output", "y"])
        assert rc == 2


class TestConfigSchema:
    def test_defaults_resolve(self):
        cfg = default_config()
        assert cfg.get("stage2", "top_k") == 30
        assert cfg.get("stage2", "tau") == 0.05
        assert cfg.get("reward", "diff_low") == 0.1
        assert cfg.get("reward", "diff_high") == 0.95
        assert cfg.get("reward", "max_len") == 32768
        assert cfg.get("stage2", "mixture_lambda") == 0.5

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"surprise": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"reward": {"nope": 1}})

    def test_type_checked(self):
        with pytest.raises(ConfigError):
            resolve_config({"reward": {"t_min": "big"}})

    def test_int_promotes_to_float(self):
        cfg = resolve_config({"stage2": {"tau": 1}})
        assert cfg.get("stage2", "tau") == 1.0

    def test_load_from_file(self, tmp_path):
        path = write_config(tmp_path, 'seed = 9\n[stage2]\ntop_k = 7\n')
        cfg = load_config(path)
        assert cfg.seed == 9 and cfg.get("stage2", "top_k") == 7


class TestCurate:
    def test_planted_counts(self, tmp_path, rng):
        corpus_path, bench_path, total = build_curation_fixture(tmp_path, rng)
        cfg = write_config(tmp_path, "[curate]\nstratified_sample = false\n")
        out = tmp_path / "curated.jsonl"
        report_path = tmp_path / "report.jsonl"
        rc = main([
            "curate", "--config", str(cfg),
            "--input", str(corpus_path), "--benchmark", str(bench_path),
            "--output", str(out), "--report", str(report_path),
        ])
        assert rc == 0
        summary = json.loads(report_path.read_text().strip().split("\n")[-1])
        assert summary["exact_removed"] == 5
        assert summary["near_removed"] == 3
        assert summary["decontam_removed"] == 2
        assert summary["final_count"] == total - 4 - 5 - 3 - 2
        assert summary["seed"] == 0
        assert "input_hashes" in summary and "config" in summary

    def test_validity_gate_end_to_end(self, tmp_path, rng):
        corpus_path, bench_path, _ = build_curation_fixture(tmp_path, rng)
        cfg = write_config(tmp_path)
        out = tmp_path / "curated.jsonl"
        rc = main([
            "curate", "--config", str(cfg),
            "--input", str(corpus_path), "--benchmark", str(bench_path),
            "--output", str(out),
        ])
        assert rc == 0
        assert all(s.annotations.valid for s in load_corpus(out))

    def test_empty_input(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        cfg = write_config(tmp_path)
        out = tmp_path / "out.jsonl"
        rc = main(["curate", "--config", str(cfg), "--input", str(empty),
                   "--output", str(out)])
        assert rc == 0
        assert out.read_bytes() == b""

    def test_byte_identical_across_runs_and_threads(self, tmp_path, rng):
        corpus_path, bench_path, _ = build_curation_fixture(tmp_path, rng)
        cfg = write_config(tmp_path, "seed = 21\n")
        outputs = []
        for run, threads in ((0, 1), (1, 1), (2, 8)):
            out = tmp_path / f"out{run}.jsonl"
            rc = main([
                "curate", "--config", str(cfg),
                "--input", str(corpus_path), "--benchmark", str(bench_path),
                "--output", str(out), "--threads", str(threads),
            ])
            assert rc == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_malformed_corpus_strict_exits_three(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{not json}\n")
        cfg = write_config(tmp_path)
        rc = main(["curate", "--config", str(cfg), "--input", str(bad),
                   "--output", str(tmp_path / "o.jsonl"), "--strict"])
        assert rc == 3

    def test_malformed_records_skipped_without_strict(self, tmp_path, rng):
        good = make_sample(0, id="ok", question=random_question(rng, 20))
        path = tmp_path / "mixed.jsonl"
        path.write_text(
            json.dumps(good.to_dict()) + "\n{broken\n" + json.dumps(good.to_dict()) + "\n"
        )
        cfg = write_config(tmp_path, "[curate]\nstratified_sample = false\n")
        report_path = tmp_path / "rep.jsonl"
        out = tmp_path / "o.jsonl"
        rc = main(["curate", "--config", str(cfg), "--input", str(path),
                   "--output", str(out), "--report", str(report_path)])
        assert rc == 0
        loaded = json.loads(report_path.read_text().splitlines()[0])
        assert loaded["skipped_malformed"] == 2  # bad JSON line + duplicate id
        assert [s.id for s in load_corpus(out)] == ["ok"]

    def test_generated_fixture_counts_100_50_10(self, tmp_path):
        gen = subprocess.run(
            [
                sys.executable, str(REPO_ROOT / "scripts" / "make_fixtures.py"),
                "--out", str(tmp_path), "--size", "1000",
                "--exact-dups", "100", "--near-dups", "50",
                "--contaminated", "10", "--invalid", "20", "--seed", "4",
            ],
            capture_output=True,
            text=True,
        )
        assert gen.returncode == 0, gen.stderr
        cfg = write_config(tmp_path, "[curate]\nstratified_sample = false\n")
        report_path = tmp_path / "report.jsonl"
        rc = main([
            "curate", "--config", str(cfg),
            "--input", str(tmp_path / "corpus.jsonl"),
            "--benchmark", str(tmp_path / "benchmark.jsonl"),
            "--output", str(tmp_path / "out.jsonl"),
            "--report", str(report_path),
        ])
        assert rc == 0
        summary = json.loads(report_path.read_text().strip().split("\n")[-1])
        assert summary["exact_removed"] == 100
        assert summary["near_removed"] == 50
        assert summary["decontam_removed"] == 10


class TestSample:
    def test_seed_env_fallback(self, tmp_path, rng, monkeypatch):
        samples = [
            make_sample(i, id=f"s{i:05d}", response=None, token_length=int(L))
            for i, L in enumerate(rng.integers(1, 1000, size=300))
        ]
        src = tmp_path / "in.jsonl"
        write_corpus(samples, src)

        def run(seed_args, env_seed=None):
            if env_seed is None:
                monkeypatch.delenv("LOGICS_SEED", raising=False)
            else:
                monkeypatch.setenv("LOGICS_SEED", str(env_seed))
            out = tmp_path / "out.jsonl"
            rc = main(["sample", "--input", str(src), "--output", str(out)] + seed_args)
            assert rc == 0
            return out.read_bytes()

        via_flag = run(["--seed", "77"])
        via_env = run([], env_seed=77)
        assert via_flag == via_env
        different = run(["--seed", "78"])
        assert different != via_flag


class TestDedupCommand:
    def test_report_has_throughput(self, tmp_path, rng):
        samples = [make_sample(i, id=f"s{i:04d}", question=random_question(rng, 20))
                   for i in range(50)]
        samples.append(make_sample(99, id="s9999", question=samples[0].question))
        src = tmp_path / "in.jsonl"
        write_corpus(samples, src)
        report_path = tmp_path / "rep.jsonl"
        rc = main(["dedup", "--input", str(src), "--output", str(tmp_path / "o.jsonl"),
                   "--report", str(report_path)])
        assert rc == 0
        summary = json.loads(report_path.read_text().strip().split("\n")[-1])
        assert summary["exact_removed"] == 1
        assert "records_per_sec" in summary


class TestEvaluate:
    def test_metrics_and_failures(self, tmp_path):
        bench = [
            BenchmarkItem(id="q1", question="one plus one", gold_answer="2"),
            BenchmarkItem(id="q2", question="two plus two", gold_answer="4"),
            BenchmarkItem(id="q3", question="six times seven", gold_answer="42"),
        ]
        bench_path = tmp_path / "bench.jsonl"
        write_benchmark(bench, bench_path)
        responses = [
            {"item_id": "q1", "responses": ["\\boxed{2}", "\\boxed{2}", "\\boxed{3}"]},
            {"item_id": "q2", "responses": ["\\boxed{5}", "\\boxed{5}", "\\boxed{4}"]},
            {"item_id": "q3", "responses": ["no box at all", "\\boxed{41}", "\\boxed{40}"]},
        ]
        resp_path = tmp_path / "resp.jsonl"
        write_jsonl(responses, resp_path)
        metrics_path = tmp_path / "metrics.json"
        failures_path = tmp_path / "failures.jsonl"
        rc = main([
            "evaluate", "--benchmark", str(bench_path), "--input", str(resp_path),
            "--output", str(metrics_path), "--failures", str(failures_path),
        ])
        assert rc == 0
        metrics = json.loads(metrics_path.read_text())
        agg = metrics["aggregate"]
        assert agg["pass1"] == pytest.approx((2 / 3 + 1 / 3 + 0) / 3)
        assert agg["best_n"] == pytest.approx(2 / 3)
        # majority answers: 2 (correct), 5 (wrong), tie (wrong)
        assert agg["maj_n"] == pytest.approx(1 / 3)
        failures = [json.loads(line) for line in failures_path.read_text().splitlines()]
        assert [f["w"] for f in failures] == [0, 1, 1]

    def test_missing_responses_count_as_failures(self, tmp_path):
        bench = [BenchmarkItem(id="q1", question="q", gold_answer="1")]
        bench_path = tmp_path / "bench.jsonl"
        write_benchmark(bench, bench_path)
        resp_path = tmp_path / "resp.jsonl"
        resp_path.write_text("")
        metrics_path = tmp_path / "m.json"
        failures_path = tmp_path / "f.jsonl"
        rc = main(["evaluate", "--benchmark", str(bench_path), "--input", str(resp_path),
                   "--output", str(metrics_path), "--failures", str(failures_path)])
        assert rc == 0
        metrics = json.loads(metrics_path.read_text())
        assert metrics["aggregate"]["items_missing_responses"] == 1
        failures = [json.loads(line) for line in failures_path.read_text().splitlines()]
        assert failures[0]["w"] == 1


def write_stage2_fixture(tmp_path, rng, n_failures=4, n_documents=30):
    failures = [
        {
            "item_id": f"f{i:03d}",
            "question": random_question(rng, 15),
            "gold_answer": str(i),
            "w": 1,
        }
        for i in range(n_failures)
    ]
    failures_path = tmp_path / "failures.jsonl"
    write_jsonl(failures, failures_path)
    docs = [
        {
            "id": f"d{i:03d}",
            "text": random_question(rng, 50),
            "subject": "STEM",
            "quality_score": 0.9,
            "usefulness_score": 0.9,
        }
        for i in range(n_documents)
    ]
    docs_path = tmp_path / "documents.jsonl"
    write_jsonl(docs, docs_path)
    return failures_path, docs_path


class TestFailureSynth:
    def test_golden_run_and_determinism(self, tmp_path, rng):
        failures_path, docs_path = write_stage2_fixture(tmp_path, rng)
        cfg = write_config(
            tmp_path,
            "seed = 5\n[stage2]\ntop_k = 3\nmock_match_prob = 0.8\nmock_vote_match_prob = 0.9\n",
        )
        blobs = []
        for run, threads in ((0, 1), (1, 8)):
            out = tmp_path / f"syn{run}.jsonl"
            prov = tmp_path / f"prov{run}.jsonl"
            rc = main([
                "failure-synth", "--config", str(cfg),
                "--input", str(failures_path), "--documents", str(docs_path),
                "--output", str(out), "--provenance", str(prov),
                "--threads", str(threads),
            ])
            assert rc == 0
            blobs.append(out.read_bytes() + prov.read_bytes())
        assert blobs[0] == blobs[1]
        produced = load_corpus(tmp_path / "syn0.jsonl")
        assert produced
        prov_rows = [json.loads(l) for l in (tmp_path / "prov0.jsonl").read_text().splitlines()]
        assert len(prov_rows) == len(produced)
        assert {r["sample_id"] for r in prov_rows} == {s.id for s in produced}

    def test_empty_failures_exit_two(self, tmp_path, rng):
        _, docs_path = write_stage2_fixture(tmp_path, rng)
        empty = tmp_path / "nofail.jsonl"
        empty.write_text("")
        cfg = write_config(tmp_path)
        rc = main([
            "failure-synth", "--config", str(cfg),
            "--input", str(empty), "--documents", str(docs_path),
            "--output", str(tmp_path / "o.jsonl"),
        ])
        assert rc == 2

    def test_subprocess_generator_config(self, tmp_path, rng):
        failures_path, docs_path = write_stage2_fixture(tmp_path, rng, n_failures=2, n_documents=6)
        gen_script = REPO_ROOT / "scripts" / "mock_generator.py"
        cfg = write_config(
            tmp_path,
            "seed = 5\n"
            "[stage2]\n"
            "top_k = 2\n"
            'generator = "subprocess"\n'
            f'generator_cmd = ["{sys.executable}", "{gen_script}", "--seed", "5"]\n',
        )
        out = tmp_path / "syn.jsonl"
        rc = main([
            "failure-synth", "--config", str(cfg),
            "--input", str(failures_path), "--documents", str(docs_path),
            "--output", str(out),
        ])
        assert rc == 0
        # mock in-process with same seed must agree with the wire version
        cfg2 = write_config(tmp_path, "seed = 5\n[stage2]\ntop_k = 2\n")
        out2 = tmp_path / "syn2.jsonl"
        rc = main([
            "failure-synth", "--config", str(cfg2),
            "--input", str(failures_path), "--documents", str(docs_path),
            "--output", str(out2),
        ])
        assert rc == 0
        assert out.read_bytes() == out2.read_bytes()


class TestRewardCheck:
    def test_groups_scored_and_filtered(self, tmp_path):
        def group(pid, verdicts, gold="7"):
            return {
                "prompt_id": pid,
                "gold": gold,
                "answer_type": "Numeric",
                "responses": [
                    {
                        "text": f"\\boxed{{{gold if v else 0}}}",
                        "old_logprobs": [0.0, -0.1],
                        "new_logprobs": [0.0, -0.05],
                        "truncated": False,
                    }
                    for v in verdicts
                ],
            }

        rollouts = [
            group("easy", [True] * 8),
            group("hard", [False] * 8),
            group("mid", [True] * 4 + [False] * 4),
        ]
        src = tmp_path / "rollouts.jsonl"
        write_jsonl(rollouts, src)
        out = tmp_path / "reward.json"
        rc = main(["reward-check", "--input", str(src), "--output", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["filter"]["high_mean_groups"] == 1
        assert report["filter"]["low_mean_groups"] == 1
        assert report["filter"]["kept_groups"] == 1
        kept = [g for g in report["groups"] if g["kept"]]
        assert kept[0]["prompt_id"] == "mid"
        assert "objective" in kept[0]
        assert kept[0]["mean_reward"] == pytest.approx(0.5)


class TestTheoryCheck:
    def test_report_written(self, tmp_path):
        out = tmp_path / "theory.json"
        rc = main(["theory-check", "--output", str(out), "--instances", "60", "--seed", "3"])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["sweep"]["descent_bound_violations"] == 0
        assert report["sweep"]["pass_rate"] >= 0.9
        assert set(report["scenarios"]) == {
            "covariate_shift", "support_mismatch",
            "underweighted_high_loss", "conditional_shift",
        }
        assert report["scenarios"]["support_mismatch"]["iw_risk_raises"] is True
