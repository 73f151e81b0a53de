"""Schema, normalization, and JSONL round-trip behavior."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotforge.corpus import (
    Annotation,
    AnswerType,
    BenchmarkItem,
    Domain,
    EducationLevel,
    Sample,
    load_corpus,
    normalize_question,
    write_corpus,
)
from cotforge.errors import DuplicateId, MalformedRecord

from conftest import make_annotation, make_sample


class TestNormalizeQuestion:
    def test_golden_vector(self):
        assert normalize_question("What is 2+2?") == "what is 2 2"

    def test_empty(self):
        assert normalize_question("") == ""

    def test_whitespace_collapse(self):
        assert normalize_question("a   b\t\nc") == "a b c"

    def test_case_insensitive(self):
        assert normalize_question("ABC def") == normalize_question("abc DEF")

    def test_nfkc_stabilizes_fullwidth(self):
        # fullwidth digits normalize to ASCII
        assert normalize_question("２ + ２") == "2 2"

    @given(st.text(max_size=200))
    @settings(max_examples=1000, deadline=None)
    def test_idempotent(self, text):
        once = normalize_question(text)
        assert normalize_question(once) == once

    @given(st.text(alphabet=st.characters(codec="ascii"), max_size=100))
    @settings(max_examples=300, deadline=None)
    def test_ascii_upper_invariance(self, text):
        assert normalize_question(text.upper()) == normalize_question(text)


class TestAnnotationSchema:
    def test_verifiable_types_require_answer(self):
        with pytest.raises(ValueError):
            Annotation(
                valid=True,
                domain=Domain.MATH,
                education_level=EducationLevel.GRADUATE,
                answer_type=AnswerType.NUMERIC,
                verified_answer=None,
            )
        with pytest.raises(ValueError):
            Annotation(
                valid=True,
                domain=Domain.CODE,
                education_level=EducationLevel.GRADUATE,
                answer_type=AnswerType.MULTIPLE_CHOICE,
                verified_answer=None,
            )

    def test_proof_type_allows_missing_answer(self):
        ann = Annotation(
            valid=True,
            domain=Domain.MATH,
            education_level=EducationLevel.GRADUATE,
            answer_type=AnswerType.PROOF,
        )
        assert not ann.verifiable

    def test_sample_id_nonempty(self):
        with pytest.raises(ValueError):
            Sample(id="", question="q", source="s", annotations=make_annotation())

    def test_benchmark_gold_nonempty(self):
        with pytest.raises(ValueError):
            BenchmarkItem(id="b", question="q", gold_answer="")


class TestCorpusIO:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_corpus(path) == []

    def test_single_record_roundtrip(self, tmp_path):
        sample = make_sample(0)
        path = tmp_path / "one.jsonl"
        assert write_corpus([sample], path) == 1
        loaded = load_corpus(path)
        assert loaded == [sample]

    def test_duplicate_id_rejected(self, tmp_path):
        a = make_sample(0, id="a")
        b = make_sample(1, id="a")
        path = tmp_path / "dup.jsonl"
        write_corpus([a, b], path)
        with pytest.raises(DuplicateId) as exc:
            load_corpus(path)
        assert exc.value.record_id == "a"

    def test_write_empty(self, tmp_path):
        path = tmp_path / "zero.jsonl"
        assert write_corpus([], path) == 0
        assert path.read_bytes() == b""

    def test_three_samples_three_lines(self, tmp_path):
        samples = [make_sample(i) for i in range(3)]
        path = tmp_path / "three.jsonl"
        assert write_corpus(samples, path) == 3
        assert path.read_text().count("\n") == 3

    def test_multiline_response_roundtrip(self, tmp_path):
        sample = make_sample(0, response="line one\nline two\n\ttabbed \\boxed{1}")
        path = tmp_path / "ml.jsonl"
        write_corpus([sample], path)
        assert load_corpus(path) == [sample]
        assert len(path.read_text().strip().split("\n")) == 1

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps(make_sample(0).to_dict())
        path.write_text(good + "\n{not json\n")
        with pytest.raises(MalformedRecord) as exc:
            load_corpus(path)
        assert exc.value.line_no == 2

    def test_missing_field_reports_line(self, tmp_path):
        path = tmp_path / "missing.jsonl"
        obj = make_sample(0).to_dict()
        del obj["question"]
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(MalformedRecord) as exc:
            load_corpus(path)
        assert exc.value.line_no == 1

    def test_optional_fields_absent_not_null(self, tmp_path):
        sample = make_sample(
            0,
            response=None,
            token_length=None,
            annotations=make_annotation(answer_type=AnswerType.PROOF, verified_answer=None),
        )
        path = tmp_path / "opt.jsonl"
        write_corpus([sample], path)
        raw = json.loads(path.read_text())
        assert "response" not in raw
        assert "token_length" not in raw
        assert "verified_answer" not in raw["annotations"]
        assert "null" not in path.read_text()

    def test_exact_key_names(self, tmp_path):
        path = tmp_path / "keys.jsonl"
        write_corpus([make_sample(0)], path)
        raw = json.loads(path.read_text())
        assert set(raw) == {"id", "question", "response", "source", "annotations", "token_length"}
        assert set(raw["annotations"]) == {
            "valid",
            "domain",
            "education_level",
            "answer_type",
            "verified_answer",
        }

    def test_unicode_roundtrip(self, tmp_path):
        sample = make_sample(0, question="什么是 π ≈ 3.14159?", response="答案 \\boxed{π}")
        path = tmp_path / "uni.jsonl"
        write_corpus([sample], path)
        assert load_corpus(path)[0].question == sample.question


@st.composite
def samples(draw):
    idx = draw(st.integers(0, 10**6))
    question = draw(st.text(max_size=80))
    response = draw(st.one_of(st.none(), st.text(max_size=120)))
    answer_type = draw(st.sampled_from(list(AnswerType)))
    verified = (
        draw(st.text(min_size=1, max_size=10))
        if answer_type in (AnswerType.NUMERIC, AnswerType.MULTIPLE_CHOICE)
        else draw(st.one_of(st.none(), st.text(min_size=1, max_size=10)))
    )
    ann = Annotation(
        valid=draw(st.booleans()),
        domain=draw(st.sampled_from(list(Domain))),
        education_level=draw(st.sampled_from(list(EducationLevel))),
        answer_type=answer_type,
        verified_answer=verified,
    )
    token_length = None
    if response is not None:
        from cotforge.textstats import count_tokens

        token_length = count_tokens(response)
    return Sample(
        id=f"s{idx}",
        question=question,
        source=draw(st.sampled_from(["a", "b", "c"])),
        response=response,
        token_length=token_length,
        annotations=ann,
    )


class TestRoundTripProperty:
    @given(st.lists(samples(), max_size=12, unique_by=lambda s: s.id))
    @settings(max_examples=150, deadline=None)
    def test_load_write_identity(self, tmp_path_factory, sample_list):
        path = tmp_path_factory.mktemp("rt") / "c.jsonl"
        write_corpus(sample_list, path)
        assert load_corpus(path) == sample_list
