import numpy as np
import pytest

from cotforge.corpus import (
    Annotation,
    AnswerType,
    Domain,
    EducationLevel,
    Sample,
)

WORDS = [f"word{i:04d}" for i in range(2000)]


def make_annotation(
    valid=True,
    domain=Domain.MATH,
    education_level=EducationLevel.UNDERGRADUATE,
    answer_type=AnswerType.NUMERIC,
    verified_answer="42",
):
    if answer_type not in (AnswerType.NUMERIC, AnswerType.MULTIPLE_CHOICE):
        verified_answer = verified_answer  # may be None for other types
    return Annotation(
        valid=valid,
        domain=domain,
        education_level=education_level,
        answer_type=answer_type,
        verified_answer=verified_answer,
    )


def make_sample(idx=0, question="what is the answer", response="it is \\boxed{42}", **kwargs):
    ann = kwargs.pop("annotations", make_annotation())
    token_length = kwargs.pop("token_length", None)
    if token_length is None and response is not None:
        from cotforge.textstats import count_tokens

        token_length = count_tokens(response)
    return Sample(
        id=kwargs.pop("id", f"s{idx:05d}"),
        question=question,
        source=kwargs.pop("source", "test"),
        response=response,
        token_length=token_length,
        annotations=ann,
        **kwargs,
    )


def random_question(rng: np.random.Generator, n_words: int) -> str:
    return " ".join(WORDS[j] for j in rng.integers(0, len(WORDS), size=n_words))


@pytest.fixture
def rng():
    return np.random.default_rng(42)
