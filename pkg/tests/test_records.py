import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hallguard.records import (
    Claim,
    GenerationRecord,
    GroundTruthLabel,
    RecordParseError,
    RecordValidationError,
    Sample,
    TokenDistribution,
    parse_records,
    record_from_json,
    record_to_json,
    validate_record,
    write_records,
)

MINIMAL_LINE = b'{"id": "r1", "prompt": "q?", "samples": [{"text": "a"}]}\n'


def valid_record(record_id="r1"):
    return GenerationRecord(
        id=record_id,
        prompt="what is the rate?",
        samples=[
            Sample(
                text="it will raise",
                token_dists=[TokenDistribution(["raise", "cut", "hold"], [0.6, 0.3, 0.1])],
                token_logprobs=[-0.51],
                embedding=[0.1, 0.2],
                reasoning="trend analysis",
                answer="raise",
                self_confidence=0.65,
            ),
            Sample(text="it will cut", answer="cut"),
        ],
        reference_claims=[Claim(key="rate", value=5.0, unit="%")],
        ground_truth=GroundTruthLabel(is_hallucinated=True, failure_class="data", correct_answer="hold"),
    )


def test_parse_minimal_line():
    records = parse_records(MINIMAL_LINE)
    assert len(records) == 1
    assert records[0].id == "r1"
    assert records[0].samples[0].text == "a"


def test_parse_rejects_bad_prob_sum():
    line = b'{"id": "r1", "prompt": "q", "samples": [{"text": "a", "token_dists": [{"labels": ["x", "y"], "probs": [0.5, 0.3]}]}]}\n'
    with pytest.raises(RecordValidationError) as exc:
        parse_records(line)
    assert "probs" in str(exc.value)
    assert "r1" in str(exc.value)


def test_parse_malformed_json_reports_line_number():
    data = MINIMAL_LINE + b"{not json}\n"
    with pytest.raises(RecordParseError) as exc:
        parse_records(data)
    assert exc.value.line_no == 2


def test_parse_rejects_duplicate_ids():
    with pytest.raises(RecordValidationError, match="duplicate"):
        parse_records(MINIMAL_LINE + MINIMAL_LINE)


def test_three_record_round_trip():
    records = [valid_record(f"r{i}") for i in range(3)]
    assert parse_records(write_records(records)) == records


def test_write_empty_corpus_is_empty_stream():
    assert write_records([]) == b""


def test_write_single_record_is_one_line_with_newline():
    data = write_records([valid_record()])
    assert data.endswith(b"\n")
    assert data.count(b"\n") == 1


def test_unknown_keys_survive_round_trip():
    obj = json.loads(MINIMAL_LINE)
    obj["pipeline_tag"] = "v2"
    obj["samples"][0]["trace_id"] = 17
    record = record_from_json(obj)
    assert record.extra == {"pipeline_tag": "v2"}
    assert record.samples[0].extra == {"trace_id": 17}
    assert record_to_json(record) == obj


def test_validate_accepts_valid_record():
    assert validate_record(valid_record()) == []


@pytest.mark.parametrize(
    "mutate, path_fragment",
    [
        (lambda r: r.__class__(**{**vars(r), "id": ""}), "id"),
        (lambda r: r.__class__(**{**vars(r), "samples": []}), "samples"),
        (
            lambda r: _with_sample(r, self_confidence=1.3),
            "self_confidence",
        ),
        (
            lambda r: _with_sample(r, token_logprobs=[0.2]),
            "token_logprobs",
        ),
        (
            lambda r: _with_sample(r, token_dists=[]),
            "token_dists",
        ),
        (
            lambda r: _with_sample(
                r, token_dists=[TokenDistribution(["a", "a"], [0.5, 0.5])]
            ),
            "token_labels",
        ),
        (
            lambda r: _with_sample(
                r, token_dists=[TokenDistribution(["a", "b"], [0.5])]
            ),
            "probs",
        ),
        (
            lambda r: _with_sample(
                r, token_dists=[TokenDistribution(["a", "b"], [1.2, -0.2])]
            ),
            "probs",
        ),
        (
            lambda r: _with_sample(
                r, token_dists=[TokenDistribution(["a", "b"], [0.5, 0.3])]
            ),
            "probs",
        ),
        (
            lambda r: r.__class__(
                **{
                    **vars(r),
                    "reference_claims": [Claim(key="", value=1.0)],
                }
            ),
            "reference_claims",
        ),
        (
            lambda r: r.__class__(
                **{
                    **vars(r),
                    "ground_truth": GroundTruthLabel(is_hallucinated=False, failure_class="data"),
                }
            ),
            "failure_class",
        ),
        (
            lambda r: r.__class__(
                **{
                    **vars(r),
                    "ground_truth": GroundTruthLabel(is_hallucinated=True, failure_class="pilot"),
                }
            ),
            "failure_class",
        ),
    ],
)
def test_each_invariant_violation_is_detected(mutate, path_fragment):
    broken = mutate(valid_record())
    diags = validate_record(broken)
    assert diags, "expected at least one diagnostic"
    assert any(path_fragment in d.path for d in diags)


def _with_sample(record, **fields):
    sample = Sample(**{**vars(record.samples[0]), **fields})
    return GenerationRecord(**{**vars(record), "samples": [sample]})


def test_duplicate_label_diagnostic_names_token_labels():
    record = _with_sample(valid_record(), token_dists=[TokenDistribution(["x", "x"], [0.5, 0.5])])
    diags = validate_record(record)
    assert any(d.path.endswith("token_labels") for d in diags)


# --- property: random corpora survive the JSONL round trip ---

_text = st.text(max_size=20)


@st.composite
def _samples(draw):
    n_probs = draw(st.integers(1, 4))
    weights = draw(
        st.lists(st.floats(0.05, 1.0, allow_nan=False), min_size=n_probs, max_size=n_probs)
    )
    total = sum(weights)
    dists = None
    if draw(st.booleans()):
        dists = [
            TokenDistribution([f"t{i}" for i in range(n_probs)], [w / total for w in weights])
        ]
    return Sample(
        text=draw(_text),
        token_dists=dists,
        token_logprobs=draw(
            st.none() | st.lists(st.floats(-20.0, 0.0, allow_nan=False), min_size=1, max_size=3)
        ),
        embedding=draw(
            st.none() | st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=1, max_size=4)
        ),
        reasoning=draw(st.none() | _text),
        answer=draw(st.none() | _text),
        self_confidence=draw(st.none() | st.floats(0.0, 1.0, allow_nan=False)),
    )


@st.composite
def _records(draw, record_id):
    claims = draw(
        st.none()
        | st.lists(
            st.builds(
                Claim,
                key=st.text(min_size=1, max_size=8),
                value=st.one_of(_text, st.floats(-1e6, 1e6, allow_nan=False)),
                unit=st.none() | st.sampled_from(["%", "usd"]),
            ),
            max_size=2,
        )
    )
    gt = draw(
        st.none()
        | st.builds(
            GroundTruthLabel,
            is_hallucinated=st.just(True),
            failure_class=st.none() | st.sampled_from(["model", "context", "data"]),
            correct_answer=st.none() | _text,
        )
    )
    return GenerationRecord(
        id=record_id,
        prompt=draw(_text),
        samples=draw(st.lists(_samples(), min_size=1, max_size=3)),
        reference_claims=claims,
        ground_truth=gt,
    )


@settings(max_examples=50, deadline=None)
@given(data=st.data(), n=st.integers(1, 6))
def test_random_corpus_round_trips(data, n):
    corpus = [data.draw(_records(record_id=f"r{i}")) for i in range(n)]
    assert parse_records(write_records(corpus)) == corpus
