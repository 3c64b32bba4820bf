"""Canonical data model for offline generation logs, plus the JSONL exchange format.

A corpus is UTF-8 JSONL, one record object per line:

    {"id": "...", "prompt": "...",
     "samples": [{"text": "...",
                  "token_dists": [{"labels": ["..."], "probs": [0.6, 0.4]}],
                  "token_logprobs": [-0.1, -2.3],
                  "embedding": [0.0, ...],
                  "reasoning": "...", "answer": "...",
                  "self_confidence": 0.8}],
     "reference_claims": [{"key": "...", "value": 5.0, "unit": "%"}],
     "ground_truth": {"is_hallucinated": true, "failure_class": "data",
                      "correct_answer": "..."}}

Optional fields are omitted when absent.  Unknown keys are preserved on
round-trip but carry no meaning.  Probabilities are stored as plain decimals,
log-probabilities in nats.  All types are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

FAILURE_CLASSES = ("model", "context", "data")

PROB_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Diagnostic:
    """One invariant violation: a field path and a human-readable reason."""

    path: str
    reason: str


class RecordParseError(ValueError):
    """Malformed JSONL input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class RecordValidationError(ValueError):
    """A parseable record violated a schema invariant."""

    def __init__(self, record_id: str, diagnostics: list[Diagnostic]):
        first = diagnostics[0]
        super().__init__(f"record {record_id!r}: {first.path}: {first.reason}")
        self.record_id = record_id
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class TokenDistribution:
    """Model probabilities over the vocabulary slice scored at one position."""

    token_labels: list[str]
    probs: list[float]
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Sample:
    """One sampled response. All per-token and introspection fields are optional."""

    text: str
    token_dists: list[TokenDistribution] | None = None
    token_logprobs: list[float] | None = None
    embedding: list[float] | None = None
    reasoning: str | None = None
    answer: str | None = None
    self_confidence: float | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Claim:
    key: str
    value: str | float
    unit: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GroundTruthLabel:
    """Evaluation-only label attached by mock corpora; never required at runtime."""

    is_hallucinated: bool
    failure_class: str | None = None
    correct_answer: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GenerationRecord:
    """One prompt with its N sampled responses and optional reference data."""

    id: str
    prompt: str
    samples: list[Sample]
    reference_claims: list[Claim] | None = None
    ground_truth: GroundTruthLabel | None = None
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Validation


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _validate_dist(dist: TokenDistribution, path: str, diags: list[Diagnostic]) -> None:
    if len(dist.token_labels) != len(dist.probs):
        diags.append(Diagnostic(f"{path}.probs", "length differs from token_labels"))
    for j, p in enumerate(dist.probs):
        if not _is_number(p) or not (0.0 <= p <= 1.0):
            diags.append(Diagnostic(f"{path}.probs[{j}]", "probability must lie in [0, 1]"))
    if dist.probs:
        total = sum(dist.probs)
        if not (1.0 - PROB_SUM_TOL <= total <= 1.0 + PROB_SUM_TOL):
            diags.append(Diagnostic(f"{path}.probs", f"probs sum to {total:.6g}, expected 1"))
    if len(set(dist.token_labels)) != len(dist.token_labels):
        diags.append(Diagnostic(f"{path}.token_labels", "token labels must be unique"))


def _validate_sample(sample: Sample, path: str, diags: list[Diagnostic]) -> None:
    if sample.token_dists is not None:
        if len(sample.token_dists) < 1:
            diags.append(Diagnostic(f"{path}.token_dists", "present but empty"))
        for j, dist in enumerate(sample.token_dists):
            _validate_dist(dist, f"{path}.token_dists[{j}]", diags)
    if sample.token_logprobs is not None:
        for j, lp in enumerate(sample.token_logprobs):
            if not _is_number(lp) or lp > 0.0:
                diags.append(Diagnostic(f"{path}.token_logprobs[{j}]", "log-probability must be <= 0"))
    if sample.self_confidence is not None:
        sc = sample.self_confidence
        if not _is_number(sc) or not (0.0 <= sc <= 1.0):
            diags.append(Diagnostic(f"{path}.self_confidence", "must lie in [0, 1]"))


def validate_record(record: GenerationRecord) -> list[Diagnostic]:
    """Return the (possibly empty) list of invariant violations for one record.

    Empty result means the record is valid.  Unknown keys under ``extra`` are
    never flagged.
    """
    diags: list[Diagnostic] = []
    if not record.id:
        diags.append(Diagnostic("id", "must be nonempty"))
    if not record.samples:
        diags.append(Diagnostic("samples", "must contain at least one sample"))
    for i, sample in enumerate(record.samples):
        _validate_sample(sample, f"samples[{i}]", diags)
    for i, claim in enumerate(record.reference_claims or []):
        if not claim.key:
            diags.append(Diagnostic(f"reference_claims[{i}].key", "must be nonempty"))
    gt = record.ground_truth
    if gt is not None:
        if gt.failure_class is not None and not gt.is_hallucinated:
            diags.append(Diagnostic("ground_truth.failure_class", "only allowed when is_hallucinated"))
        if gt.failure_class is not None and gt.failure_class not in FAILURE_CLASSES:
            diags.append(
                Diagnostic("ground_truth.failure_class", f"must be one of {FAILURE_CLASSES}")
            )
    return diags


# ---------------------------------------------------------------------------
# JSON conversion

_DIST_KEYS = ("labels", "probs")
_SAMPLE_KEYS = ("text", "token_dists", "token_logprobs", "embedding", "reasoning", "answer", "self_confidence")
_CLAIM_KEYS = ("key", "value", "unit")
_GT_KEYS = ("is_hallucinated", "failure_class", "correct_answer")
_RECORD_KEYS = ("id", "prompt", "samples", "reference_claims", "ground_truth")


def _shape_error(record_id: str, path: str, reason: str) -> RecordValidationError:
    return RecordValidationError(record_id, [Diagnostic(path, reason)])


def _extras(obj: dict, known: tuple[str, ...]) -> dict:
    return {k: v for k, v in obj.items() if k not in known}


def record_from_json(obj: dict) -> GenerationRecord:
    """Build a record from a decoded JSON object; raises on structural problems."""
    if not isinstance(obj, dict):
        raise _shape_error("<unknown>", "", "record must be a JSON object")
    rid = obj.get("id")
    rid_str = rid if isinstance(rid, str) else "<unknown>"
    if not isinstance(rid, str):
        raise _shape_error(rid_str, "id", "must be a string")
    prompt = obj.get("prompt")
    if not isinstance(prompt, str):
        raise _shape_error(rid_str, "prompt", "must be a string")
    raw_samples = obj.get("samples")
    if not isinstance(raw_samples, list):
        raise _shape_error(rid_str, "samples", "must be a list")

    samples = [_sample_from_json(s, f"samples[{i}]", rid_str) for i, s in enumerate(raw_samples)]

    claims = None
    if obj.get("reference_claims") is not None:
        raw = obj["reference_claims"]
        if not isinstance(raw, list):
            raise _shape_error(rid_str, "reference_claims", "must be a list")
        claims = [_claim_from_json(c, f"reference_claims[{i}]", rid_str) for i, c in enumerate(raw)]

    gt = None
    if obj.get("ground_truth") is not None:
        gt = _gt_from_json(obj["ground_truth"], rid_str)

    return GenerationRecord(
        id=rid,
        prompt=prompt,
        samples=samples,
        reference_claims=claims,
        ground_truth=gt,
        extra=_extras(obj, _RECORD_KEYS),
    )


def _sample_from_json(obj, path: str, rid: str) -> Sample:
    if not isinstance(obj, dict):
        raise _shape_error(rid, path, "sample must be a JSON object")
    text = obj.get("text")
    if not isinstance(text, str):
        raise _shape_error(rid, f"{path}.text", "must be a string")
    dists = None
    if obj.get("token_dists") is not None:
        raw = obj["token_dists"]
        if not isinstance(raw, list):
            raise _shape_error(rid, f"{path}.token_dists", "must be a list")
        dists = []
        for j, d in enumerate(raw):
            if not isinstance(d, dict) or not isinstance(d.get("labels"), list) or not isinstance(d.get("probs"), list):
                raise _shape_error(rid, f"{path}.token_dists[{j}]", "must be an object with labels[] and probs[]")
            dists.append(
                TokenDistribution(
                    token_labels=list(d["labels"]),
                    probs=list(d["probs"]),
                    extra=_extras(d, _DIST_KEYS),
                )
            )
    return Sample(
        text=text,
        token_dists=dists,
        token_logprobs=list(obj["token_logprobs"]) if obj.get("token_logprobs") is not None else None,
        embedding=list(obj["embedding"]) if obj.get("embedding") is not None else None,
        reasoning=obj.get("reasoning"),
        answer=obj.get("answer"),
        self_confidence=obj.get("self_confidence"),
        extra=_extras(obj, _SAMPLE_KEYS),
    )


def _claim_from_json(obj, path: str, rid: str) -> Claim:
    if not isinstance(obj, dict) or "key" not in obj or "value" not in obj:
        raise _shape_error(rid, path, "claim must be an object with key and value")
    return Claim(
        key=obj["key"],
        value=obj["value"],
        unit=obj.get("unit"),
        extra=_extras(obj, _CLAIM_KEYS),
    )


def _gt_from_json(obj, rid: str) -> GroundTruthLabel:
    if not isinstance(obj, dict) or not isinstance(obj.get("is_hallucinated"), bool):
        raise _shape_error(rid, "ground_truth", "must be an object with boolean is_hallucinated")
    return GroundTruthLabel(
        is_hallucinated=obj["is_hallucinated"],
        failure_class=obj.get("failure_class"),
        correct_answer=obj.get("correct_answer"),
        extra=_extras(obj, _GT_KEYS),
    )


def record_to_json(record: GenerationRecord) -> dict:
    """Encode a record as a JSON-ready dict, omitting absent optional fields."""
    out: dict = {"id": record.id, "prompt": record.prompt}
    out["samples"] = [_sample_to_json(s) for s in record.samples]
    if record.reference_claims is not None:
        out["reference_claims"] = [_claim_to_json(c) for c in record.reference_claims]
    if record.ground_truth is not None:
        out["ground_truth"] = _gt_to_json(record.ground_truth)
    out.update(record.extra)
    return out


def _sample_to_json(sample: Sample) -> dict:
    out: dict = {"text": sample.text}
    if sample.token_dists is not None:
        out["token_dists"] = [
            {"labels": d.token_labels, "probs": d.probs, **d.extra} for d in sample.token_dists
        ]
    if sample.token_logprobs is not None:
        out["token_logprobs"] = sample.token_logprobs
    if sample.embedding is not None:
        out["embedding"] = sample.embedding
    if sample.reasoning is not None:
        out["reasoning"] = sample.reasoning
    if sample.answer is not None:
        out["answer"] = sample.answer
    if sample.self_confidence is not None:
        out["self_confidence"] = sample.self_confidence
    out.update(sample.extra)
    return out


def _claim_to_json(claim: Claim) -> dict:
    out: dict = {"key": claim.key, "value": claim.value}
    if claim.unit is not None:
        out["unit"] = claim.unit
    out.update(claim.extra)
    return out


def _gt_to_json(gt: GroundTruthLabel) -> dict:
    out: dict = {"is_hallucinated": gt.is_hallucinated}
    if gt.failure_class is not None:
        out["failure_class"] = gt.failure_class
    if gt.correct_answer is not None:
        out["correct_answer"] = gt.correct_answer
    out.update(gt.extra)
    return out


# ---------------------------------------------------------------------------
# JSONL I/O


def parse_records(stream) -> list[GenerationRecord]:
    """Parse a UTF-8 JSONL byte stream (bytes, str, or file-like) into records.

    Records are returned in input order and every one is validated; the first
    malformed line raises RecordParseError with its line number, the first
    invariant violation raises RecordValidationError naming the field and
    record id.  Duplicate ids within the stream are rejected.
    """
    if hasattr(stream, "read"):
        stream = stream.read()
    if isinstance(stream, bytes):
        try:
            text = stream.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RecordParseError(0, f"input is not valid UTF-8: {exc}") from exc
    else:
        text = stream

    records: list[GenerationRecord] = []
    seen_ids: set[str] = set()
    # split on \n only: JSON strings may legally contain raw U+2028/U+2029,
    # which str.splitlines would treat as record boundaries
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordParseError(line_no, exc.msg) from exc
        record = record_from_json(obj)
        diags = validate_record(record)
        if record.id in seen_ids:
            diags.insert(0, Diagnostic("id", "duplicate id in corpus"))
        if diags:
            raise RecordValidationError(record.id, diags)
        seen_ids.add(record.id)
        records.append(record)
    return records


def write_records(records: list[GenerationRecord]) -> bytes:
    """Serialize records to JSONL bytes; parse_records(write_records(x)) == x."""
    lines = [json.dumps(record_to_json(r)) for r in records]
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")
