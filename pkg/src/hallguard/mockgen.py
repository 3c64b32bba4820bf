"""Seeded synthetic corpora with ground-truth labels for desk-scale verification.

Construction contract (what the acceptance suite leans on):

* Clean records emit agreeing samples whose stored token distribution is
  softmax(z), while the correct class is drawn from softmax(z / T_true), so a
  temperature fit over the corpus recovers T_true.  Their stored-distribution
  entropy is forced into [0.25, 0.70] nats, clear of the 0.9-nat router
  threshold, and every other signal stays quiet.
* Model-class injections emit near-uniform token distributions (entropy about
  ln V, well above 1.2 nats for V >= 4) and split their answers round-robin
  over three lexically disjoint variants, so consensus support stays <= 0.5.
* Context-class injections keep a unanimous answer but alternate between two
  vocabulary-disjoint reasoning templates, the flagged
  right-answer-wrong-reasoning shape.
* Data-class injections claim a value offset from the generated fact store by
  at least 5, so exact-tolerance checking always mismatches.

Injection severities sit well clear of the default router thresholds on
purpose: acceptance needs separation margin, not borderline flakiness.
Everything is deterministic in the seed; texts are templated, not realistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .grounding import FactEntry, FactStore
from .records import Claim, GenerationRecord, GroundTruthLabel, Sample, TokenDistribution

CLEAN_ENTROPY_LO = 0.25
CLEAN_ENTROPY_HI = 0.70

_INJECT_CLASSES = ("model", "context", "data")

_REASONING_BASE = "standard ledger lookup confirmed the filed figure"
_REASONING_SPLIT = (
    "income ratio threshold exceeded under clause four",
    "collateral margin policy applies beneath section nine",
)


@dataclass(frozen=True)
class MockSpec:
    """Parameters of one synthetic corpus draw."""

    n_records: int
    samples_per_record: int = 5
    true_temperature: float = 1.0
    inject_rates: Mapping[str, float] = field(default_factory=dict)
    vocab_size: int = 6
    seed: int = 0


def _validate_spec(spec: MockSpec) -> None:
    if spec.n_records < 1:
        raise ValueError("n_records must be >= 1")
    if spec.samples_per_record < 2:
        raise ValueError("samples_per_record must be >= 2 (consensus and semantic "
                         "entropy need multiple generations)")
    if spec.true_temperature <= 0.0:
        raise ValueError("true_temperature must be positive")
    if spec.vocab_size < 4:
        raise ValueError("vocab_size must be >= 4 so injected uniform entropy clears 1.2 nats")
    total = 0.0
    for cls, rate in spec.inject_rates.items():
        if cls not in _INJECT_CLASSES:
            raise ValueError(f"unknown failure class {cls!r}")
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"inject rate for {cls!r} must lie in [0, 1]")
        total += rate
    if total > 1.0 + 1e-12:
        raise ValueError("inject rates must sum to at most 1")


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _scale_into_entropy_band(z: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Rescale a logit vector so its softmax entropy lands in [lo, hi].

    Entropy of softmax(c * z) decreases continuously in c from ln V down to
    the support minimum, so a bracket-and-bisect always terminates.
    """
    if np.ptp(z) < 1e-9:  # constant vector cannot be sharpened
        z = z.copy()
        z[0] += 1.0
    h = _entropy(_softmax(z))
    if lo <= h <= hi:
        return z
    c_lo, c_hi = 1e-6, 1.0
    while c_hi < 1e6 and _entropy(_softmax(c_hi * z)) > hi:
        c_hi *= 2.0
    for _ in range(200):
        c = (c_lo + c_hi) / 2.0
        h = _entropy(_softmax(c * z))
        if lo <= h <= hi:
            return c * z
        if h > hi:
            c_lo = c
        else:
            c_hi = c
    return c * z


def _pick_class(u: float, rates: Mapping[str, float]) -> str | None:
    acc = 0.0
    for cls in _INJECT_CLASSES:
        acc += rates.get(cls, 0.0)
        if u < acc:
            return cls
    return None


def _build(spec: MockSpec) -> tuple[list[GenerationRecord], FactStore]:
    _validate_spec(spec)
    rng = np.random.default_rng(spec.seed)
    token_labels = [f"tok{j}" for j in range(spec.vocab_size)]
    n_samples = spec.samples_per_record

    records: list[GenerationRecord] = []
    store_entries: dict[str, FactEntry] = {}
    for i in range(spec.n_records):
        cls = _pick_class(float(rng.random()), spec.inject_rates)
        key = f"fact_{i:05d}"
        value = round(float(rng.uniform(10.0, 99.0)), 2)
        store_entries[key] = FactEntry(value=value)

        if cls == "model":
            z = rng.normal(0.0, 0.02, spec.vocab_size)  # near-uniform distribution
        else:
            z = _scale_into_entropy_band(
                rng.normal(0.0, 1.5, spec.vocab_size), CLEAN_ENTROPY_LO, CLEAN_ENTROPY_HI
            )
        probs = _softmax(z)
        probs = np.maximum(probs, 1e-12)  # keep every entry loggable for refits
        probs = probs / probs.sum()
        correct = int(rng.choice(spec.vocab_size, p=_softmax(z / spec.true_temperature)))
        dist = TokenDistribution(token_labels=list(token_labels), probs=[float(p) for p in probs])

        if cls == "model":
            variants = [f"{round(value + k + 1.0, 2)}" for k in range(3)]
            answers = [variants[j % 3] for j in range(n_samples)]
            confidence_base = 0.30 + 0.15 * float(rng.random())
        else:
            answers = [f"{value}"] * n_samples
            if cls is None:
                confidence_base = 0.75 + 0.20 * float(rng.random())
            else:
                confidence_base = 0.55 + 0.20 * float(rng.random())

        if cls == "context":
            reasonings = [_REASONING_SPLIT[j % 2] for j in range(n_samples)]
        else:
            reasonings = [_REASONING_BASE] * n_samples

        claim_value = value
        if cls == "data":
            claim_value = round(value + float(rng.uniform(5.0, 15.0)), 2)

        samples = [
            Sample(
                text=answers[j],
                token_dists=[dist],
                reasoning=reasonings[j],
                answer=answers[j],
                self_confidence=round(confidence_base, 4),
            )
            for j in range(n_samples)
        ]
        records.append(
            GenerationRecord(
                id=f"rec-{i:05d}",
                prompt=f"What is the reported value of {key}?",
                samples=samples,
                reference_claims=[Claim(key=key, value=claim_value)],
                ground_truth=GroundTruthLabel(
                    is_hallucinated=cls is not None,
                    failure_class=cls,
                    correct_answer=token_labels[correct],
                ),
            )
        )
    return records, FactStore(entries=store_entries)


def generate_corpus(spec: MockSpec) -> list[GenerationRecord]:
    """Deterministic labeled corpus; same seed, same bytes."""
    records, _ = _build(spec)
    return records


def generate_fact_store(spec: MockSpec) -> FactStore:
    """The reference store matching generate_corpus(spec): consistent with clean
    records' claims, contradicted by data-class injections."""
    _, store = _build(spec)
    return store


def mock_spec_from_json(obj: dict) -> MockSpec:
    """Build a MockSpec from a decoded JSON object (unknown keys rejected)."""
    known = {"n_records", "samples_per_record", "true_temperature", "inject_rates", "vocab_size", "seed"}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown mock spec fields: {sorted(unknown)}")
    if "n_records" not in obj:
        raise ValueError("mock spec requires n_records")
    kwargs = {k: obj[k] for k in known if k in obj}
    if "inject_rates" in kwargs:
        kwargs["inject_rates"] = dict(kwargs["inject_rates"])
    return MockSpec(**kwargs)
