"""The tiered detect -> route -> mitigate -> validate -> refine cycle.

Detection computes every signal whose inputs a record actually carries;
gaps become absent signals, never errors.  An ordered rule list routes each
signal bundle to a root-cause tier (model / context / data) with recommended
mitigations.  The cycle itself never calls a model: mitigation is advisory,
and validation compares against a re-generated record supplied in the corpus
under the ``<id>.retry`` convention.  Everything lands in a ledger whose
per-tier counts and residual errors are the refinement artifact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .consistency import (
    FLAG_ANSWER_SUPPORT,
    FLAG_MI_MAX,
    FLAG_REASONING_ENTROPY,
    RaceReport,
    race_metrics,
    self_consistency_consensus,
)
from .errors import CapabilityError, ConfigError
from .grounding import STATUS_MISMATCH, ClaimVerdict, FactStore, check_claims
from .records import GenerationRecord
from .semantic import DEFAULT_CLUSTER_THRESHOLD, default_embed, semantic_entropy_of_record
from .uncertainty import parse_self_declared_confidence, sequence_entropy_profile

TIERS = ("model", "context", "data")
COMPARATORS = ("<", "<=", ">", ">=")

RETRY_SUFFIX = ".retry"

EXTERNAL_SIGNAL_PREFIX = "external."
KNOWN_SIGNALS = (
    "h_p_mean",
    "h_s",
    "consensus_support",
    "self_confidence",
    "race_flag",
    "race_h_reasoning",
    "race_mutual_information",
    "fact_mismatches",
)

# Which detection families need ground truth, and what they are for.  Labels
# only; detect() relies on input availability, not on this table.
GROUND_TRUTH_DEPENDENCIES = {
    "uncertainty_estimation": {
        "ground_truth_required": "no (except calibration)",
        "primary_use": "real-time screening; periodic calibration against labels",
    },
    "internal_state_monitoring": {
        "ground_truth_required": "no",
        "primary_use": "real-time detection when model internals are accessible",
    },
    "contextual_fact_checking": {
        "ground_truth_required": "partial (reference store or retrieved documents)",
        "primary_use": "retrieval-grounded and document-grounded tasks",
    },
    "intrinsic_consistency": {
        "ground_truth_required": "no",
        "primary_use": "real-time reasoning stability checks",
    },
    "reasoning_answer_consistency": {
        "ground_truth_required": "yes (reference reasoning traces for evaluation)",
        "primary_use": "high-stakes reasoning and compliance review",
    },
}


@dataclass(frozen=True)
class DetectionSignals:
    """Per-record bundle of detection metric values; absent means uncomputable."""

    record_id: str
    h_p_mean: float | None = None
    h_s: float | None = None
    consensus_support: float | None = None
    self_confidence: float | None = None
    race: RaceReport | None = None
    fact_verdicts: list[ClaimVerdict] | None = None
    external_signals: dict[str, float] | None = None


@dataclass(frozen=True)
class RouterRule:
    """One threshold comparison over one signal, mapped to a tier."""

    name: str
    signal: str
    comparator: str
    threshold: float
    tier: str
    recommended_mitigations: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ValidationRecord:
    before: DetectionSignals
    after: DetectionSignals
    improved: bool


@dataclass(frozen=True)
class ValidationResult:
    improved: bool
    deltas: dict[str, float]


@dataclass(frozen=True)
class TierVerdict:
    """Routed outcome; tier is None when no rule fired (a pass)."""

    record_id: str
    fired_rules: list[str]
    tier: str | None
    recommendations: list[str]
    validation: ValidationRecord | None = None


@dataclass(frozen=True)
class LedgerEntry:
    record_id: str
    signals: DetectionSignals
    verdict: TierVerdict
    action_taken: str
    outcome: str
    timestamp: float


@dataclass(frozen=True)
class CycleLedger:
    entries: list[LedgerEntry]
    summary: dict[str, int]


def default_rules() -> list[RouterRule]:
    """Shipped rule set; order is priority.  Thresholds are tuned against the
    mock-corpus separation margins, they are not empirical claims."""
    return [
        RouterRule("high_token_entropy", "h_p_mean", ">", 0.9, "model",
                   ["temperature_calibration", "sampling_filter"]),
        RouterRule("high_semantic_entropy", "h_s", ">", 0.45, "model",
                   ["sampling_filter", "ensemble_agreement"]),
        RouterRule("low_consensus", "consensus_support", "<", 0.6, "model",
                   ["ensemble_agreement", "sampling_filter"]),
        RouterRule("reasoning_divergence", "race_flag", ">=", 0.5, "context",
                   ["prompt_optimization", "instruction_reweighting"]),
        RouterRule("low_prompt_similarity", "external.prompt_similarity", "<", 0.5, "context",
                   ["context_summarization", "prompt_optimization"]),
        RouterRule("fact_mismatch", "fact_mismatches", ">=", 1.0, "data",
                   ["grounding_refresh", "verified_fine_tuning"]),
    ]


@dataclass
class PipelineConfig:
    """Knobs for detection, flag thresholds, fact tolerances, and validation."""

    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD
    flag_answer_support: float = FLAG_ANSWER_SUPPORT
    flag_reasoning_entropy: float = FLAG_REASONING_ENTROPY
    flag_mi_max: float = FLAG_MI_MAX
    fact_rel_tol: float = 0.0
    fact_abs_tol: float = 0.0
    min_delta: float = 0.05
    rules: list[RouterRule] = field(default_factory=default_rules)


def detect(record: GenerationRecord, config: PipelineConfig | None = None,
           store: FactStore | None = None) -> DetectionSignals:
    """Screen one record, computing every metric whose inputs are available.

    Missing inputs (no token distributions, a single sample, no reasoning
    traces, no fact store) yield absent signals rather than errors.
    """
    config = config or PipelineConfig()

    h_p_mean = None
    sample_means = []
    for sample in record.samples:
        if sample.token_dists:
            sample_means.append(sequence_entropy_profile(sample).mean)
    if sample_means:
        h_p_mean = float(np.mean(sample_means))

    h_s = None
    consensus_support = None
    if len(record.samples) >= 2:
        h_s = semantic_entropy_of_record(record, threshold=config.cluster_threshold).entropy
        consensus_support = self_consistency_consensus(
            record, threshold=config.cluster_threshold
        ).support

    confidences = []
    for sample in record.samples:
        value = sample.self_confidence
        if value is None:
            value = parse_self_declared_confidence(sample.text)
        if value is not None:
            confidences.append(value)
    self_confidence = float(np.mean(confidences)) if confidences else None

    race = None
    try:
        race = race_metrics(
            record,
            cluster_threshold=config.cluster_threshold,
            flag_answer_support=config.flag_answer_support,
            flag_reasoning_entropy=config.flag_reasoning_entropy,
            flag_mi_max=config.flag_mi_max,
        )
    except CapabilityError:
        pass

    fact_verdicts = None
    if record.reference_claims and store is not None:
        fact_verdicts = check_claims(
            record.reference_claims, store, config.fact_rel_tol, config.fact_abs_tol
        )

    return DetectionSignals(
        record_id=record.id,
        h_p_mean=h_p_mean,
        h_s=h_s,
        consensus_support=consensus_support,
        self_confidence=self_confidence,
        race=race,
        fact_verdicts=fact_verdicts,
    )


def signal_value(signals: DetectionSignals, signal_id: str) -> float | None:
    """Resolve one routable signal to a float; None when absent."""
    if signal_id.startswith(EXTERNAL_SIGNAL_PREFIX):
        if signals.external_signals is None:
            return None
        return signals.external_signals.get(signal_id[len(EXTERNAL_SIGNAL_PREFIX):])
    if signal_id == "h_p_mean":
        return signals.h_p_mean
    if signal_id == "h_s":
        return signals.h_s
    if signal_id == "consensus_support":
        return signals.consensus_support
    if signal_id == "self_confidence":
        return signals.self_confidence
    if signal_id == "race_flag":
        if signals.race is None:
            return None
        return 1.0 if signals.race.flag_right_answer_wrong_reasoning else 0.0
    if signal_id == "race_h_reasoning":
        return signals.race.h_reasoning if signals.race is not None else None
    if signal_id == "race_mutual_information":
        return signals.race.mutual_information if signals.race is not None else None
    if signal_id == "fact_mismatches":
        if signals.fact_verdicts is None:
            return None
        return float(sum(1 for v in signals.fact_verdicts if v.status == STATUS_MISMATCH))
    return None


def _compare(value: float, comparator: str, threshold: float) -> bool:
    if comparator == "<":
        return value < threshold
    if comparator == "<=":
        return value <= threshold
    if comparator == ">":
        return value > threshold
    if comparator == ">=":
        return value >= threshold
    raise ConfigError(f"unknown comparator {comparator!r}")


def _fires(rule: RouterRule, signals: DetectionSignals) -> bool:
    value = signal_value(signals, rule.signal)
    return value is not None and _compare(value, rule.comparator, rule.threshold)


def route(signals: DetectionSignals, rules: list[RouterRule]) -> TierVerdict:
    """Evaluate rules in order; the first fired rule's tier wins.

    Recommendations are the deduplicated concatenation of fired rules'
    mitigation lists in rule order.  Absent signals never fire.
    """
    fired = [rule for rule in rules if _fires(rule, signals)]
    recommendations: list[str] = []
    for rule in fired:
        for mitigation in rule.recommended_mitigations:
            if mitigation not in recommendations:
                recommendations.append(mitigation)
    return TierVerdict(
        record_id=signals.record_id,
        fired_rules=[rule.name for rule in fired],
        tier=fired[0].tier if fired else None,
        recommendations=recommendations,
    )


def validate(before: DetectionSignals, after: DetectionSignals,
             config: PipelineConfig) -> ValidationResult:
    """Re-evaluate the signals that fired before mitigation.

    Improved means every previously firing signal now sits on the passing
    side of its threshold, or moved in the passing direction by at least
    min_delta.  An unchanged bundle is never an improvement.
    """
    if before.record_id != after.record_id:
        raise ValueError(
            f"record id mismatch: {before.record_id!r} vs {after.record_id!r}"
        )
    deltas: dict[str, float] = {}
    verdicts: list[bool] = []
    for rule in config.rules:
        if not _fires(rule, before):
            continue
        b = signal_value(before, rule.signal)
        a = signal_value(after, rule.signal)
        if a is None:
            verdicts.append(False)
            continue
        deltas[rule.signal] = a - b
        if rule.comparator in (">", ">="):
            crossed = a < rule.threshold
            gain = b - a
        else:
            crossed = a > rule.threshold
            gain = a - b
        verdicts.append(crossed or (gain > 0.0 and gain >= config.min_delta))
    return ValidationResult(improved=all(verdicts), deltas=deltas)


def run_cycle(records: list[GenerationRecord], config: PipelineConfig | None = None,
              store: FactStore | None = None, rules: list[RouterRule] | None = None,
              clock=time.time) -> CycleLedger:
    """Run detect -> route -> validate over a corpus and assemble the ledger.

    A record whose id is ``<base>.retry`` (with ``<base>`` present) is treated
    as the post-mitigation re-generation of its base record: the base is
    validated against it instead of being flagged for external mitigation.
    """
    config = config or PipelineConfig()
    if rules is not None:
        config = replace(config, rules=rules)
    rule_set = config.rules

    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate record ids in corpus")
    id_set = set(ids)
    retries = {
        r.id[: -len(RETRY_SUFFIX)]: r
        for r in records
        if r.id.endswith(RETRY_SUFFIX) and r.id[: -len(RETRY_SUFFIX)] in id_set
    }
    primaries = [
        r for r in records
        if not (r.id.endswith(RETRY_SUFFIX) and r.id[: -len(RETRY_SUFFIX)] in id_set)
    ]

    entries: list[LedgerEntry] = []
    counts = {"pass": 0, "model": 0, "context": 0, "data": 0}
    residuals = 0
    for rec in primaries:
        signals = detect(rec, config, store)
        verdict = route(signals, rule_set)
        if verdict.tier is None:
            action, outcome = "none", "pass"
        else:
            retry = retries.get(rec.id)
            if retry is None:
                action, outcome = "flagged_for_external_mitigation", "pending"
            else:
                after = replace(detect(retry, config, store), record_id=rec.id)
                result = validate(signals, after, config)
                verdict = replace(
                    verdict,
                    validation=ValidationRecord(before=signals, after=after, improved=result.improved),
                )
                action = "validated_retry"
                outcome = "improved" if result.improved else "not_improved"
                if not result.improved:
                    residuals += 1
        counts[verdict.tier or "pass"] += 1
        entries.append(LedgerEntry(rec.id, signals, verdict, action, outcome, clock()))

    total = len(primaries)
    summary = {
        "total": total,
        "pass": counts["pass"],
        "model": counts["model"],
        "context": counts["context"],
        "data": counts["data"],
        "tiered": total - counts["pass"],
        "residuals": residuals,
    }
    return CycleLedger(entries=entries, summary=summary)


# ---------------------------------------------------------------------------
# Rules file I/O

_RULE_KEYS = ("name", "signal", "comparator", "threshold", "tier", "recommended_mitigations")


def _known_signal(signal: str) -> bool:
    return signal in KNOWN_SIGNALS or signal.startswith(EXTERNAL_SIGNAL_PREFIX)


def load_rules(obj) -> list[RouterRule]:
    """Validate and load a rules list from decoded JSON; errors name the rule."""
    if not isinstance(obj, list):
        raise ConfigError("rules file must be a JSON list")
    rules = []
    for i, raw in enumerate(obj):
        if not isinstance(raw, dict):
            raise ConfigError(f"rule #{i} must be an object")
        name = raw.get("name") or f"rule #{i}"
        signal = raw.get("signal")
        if not isinstance(signal, str) or not _known_signal(signal):
            raise ConfigError(f"rule {name!r}: unknown signal {signal!r}")
        comparator = raw.get("comparator")
        if comparator not in COMPARATORS:
            raise ConfigError(f"rule {name!r}: comparator must be one of {COMPARATORS}")
        threshold = raw.get("threshold")
        if not isinstance(threshold, (int, float)) or isinstance(threshold, bool) or not np.isfinite(threshold):
            raise ConfigError(f"rule {name!r}: threshold must be a finite number")
        tier = raw.get("tier")
        if tier not in TIERS:
            raise ConfigError(f"rule {name!r}: tier must be one of {TIERS}")
        mitigations = raw.get("recommended_mitigations", [])
        if not isinstance(mitigations, list) or not all(isinstance(m, str) for m in mitigations):
            raise ConfigError(f"rule {name!r}: recommended_mitigations must be a list of strings")
        rules.append(RouterRule(str(raw.get("name", name)), signal, comparator,
                                float(threshold), tier, list(mitigations)))
    return rules


def rules_to_json(rules: list[RouterRule]) -> list[dict]:
    return [
        {
            "name": r.name,
            "signal": r.signal,
            "comparator": r.comparator,
            "threshold": r.threshold,
            "tier": r.tier,
            "recommended_mitigations": r.recommended_mitigations,
        }
        for r in rules
    ]


# ---------------------------------------------------------------------------
# Report serialization


def race_to_json(race: RaceReport) -> dict:
    return {
        "h_reasoning": race.h_reasoning,
        "h_answer": race.h_answer,
        "h_joint": race.h_joint,
        "mutual_information": race.mutual_information,
        "mutual_information_raw": race.mutual_information_raw,
        "flag_right_answer_wrong_reasoning": race.flag_right_answer_wrong_reasoning,
    }


def signals_to_json(signals: DetectionSignals) -> dict:
    return {
        "record_id": signals.record_id,
        "h_p_mean": signals.h_p_mean,
        "h_s": signals.h_s,
        "consensus_support": signals.consensus_support,
        "self_confidence": signals.self_confidence,
        "race": race_to_json(signals.race) if signals.race is not None else None,
        "fact_verdicts": (
            [
                {"key": v.key, "claimed": v.claimed, "reference": v.reference, "status": v.status}
                for v in signals.fact_verdicts
            ]
            if signals.fact_verdicts is not None
            else None
        ),
        "external_signals": signals.external_signals,
    }


def verdict_to_json(verdict: TierVerdict) -> dict:
    out: dict = {
        "record_id": verdict.record_id,
        "fired_rules": verdict.fired_rules,
        "tier": verdict.tier,
        "recommendations": verdict.recommendations,
    }
    if verdict.validation is not None:
        out["validation"] = {
            "before": signals_to_json(verdict.validation.before),
            "after": signals_to_json(verdict.validation.after),
            "improved": verdict.validation.improved,
        }
    return out


def ledger_to_json(ledger: CycleLedger) -> dict:
    return {
        "entries": [
            {
                "record_id": e.record_id,
                "signals": signals_to_json(e.signals),
                "verdict": verdict_to_json(e.verdict),
                "action_taken": e.action_taken,
                "outcome": e.outcome,
                "timestamp": e.timestamp,
            }
            for e in ledger.entries
        ],
        "summary": ledger.summary,
    }


def ledger_to_markdown(ledger: CycleLedger) -> str:
    s = ledger.summary
    lines = [
        "# Cycle ledger",
        "",
        "| tier | records |",
        "| --- | --- |",
        f"| pass | {s['pass']} |",
        f"| model | {s['model']} |",
        f"| context | {s['context']} |",
        f"| data | {s['data']} |",
        "",
        f"Total: {s['total']}  Tiered: {s['tiered']}  Residual errors: {s['residuals']}",
        "",
    ]
    flagged = [e for e in ledger.entries if e.verdict.tier is not None]
    if flagged:
        lines.append("## Routed records")
        lines.append("")
        lines.append("| record | tier | fired rules | outcome |")
        lines.append("| --- | --- | --- | --- |")
        for e in flagged:
            lines.append(
                f"| {e.record_id} | {e.verdict.tier} | {', '.join(e.verdict.fired_rules)} | {e.outcome} |"
            )
        lines.append("")
    return "\n".join(lines)


