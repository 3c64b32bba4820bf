"""Self-agreement estimators: consensus voting, cross-paraphrase consistency,
and the joint reasoning/answer decomposition.

The reasoning/answer report decomposes the joint uncertainty of reasoning
traces R and final answers A for one question into

    H(R, A) = H(R) + H(A) - I(R, A)

where each entropy is the plug-in estimate over semantic-cluster masses and
the joint term comes from the (reasoning-cluster, answer-cluster) contingency
table.  The decomposition surfaces the right-answer-wrong-reasoning failure:
unanimous answers (high consensus support) reached through scattered
reasoning (high H(R)) that carries no information about the answer (low I).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import CapabilityError
from .records import GenerationRecord
from .semantic import DEFAULT_CLUSTER_THRESHOLD, cluster_embeddings, default_embed
from .uncertainty import entropy_nats

FLAG_ANSWER_SUPPORT = 0.8
FLAG_REASONING_ENTROPY = 0.5
FLAG_MI_MAX = 0.2


@dataclass(frozen=True)
class ConsensusResult:
    """Majority outcome over sampled answers; support is the winning mass."""

    consensus_answer: str
    support: float
    dissenters: list[int]


@dataclass(frozen=True)
class ConsistencyReport:
    """Agreement across paraphrase variants of one underlying query."""

    agreement: float
    contradictions: list[tuple[str, str]]


@dataclass(frozen=True)
class RaceReport:
    """Joint reasoning/answer uncertainty decomposition for one record.

    mutual_information is clamped at zero for reporting; the raw plug-in
    value (which can go very slightly negative from rounding) is retained in
    mutual_information_raw.
    """

    h_reasoning: float
    h_answer: float
    h_joint: float
    mutual_information: float
    mutual_information_raw: float
    flag_right_answer_wrong_reasoning: bool


def _sample_answers(record: GenerationRecord) -> list[str]:
    return [s.answer if s.answer is not None else s.text for s in record.samples]


def self_consistency_consensus(
    record: GenerationRecord,
    embed_fn=default_embed,
    threshold: float = DEFAULT_CLUSTER_THRESHOLD,
) -> ConsensusResult:
    """Cluster the sampled answers and select the most frequent result.

    Mass ties break toward the lexicographically smallest representative
    answer text.  Dissenters are the sample indices outside the winning
    cluster.
    """
    if len(record.samples) < 2:
        raise CapabilityError("consensus requires multiple generations")
    answers = _sample_answers(record)
    assignment = cluster_embeddings([embed_fn(a) for a in answers], threshold)
    best_mass = max(assignment.cluster_masses)
    tied = [k for k, m in enumerate(assignment.cluster_masses) if m == best_mass]
    winner = min(tied, key=lambda k: answers[assignment.representatives[k]])
    return ConsensusResult(
        consensus_answer=answers[assignment.representatives[winner]],
        support=assignment.cluster_masses[winner],
        dissenters=[i for i, c in enumerate(assignment.cluster_of_sample) if c != winner],
    )


def intrinsic_consistency(
    records: list[GenerationRecord],
    embed_fn=default_embed,
    threshold: float = DEFAULT_CLUSTER_THRESHOLD,
) -> ConsistencyReport:
    """Check a model against itself across paraphrases of the same query.

    Each record is reduced to one answer (its own consensus when it has
    several samples); agreement is the largest answer-cluster mass over
    records and every cross-cluster record pair is reported as a
    contradiction.
    """
    if len(records) < 2:
        raise CapabilityError("intrinsic consistency requires multiple query variants")
    answers = []
    for rec in records:
        if len(rec.samples) >= 2:
            answers.append(self_consistency_consensus(rec, embed_fn, threshold).consensus_answer)
        else:
            sample = rec.samples[0]
            answers.append(sample.answer if sample.answer is not None else sample.text)
    assignment = cluster_embeddings([embed_fn(a) for a in answers], threshold)
    contradictions = [
        (records[i].id, records[j].id)
        for i in range(len(records))
        for j in range(i + 1, len(records))
        if assignment.cluster_of_sample[i] != assignment.cluster_of_sample[j]
    ]
    return ConsistencyReport(agreement=max(assignment.cluster_masses), contradictions=contradictions)


def race_metrics(
    record: GenerationRecord,
    embed_fn=default_embed,
    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD,
    flag_answer_support: float = FLAG_ANSWER_SUPPORT,
    flag_reasoning_entropy: float = FLAG_REASONING_ENTROPY,
    flag_mi_max: float = FLAG_MI_MAX,
) -> RaceReport:
    """Joint reasoning/answer decomposition over one record's samples.

    Every sample must carry both a reasoning trace and an answer.  The
    right-answer-wrong-reasoning flag fires when answer consensus support,
    reasoning entropy, and (clamped) mutual information all cross their
    thresholds.
    """
    if len(record.samples) < 2:
        raise CapabilityError("reasoning/answer decomposition requires multiple generations")
    if any(s.reasoning is None or s.answer is None for s in record.samples):
        raise CapabilityError("every sample needs both a reasoning trace and an answer")

    reasonings = [s.reasoning for s in record.samples]
    answers = [s.answer for s in record.samples]
    r_assign = cluster_embeddings([embed_fn(r) for r in reasonings], cluster_threshold)
    a_assign = cluster_embeddings([embed_fn(a) for a in answers], cluster_threshold)

    h_r = entropy_nats(r_assign.cluster_masses)
    h_a = entropy_nats(a_assign.cluster_masses)
    n = len(record.samples)
    joint = Counter(zip(r_assign.cluster_of_sample, a_assign.cluster_of_sample))
    h_joint = entropy_nats([c / n for c in joint.values()])

    mi_raw = h_r + h_a - h_joint
    mi = max(0.0, mi_raw)
    support = max(a_assign.cluster_masses)
    flag = (
        support >= flag_answer_support
        and h_r >= flag_reasoning_entropy
        and mi <= flag_mi_max
    )
    return RaceReport(
        h_reasoning=h_r,
        h_answer=h_a,
        h_joint=h_joint,
        mutual_information=mi,
        mutual_information_raw=mi_raw,
        flag_right_answer_wrong_reasoning=flag,
    )
