"""Calibration measurement and post-hoc calibrators.

Measurement: expected calibration error over equal-width confidence bins.
Correction: scalar temperature scaling fitted by NLL minimization, isotonic
regression via pool-adjacent-violators, credible-across-passes aggregation of
probability samples, and self-evaluation vote pooling.

Fitted calibrators serialize to a small JSON map (see calibration_map_to_json)
so the CLI can persist and reload them.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError
from .records import GenerationRecord

TEMPERATURE_MIN = 0.05
TEMPERATURE_MAX = 20.0
TEMPERATURE_TOL = 1e-4
DEFAULT_ECE_BINS = 10

VOTE_VALUES = ("yes", "no", "unsure")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class FitError(ValueError):
    """The calibration fit problem is degenerate."""


@dataclass(frozen=True)
class BinTable:
    """Per-bin counts, empirical accuracy, and mean confidence.

    Edges partition [0, 1]; bins are right-open except the last.  Accuracy
    and confidence of an empty bin are reported as 0 with count 0.
    """

    edges: list[float]
    counts: list[int]
    accuracies: list[float]
    confidences: list[float]


@dataclass(frozen=True)
class EceResult:
    ece: float
    bin_table: BinTable


@dataclass(frozen=True)
class TemperatureModel:
    """A single fitted scalar; divide logits by T before softmax."""

    T: float
    fit_nll: float
    n_fit: int


@dataclass(frozen=True)
class IsotonicModel:
    """Monotone step function mapping raw scores to calibrated probabilities.

    breakpoints are the distinct training scores in increasing order; values
    are the fitted (non-decreasing) block values aligned with them.
    """

    breakpoints: list[float]
    values: list[float]


@dataclass(frozen=True)
class CredibleSummary:
    mean: float
    lower: float
    upper: float
    level: float


def compute_ece(pairs, M: int = DEFAULT_ECE_BINS) -> EceResult:
    """Expected calibration error of (confidence, correct) pairs over M bins.

    Args:
        pairs: iterable of (confidence in [0, 1], correct as bool).
        M: number of equal-width bins.

    Returns:
        EceResult with the weighted mean absolute accuracy/confidence gap and
        the underlying bin table.  Empty bins contribute zero.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("at least one (confidence, correct) pair required")
    if M < 1:
        raise ValueError("bin count must be >= 1")
    conf = np.asarray([p[0] for p in pairs], dtype=float)
    correct = np.asarray([1.0 if p[1] else 0.0 for p in pairs], dtype=float)
    if np.any((conf < 0.0) | (conf > 1.0)):
        raise ValueError("confidences must lie in [0, 1]")

    n = len(pairs)
    idx = np.minimum((conf * M).astype(int), M - 1)  # last bin closed on the right
    counts, accs, confs = [], [], []
    ece = 0.0
    for m in range(M):
        mask = idx == m
        c = int(mask.sum())
        counts.append(c)
        if c == 0:
            accs.append(0.0)
            confs.append(0.0)
            continue
        acc = float(correct[mask].mean())
        avg_conf = float(conf[mask].mean())
        accs.append(acc)
        confs.append(avg_conf)
        ece += (c / n) * abs(acc - avg_conf)
    edges = [m / M for m in range(M + 1)]
    return EceResult(ece=ece, bin_table=BinTable(edges, counts, accs, confs))


def _mean_nll(logits: np.ndarray, labels: np.ndarray, T: float) -> float:
    z = logits / T
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    return float((log_norm - z[np.arange(len(labels)), labels]).mean())


def fit_temperature(
    logit_sets,
    true_labels,
    t_min: float = TEMPERATURE_MIN,
    t_max: float = TEMPERATURE_MAX,
    tol: float = TEMPERATURE_TOL,
) -> TemperatureModel:
    """Fit the scaling temperature by minimizing mean NLL on a validation set.

    Golden-section search runs on ln T within [t_min, t_max] down to an
    absolute bracket width of tol in T.  The fit never returns a temperature
    worse than T=1 on the fit set.
    """
    logits = np.asarray(logit_sets, dtype=float)
    labels = np.asarray(true_labels, dtype=int)
    if logits.ndim != 2:
        raise ValueError("logit sets must share one dimension")
    if len(logits) != len(labels):
        raise ValueError("logit sets and labels must align")
    if len(logits) < 2:
        raise ValueError("at least two examples required")
    if np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise ValueError("labels must index into the logit vectors")
    if np.all(np.ptp(logits, axis=1) < 1e-12):
        raise FitError("all logit vectors are constant; temperature is unidentifiable")

    a, b = math.log(t_min), math.log(t_max)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = _mean_nll(logits, labels, math.exp(c))
    fd = _mean_nll(logits, labels, math.exp(d))
    for _ in range(500):
        if math.exp(b) - math.exp(a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _mean_nll(logits, labels, math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _mean_nll(logits, labels, math.exp(d))
    t_star = math.exp((a + b) / 2.0)

    best_t, best_nll = t_star, _mean_nll(logits, labels, t_star)
    if t_min <= 1.0 <= t_max:  # guarantee NLL(T*) <= NLL(1)
        nll_one = _mean_nll(logits, labels, 1.0)
        if nll_one < best_nll:
            best_t, best_nll = 1.0, nll_one
    return TemperatureModel(T=best_t, fit_nll=best_nll, n_fit=len(labels))


def apply_temperature(logits, T: float) -> np.ndarray:
    """softmax(z / T), computed with max-subtraction for stability."""
    if T <= 0.0:
        raise ValueError("temperature must be positive")
    z = np.asarray(logits, dtype=float) / T
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def calibrated_token_entropy(dist_logits, T: float) -> float:
    """Entropy (nats) of the temperature-scaled distribution of one position."""
    from .uncertainty import entropy_nats

    return entropy_nats(apply_temperature(dist_logits, T))


def calibrated_sequence_probability(per_position_logits, chosen_indices, T: float) -> float:
    """Product over positions of the scaled probability of each chosen token.

    Accumulated in log space and exponentiated once at the end.  Raises
    CapabilityError when no full per-position distributions are supplied
    (sampled-token logprobs alone cannot be re-scaled).
    """
    if T <= 0.0:
        raise ValueError("temperature must be positive")
    if not per_position_logits:
        raise CapabilityError("full per-position distributions required for re-scaling")
    if len(per_position_logits) != len(chosen_indices):
        raise ValueError("one chosen index required per position")
    total = 0.0
    for z_raw, idx in zip(per_position_logits, chosen_indices):
        z = np.asarray(z_raw, dtype=float) / T
        if not 0 <= idx < len(z):
            raise ValueError(f"chosen index {idx} out of range")
        m = float(z.max())
        log_norm = m + math.log(float(np.exp(z - m).sum()))
        total += float(z[idx]) - log_norm
    return math.exp(total)


def mc_calibrated_mean(pass_logits, T: float) -> np.ndarray:
    """Mean of per-pass temperature-scaled softmaxes over M stochastic passes."""
    if len(pass_logits) < 1:
        raise ValueError("at least one pass required")
    dims = {len(z) for z in pass_logits}
    if len(dims) != 1:
        raise ValueError("passes have mismatched dimensions")
    stacked = np.stack([apply_temperature(z, T) for z in pass_logits])
    return stacked.mean(axis=0)


def fit_isotonic(pairs) -> IsotonicModel:
    """Least-squares monotone fit of outcomes against scores via PAV.

    Pairs are sorted by score; tied scores are grouped into one block whose
    starting value is their mean outcome; adjacent blocks that violate
    monotonicity are pooled (weighted mean) until the sequence is
    non-decreasing.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("at least one (score, outcome) pair required")
    by_score: dict[float, list[float]] = {}
    for score, outcome in pairs:
        s = float(score)
        if not math.isfinite(s):
            raise ValueError("scores must be finite")
        by_score.setdefault(s, []).append(float(outcome))
    scores = sorted(by_score)

    # blocks of (value, weight, group span) over the distinct-score sequence
    blocks: list[list[float]] = []
    for s in scores:
        outcomes = by_score[s]
        blocks.append([sum(outcomes) / len(outcomes), float(len(outcomes)), 1.0])
        while len(blocks) >= 2 and blocks[-2][0] > blocks[-1][0]:
            v2, w2, g2 = blocks.pop()
            v1, w1, g1 = blocks.pop()
            w = w1 + w2
            blocks.append([(v1 * w1 + v2 * w2) / w, w, g1 + g2])

    values: list[float] = []
    for v, _w, span in blocks:
        values.extend([v] * int(span))
    return IsotonicModel(breakpoints=scores, values=values)


def apply_isotonic(model: IsotonicModel, score: float) -> float:
    """Piecewise-constant lookup; scores outside the fitted range clamp to the
    nearest end value."""
    idx = bisect_right(model.breakpoints, score) - 1
    if idx < 0:
        return model.values[0]
    return model.values[idx]


def bayesian_aggregate(prob_samples, level: float = 0.95) -> CredibleSummary:
    """Mean and central credible interval of a distribution of probabilities.

    The interval is the empirical [(1-level)/2, 1-(1-level)/2] percentile
    range with linear interpolation between order statistics, widened if
    necessary so the mean always lies inside it.
    """
    samples = np.asarray(list(prob_samples), dtype=float)
    if samples.size == 0:
        raise ValueError("at least one probability sample required")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    mean = float(samples.mean())
    alpha = (1.0 - level) / 2.0
    lower = float(np.quantile(samples, alpha))
    upper = float(np.quantile(samples, 1.0 - alpha))
    return CredibleSummary(mean=mean, lower=min(lower, mean), upper=max(upper, mean), level=level)


def aggregate_self_evaluation(votes) -> float:
    """Fraction of critique passes that deemed the answer correct.

    "no" and "unsure" count only in the denominator, so three passes voting
    yes/yes/unsure aggregate to ~0.667.
    """
    votes = [str(v).strip().lower() for v in votes]
    if not votes:
        raise ValueError("at least one vote required")
    for v in votes:
        if v not in VOTE_VALUES:
            raise ValueError(f"unknown vote {v!r}; expected one of {VOTE_VALUES}")
    return votes.count("yes") / len(votes)


# ---------------------------------------------------------------------------
# Calibration map serialization


def calibration_map_to_json(model) -> dict:
    if isinstance(model, TemperatureModel):
        return {"kind": "temperature", "T": model.T, "fit_nll": model.fit_nll, "n_fit": model.n_fit}
    if isinstance(model, IsotonicModel):
        return {"kind": "isotonic", "breakpoints": model.breakpoints, "values": model.values}
    raise TypeError(f"not a calibration model: {type(model).__name__}")


def calibration_map_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "temperature":
        return TemperatureModel(T=float(obj["T"]), fit_nll=float(obj["fit_nll"]), n_fit=int(obj["n_fit"]))
    if kind == "isotonic":
        return IsotonicModel(
            breakpoints=[float(x) for x in obj["breakpoints"]],
            values=[float(x) for x in obj["values"]],
        )
    raise ValueError(f"unknown calibration map kind: {kind!r}")


# ---------------------------------------------------------------------------
# Corpus bridges: pull fit data out of generation records


def logit_label_pairs(records: list[GenerationRecord]):
    """Extract (logits, correct-class index) fit pairs from labeled records.

    Uses the first scored position of the first sample; the stored
    probabilities are mapped back to logits via log, so records with
    zero-probability entries are skipped.
    """
    logit_sets, labels = [], []
    for rec in records:
        gt = rec.ground_truth
        if gt is None or gt.correct_answer is None or not rec.samples:
            continue
        sample = rec.samples[0]
        if not sample.token_dists:
            continue
        dist = sample.token_dists[0]
        if gt.correct_answer not in dist.token_labels:
            continue
        probs = np.asarray(dist.probs, dtype=float)
        if probs.size == 0 or np.any(probs <= 0.0):
            continue
        logit_sets.append(np.log(probs))
        labels.append(dist.token_labels.index(gt.correct_answer))
    return logit_sets, labels


def score_outcome_pairs(records: list[GenerationRecord]):
    """Extract (confidence, correct) pairs: confidence is the top probability
    of the first scored position, correctness is argmax against the label."""
    pairs = []
    for rec in records:
        gt = rec.ground_truth
        if gt is None or gt.correct_answer is None or not rec.samples:
            continue
        sample = rec.samples[0]
        if not sample.token_dists:
            continue
        dist = sample.token_dists[0]
        if not dist.probs or gt.correct_answer not in dist.token_labels:
            continue
        top = int(np.argmax(dist.probs))
        pairs.append((float(dist.probs[top]), dist.token_labels[top] == gt.correct_answer))
    return pairs
