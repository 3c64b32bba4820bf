"""Meaning-level uncertainty over sampled responses.

The pipeline: embed each sampled response, group the vectors with
average-linkage agglomerative clustering under cosine distance, estimate a
cluster's mass as its share of the samples, then score the mass distribution
with Shannon entropy.  Zero entropy means all samples landed in one semantic
cluster; ln K is the maximum over K clusters.

Stored per-sample embeddings take precedence, so real deployments can inject
sentence-transformer vectors through the record schema.  The built-in default
is a deterministic hashing bag-of-words embedder: dependency-free, order
invariant, and good enough at desk scale where test texts are constructed to
be lexically disjoint.

Determinism notes: merge ties break toward the lowest pair of cluster
indices, identical vectors are distance 0 by construction (so threshold 0
groups exact duplicates despite float rounding), and all-zero vectors always
form singleton clusters because cosine distance to them is undefined and
treated as unmergeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError
from .records import GenerationRecord
from .uncertainty import entropy_nats

EMBED_DIM = 256
DEFAULT_CLUSTER_THRESHOLD = 0.35

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class ClusterAssignment:
    """A partition of samples into semantic clusters with mass estimates.

    Cluster indices are contiguous from 0, ordered by lowest member index;
    the representative of cluster k is its lowest-indexed member.
    """

    cluster_of_sample: list[int]
    cluster_masses: list[float]
    representatives: list[int]


@dataclass(frozen=True)
class SemanticEntropyResult:
    entropy: float
    assignment: ClusterAssignment


def _fnv1a(token: str) -> int:
    h = _FNV_OFFSET
    for b in token.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _FNV_MASK
    return h


def default_embed(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Hashing bag-of-words embedding: lowercase whitespace tokens, FNV-1a
    bucketed counts, L2-normalized.  Empty or whitespace-only text maps to
    the zero vector."""
    vec = np.zeros(dim, dtype=float)
    for token in text.lower().split():
        vec[_fnv1a(token) % dim] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def _cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return math.inf  # undefined; keeps zero vectors unmergeable
    if np.array_equal(u, v):
        return 0.0
    sim = float(np.dot(u, v) / (nu * nv))
    return max(0.0, 1.0 - sim)


def cluster_embeddings(vectors, threshold: float) -> ClusterAssignment:
    """Average-linkage agglomerative clustering under cosine distance.

    Merging stops once the minimum inter-cluster distance exceeds the
    threshold.  Cluster masses are sample counts divided by N.
    """
    vs = [np.asarray(v, dtype=float) for v in vectors]
    if not vs:
        raise ValueError("at least one vector required")
    dims = {v.shape for v in vs}
    if len(dims) != 1 or len(vs[0].shape) != 1:
        raise ValueError("vectors must share one dimension")
    n = len(vs)

    dist = np.zeros((n, n), dtype=float)
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = _cosine_distance(vs[i], vs[j])

    clusters: list[list[int]] = [[i] for i in range(n)]
    while len(clusters) > 1:
        best = math.inf
        pair: tuple[int, int] | None = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = float(dist[np.ix_(clusters[a], clusters[b])].mean())
                if d < best:  # strict: ties keep the lowest (a, b) pair
                    best = d
                    pair = (a, b)
        if pair is None or best > threshold:
            break
        a, b = pair
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]

    clusters.sort(key=min)
    assignment = [0] * n
    for k, members in enumerate(clusters):
        for i in members:
            assignment[i] = k
    return ClusterAssignment(
        cluster_of_sample=assignment,
        cluster_masses=[len(members) / n for members in clusters],
        representatives=[min(members) for members in clusters],
    )


def semantic_entropy(assignment: ClusterAssignment) -> float:
    """Entropy of the cluster mass distribution, in nats."""
    return entropy_nats(assignment.cluster_masses)


def semantic_entropy_of_record(
    record: GenerationRecord,
    embed_fn=default_embed,
    threshold: float = DEFAULT_CLUSTER_THRESHOLD,
) -> SemanticEntropyResult:
    """Sample -> embed -> cluster -> estimate, over one record's responses.

    Uses a sample's stored embedding when present, otherwise embed_fn(text).
    """
    if len(record.samples) < 2:
        raise CapabilityError("semantic entropy requires multiple generations")
    vectors = [
        np.asarray(s.embedding, dtype=float) if s.embedding is not None else embed_fn(s.text)
        for s in record.samples
    ]
    assignment = cluster_embeddings(vectors, threshold)
    return SemanticEntropyResult(entropy=semantic_entropy(assignment), assignment=assignment)
