"""Internal-validity and agreement metrics.

Silhouette, trustworthiness/continuity, ARI, NMI, noise ratio.  All
deterministic, no sampling; density-method noise points (label -1) are
excluded from silhouette but kept as their own category for ARI/NMI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    """Metric undefined for the given inputs."""


@dataclass(frozen=True)
class MetricBundle:
    silhouette: float
    trustworthiness: float
    continuity: float
    noise_ratio: float
    n_clusters: int


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix (float64, exact symmetric zeros on
    the diagonal)."""
    pts = np.asarray(points, dtype=np.float64)
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def cosine_distances(points: np.ndarray) -> np.ndarray:
    """Dense cosine distance matrix; rows with zero norm sit at distance
    1 from everything by convention."""
    pts = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(pts, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    unit = pts / safe[:, None]
    sim = np.clip(unit @ unit.T, -1.0, 1.0)
    zero = norms == 0.0
    sim[zero, :] = 0.0
    sim[:, zero] = 0.0
    dist = 1.0 - sim
    np.fill_diagonal(dist, 0.0)
    return dist


def silhouette_from_distances(dist: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over non-noise points given a precomputed distance
    matrix.  Points in singleton clusters contribute s = 0."""
    labels = np.asarray(labels)
    mask = labels >= 0
    uniq = np.unique(labels[mask])
    if uniq.size < 2:
        raise MetricError("silhouette requires at least 2 non-noise clusters")
    idx = np.flatnonzero(mask)
    sub = dist[np.ix_(idx, idx)]
    sub_labels = labels[idx]
    n = idx.size

    sizes = {c: int(np.sum(sub_labels == c)) for c in uniq}
    # Mean distance from every point to every cluster.
    means = np.empty((n, uniq.size))
    for ci, c in enumerate(uniq):
        members = sub_labels == c
        means[:, ci] = sub[:, members].sum(axis=1)
        cnt = sizes[c]
        own = members  # exclude self from the intra-cluster mean
        means[own, ci] = means[own, ci] / max(cnt - 1, 1)
        means[~own, ci] = means[~own, ci] / cnt

    scores = np.zeros(n)
    for i in range(n):
        ci = int(np.searchsorted(uniq, sub_labels[i]))
        if sizes[sub_labels[i]] == 1:
            scores[i] = 0.0
            continue
        a = means[i, ci]
        b = np.min(np.delete(means[i], ci))
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(np.mean(scores))


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette (Euclidean); noise points (label -1) excluded."""
    return silhouette_from_distances(pairwise_distances(points), labels)


def _rank_matrix(dist: np.ndarray) -> np.ndarray:
    """ranks[i, j] = 1-based rank of j by distance from i (self excluded),
    ties broken by index."""
    n = dist.shape[0]
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    ranks = np.empty((n, n), dtype=np.int64)
    cols = np.arange(1, n + 1)
    for i in range(n):
        ranks[i, order[i]] = cols
    return ranks


def _knn_sets(dist: np.ndarray, k: int) -> np.ndarray:
    """Boolean (n, n) membership: j among i's k nearest (index tie-break)."""
    n = dist.shape[0]
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    member = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    member[rows, order.ravel()] = True
    return member


def neighborhood_preservation(high: np.ndarray, low: np.ndarray, k: int) -> tuple[float, float]:
    """Trustworthiness and continuity between a high-dimensional space and
    its projection.

    Trustworthiness penalizes points that enter the low-space k-NN set
    without belonging to the high-space one, weighted by their high-space
    rank excess; continuity swaps the two spaces.  Rank ties break by
    index.  Requires k < n/2.
    """
    high = np.asarray(high, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    if high.shape[0] != low.shape[0]:
        raise MetricError("row count mismatch between spaces")
    n = high.shape[0]
    if not 1 <= k < n / 2:
        raise MetricError(f"k={k} out of range for n={n} (need 1 <= k < n/2)")

    d_high = pairwise_distances(high)
    d_low = pairwise_distances(low)
    knn_high = _knn_sets(d_high, k)
    knn_low = _knn_sets(d_low, k)
    ranks_high = _rank_matrix(d_high)
    ranks_low = _rank_matrix(d_low)

    norm = 2.0 / (n * k * (2 * n - 3 * k - 1))
    intruders = knn_low & ~knn_high
    trust = 1.0 - norm * float(np.sum((ranks_high - k)[intruders]))
    missing = knn_high & ~knn_low
    cont = 1.0 - norm * float(np.sum((ranks_low - k)[missing]))
    return trust, cont


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _comb2(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(a, b) -> float:
    """Adjusted Rand Index via contingency pair counting.  Noise labels
    participate as an ordinary category.  Identical partitions (including
    the single-cluster case) score 1.0."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise MetricError("label vectors differ in length")
    table = _contingency(a, b)
    n = a.size
    sum_ij = float(np.sum(_comb2(table)))
    sum_a = float(np.sum(_comb2(table.sum(axis=1))))
    sum_b = float(np.sum(_comb2(table.sum(axis=0))))
    total = _comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        # Degenerate: both partitions trivial; identical iff pair sets agree.
        return 1.0 if sum_ij == max_index else 0.0
    return (sum_ij - expected) / (max_index - expected)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Normalized mutual information, arithmetic-mean normalization,
    natural log.  Two identical constant labelings score 1.0; a constant
    labeling against a non-constant one scores 0."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise MetricError("label vectors differ in length")
    table = _contingency(a, b).astype(np.float64)
    n = table.sum()
    ha = _entropy(table.sum(axis=1))
    hb = _entropy(table.sum(axis=0))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    pij = table / n
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    outer = pa[:, None] * pb[None, :]
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    mi = max(mi, 0.0)
    return mi / ((ha + hb) / 2.0)


def noise_ratio(labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise MetricError("empty labeling")
    return float(np.sum(labels == -1)) / labels.size


def n_clusters_of(labels) -> int:
    labels = np.asarray(labels)
    return int(np.unique(labels[labels >= 0]).size)
