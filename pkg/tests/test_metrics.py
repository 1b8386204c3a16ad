"""Metric implementations vs. independent brute-force oracles."""

import math
from collections import Counter
from itertools import combinations

import numpy as np
import pytest

from axisatlas import metrics


# ---------------------------------------------------------------------------
# Oracles: plain-loop reference computations, independent of the library path.

def oracle_silhouette(points, labels):
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    keep = [i for i in range(len(labels)) if labels[i] >= 0]
    clusters = sorted({int(labels[i]) for i in keep})
    assert len(clusters) >= 2
    def dist(i, j):
        return math.dist(points[i], points[j])
    scores = []
    for i in keep:
        own = [j for j in keep if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(dist(i, j) for j in own) / len(own)
        b = math.inf
        for c in clusters:
            if c == labels[i]:
                continue
            members = [j for j in keep if labels[j] == c]
            b = min(b, sum(dist(i, j) for j in members) / len(members))
        scores.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return sum(scores) / len(scores)


def oracle_trust_cont(high, low, k):
    high = np.asarray(high, dtype=float)
    low = np.asarray(low, dtype=float)
    n = len(high)

    def neighbor_order(pts, i):
        ds = [(math.dist(pts[i], pts[j]), j) for j in range(n) if j != i]
        ds.sort()
        return [j for _, j in ds]

    t_sum = 0.0
    c_sum = 0.0
    for i in range(n):
        order_h = neighbor_order(high, i)
        order_l = neighbor_order(low, i)
        rank_h = {j: r + 1 for r, j in enumerate(order_h)}
        rank_l = {j: r + 1 for r, j in enumerate(order_l)}
        knn_h = set(order_h[:k])
        knn_l = set(order_l[:k])
        for j in knn_l - knn_h:
            t_sum += rank_h[j] - k
        for j in knn_h - knn_l:
            c_sum += rank_l[j] - k
    norm = 2.0 / (n * k * (2 * n - 3 * k - 1))
    return 1.0 - norm * t_sum, 1.0 - norm * c_sum


def oracle_ari(a, b):
    n = len(a)
    same_a = same_b = same_both = 0
    for i, j in combinations(range(n), 2):
        sa = a[i] == a[j]
        sb = b[i] == b[j]
        same_a += sa
        same_b += sb
        same_both += sa and sb
    total = n * (n - 1) / 2
    expected = same_a * same_b / total
    max_index = (same_a + same_b) / 2
    if max_index == expected:
        return 1.0 if same_both == max_index else 0.0
    return (same_both - expected) / (max_index - expected)


def oracle_nmi(a, b):
    n = len(a)
    ca, cb, cab = Counter(a), Counter(b), Counter(zip(a, b))
    def entropy(counter):
        return -sum((c / n) * math.log(c / n) for c in counter.values())
    ha, hb = entropy(ca), entropy(cb)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    mi = 0.0
    for (x, y), c in cab.items():
        pij = c / n
        mi += pij * math.log(pij / ((ca[x] / n) * (cb[y] / n)))
    return max(mi, 0.0) / ((ha + hb) / 2)


# ---------------------------------------------------------------------------

def test_silhouette_two_separated_pairs():
    points = np.array([[0.0], [1.0], [10.0], [11.0]])
    labels = np.array([0, 0, 1, 1])
    expected = (9.5 / 10.5 + 8.5 / 9.5 + 8.5 / 9.5 + 9.5 / 10.5) / 4
    got = metrics.silhouette(points, labels)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(0.8997, abs=5e-4)


def test_silhouette_coincident_clusters_near_zero():
    # Every point coincides with its cross-cluster twin: a == b for all,
    # so each score falls to the 0 convention.
    points = np.array([[3.0, 1.0]] * 4)
    labels = np.array([0, 0, 1, 1])
    assert abs(metrics.silhouette(points, labels)) < 1e-12


def test_silhouette_matches_oracle_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(5, 30))
        points = rng.normal(size=(n, int(rng.integers(1, 5))))
        labels = rng.integers(0, int(rng.integers(2, 5)), size=n)
        while np.unique(labels).size < 2:
            labels = rng.integers(0, 3, size=n)
        assert metrics.silhouette(points, labels) == pytest.approx(
            oracle_silhouette(points, labels), abs=1e-12)


def test_silhouette_excludes_noise():
    points = np.array([[0.0], [1.0], [10.0], [11.0], [500.0]])
    labels = np.array([0, 0, 1, 1, -1])
    no_noise = metrics.silhouette(points[:4], labels[:4])
    assert metrics.silhouette(points, labels) == pytest.approx(no_noise, abs=1e-12)


def test_silhouette_undefined_for_single_cluster():
    with pytest.raises(metrics.MetricError):
        metrics.silhouette(np.zeros((4, 2)), np.array([0, 0, 0, -1]))


def test_trust_cont_identity_projection():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 6))
    assert metrics.neighborhood_preservation(x, x.copy(), 5) == (1.0, 1.0)


def test_trust_cont_matches_oracle():
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(8, 30))
        k = int(rng.integers(1, max(2, (n - 1) // 2)))
        high = rng.normal(size=(n, 5))
        low = rng.normal(size=(n, 2))
        got = metrics.neighborhood_preservation(high, low, k)
        want = oracle_trust_cont(high, low, k)
        assert got[0] == pytest.approx(want[0], abs=1e-12)
        assert got[1] == pytest.approx(want[1], abs=1e-12)


def test_trust_cont_swap_symmetry():
    rng = np.random.default_rng(3)
    high = rng.normal(size=(15, 4))
    low = rng.normal(size=(15, 2))
    t_ab, c_ab = metrics.neighborhood_preservation(high, low, 4)
    t_ba, c_ba = metrics.neighborhood_preservation(low, high, 4)
    assert t_ab == pytest.approx(c_ba, abs=1e-15)
    assert c_ab == pytest.approx(t_ba, abs=1e-15)


def test_trust_cont_k_range_check():
    with pytest.raises(metrics.MetricError):
        metrics.neighborhood_preservation(np.zeros((6, 2)), np.zeros((6, 2)), 3)


def test_ari_examples():
    assert metrics.ari([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert metrics.ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)
    assert metrics.ari([2, 0, 1, 5], [2, 0, 1, 5]) == 1.0
    assert metrics.ari([0, 0, 0], [0, 0, 0]) == 1.0  # single-cluster self-agreement


def test_ari_matches_oracle():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(4, 30))
        a = rng.integers(-1, 4, size=n).tolist()
        b = rng.integers(-1, 4, size=n).tolist()
        assert metrics.ari(a, b) == pytest.approx(oracle_ari(a, b), abs=1e-12)


def test_nmi_examples():
    assert metrics.nmi([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert metrics.nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-15)
    assert metrics.nmi([0, 0, 0, 0], [0, 0, 0, 0]) == 1.0
    assert metrics.nmi([0, 0, 0, 0], [0, 1, 2, 3]) == pytest.approx(0.0, abs=1e-15)


def test_nmi_matches_oracle():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(4, 30))
        a = rng.integers(0, 4, size=n).tolist()
        b = rng.integers(0, 4, size=n).tolist()
        assert metrics.nmi(a, b) == pytest.approx(oracle_nmi(a, b), abs=1e-12)


def test_label_permutation_invariance():
    rng = np.random.default_rng(21)
    a = rng.integers(0, 4, size=40)
    b = rng.integers(0, 4, size=40)
    remap = {0: 7, 1: 3, 2: 11, 3: 0}
    b_perm = np.array([remap[int(x)] for x in b])
    assert metrics.ari(a, b) == pytest.approx(metrics.ari(a, b_perm), abs=1e-15)
    assert metrics.nmi(a, b) == pytest.approx(metrics.nmi(a, b_perm), abs=1e-15)


def test_noise_ratio():
    labels = np.array([-1] * 58 + [0] * 23)
    assert metrics.noise_ratio(labels) == pytest.approx(58 / 81)
    assert metrics.noise_ratio([0, 1, 2]) == 0.0
    assert metrics.noise_ratio([-1, -1]) == 1.0
    with pytest.raises(metrics.MetricError):
        metrics.noise_ratio([])
