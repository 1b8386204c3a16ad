"""The sweep's clustering algorithms.

Agglomerative merging with selectable linkage, DBSCAN, and OPTICS with
reachability-plot xi extraction, all sharing one label contract: -1 is
noise, other labels are dense 0..C-1 renumbered by first appearance.
K-means lives in :mod:`axisatlas.codebook` and is reused by the sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import pairwise_distances

LINKAGES = ("average", "complete", "single", "ward")


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int
    noise_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        object.__setattr__(self, "labels", labels)
        assert self.noise_count == int(np.sum(labels == -1))
        non_noise = np.unique(labels[labels >= 0])
        assert non_noise.tolist() == list(range(self.n_clusters))


def _renumber(raw_labels: np.ndarray) -> ClusterAssignment:
    """Dense labels by first appearance; -1 passes through as noise."""
    labels = np.full(raw_labels.shape, -1, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(raw_labels):
        if lab == -1:
            continue
        if lab not in mapping:
            mapping[int(lab)] = len(mapping)
        labels[i] = mapping[int(lab)]
    return ClusterAssignment(labels=labels, n_clusters=len(mapping),
                             noise_count=int(np.sum(labels == -1)))


# -- agglomerative -----------------------------------------------------------

def agglomerative_cluster(points: np.ndarray, k: int, linkage: str = "average") -> ClusterAssignment:
    """Bottom-up merging on Euclidean distances until k clusters remain.

    Linkage distances follow the Lance-Williams updates; ward operates on
    squared distances.  The closest pair wins each merge, ties broken by
    the smallest (i, j) active-position pair.  Never produces noise.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} points")

    dist = pairwise_distances(points)
    if linkage == "ward":
        dist = dist**2
    np.fill_diagonal(dist, np.inf)
    active = list(range(n))            # active cluster slots, in creation order
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    sizes = np.ones(n)
    d = dist.copy()

    while len(active) > k:
        # smallest distance; ties -> lexicographically smallest active pair
        sub = d[np.ix_(active, active)]
        flat = np.argmin(sub)
        ai, aj = divmod(int(flat), len(active))
        if ai > aj:
            ai, aj = aj, ai
        i, j = active[ai], active[aj]

        ni, nj = sizes[i], sizes[j]
        for slot in active:
            if slot in (i, j):
                continue
            nk = sizes[slot]
            dik, djk = d[i, slot], d[j, slot]
            if linkage == "single":
                new = min(dik, djk)
            elif linkage == "complete":
                new = max(dik, djk)
            elif linkage == "average":
                new = (ni * dik + nj * djk) / (ni + nj)
            else:  # ward, on squared distances
                tot = ni + nj + nk
                new = ((ni + nk) * dik + (nj + nk) * djk - nk * d[i, j]) / tot
            d[i, slot] = d[slot, i] = new
        members[i].extend(members[j])
        sizes[i] = ni + nj
        del members[j]
        active.remove(j)
        d[j, :] = np.inf
        d[:, j] = np.inf

    raw = np.empty(n, dtype=np.int64)
    for slot, mem in members.items():
        raw[mem] = slot
    return _renumber(raw)


# -- dbscan ------------------------------------------------------------------

def dbscan(points: np.ndarray, eps: float, min_samples: int) -> ClusterAssignment:
    """Classic core/border/noise DBSCAN.

    A point is core iff at least ``min_samples`` points (itself included)
    lie within eps.  Clusters are connected components of core points;
    border points attach to the cluster of their lowest-index core
    neighbor.  Labels renumber by first appearance.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    dist = pairwise_distances(points)
    within = dist <= eps
    core = within.sum(axis=1) >= min_samples

    raw = np.full(n, -1, dtype=np.int64)
    comp = np.full(n, -1, dtype=np.int64)
    comp_id = 0
    for start in range(n):
        if not core[start] or comp[start] != -1:
            continue
        stack = [start]
        comp[start] = comp_id
        while stack:
            p = stack.pop()
            for q in np.flatnonzero(within[p] & core):
                if comp[q] == -1:
                    comp[q] = comp_id
                    stack.append(int(q))
        comp_id += 1
    raw[core] = comp[core]
    for p in np.flatnonzero(~core):
        core_neighbors = np.flatnonzero(within[p] & core)
        if core_neighbors.size:
            raw[p] = comp[core_neighbors[0]]  # lowest-index core neighbor
    return _renumber(raw)


# -- optics ------------------------------------------------------------------

def optics_reachability(points: np.ndarray, min_samples: int):
    """OPTICS ordering and reachability plot with unbounded max_eps.

    Core distance is the distance to the (min_samples - 1)-th nearest
    other point.  The next point processed is always the unprocessed one
    with the smallest reachability, ties to the smallest index.

    Returns (ordering, reachability-in-order, core_distances-by-index).
    """
    if min_samples < 2:
        raise ValueError("min_samples must be >= 2")
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < min_samples:
        raise ValueError("need at least min_samples points")
    dist = pairwise_distances(points)
    sorted_d = np.sort(dist, axis=1)
    core = sorted_d[:, min_samples - 1]  # column 0 is the self distance

    reach = np.full(n, np.inf)
    processed = np.zeros(n, dtype=bool)
    ordering = np.empty(n, dtype=np.int64)
    reach_plot = np.empty(n)
    for step in range(n):
        candidates = np.flatnonzero(~processed)
        p = candidates[int(np.argmin(reach[candidates]))]  # argmin ties -> low index
        ordering[step] = p
        reach_plot[step] = reach[p]
        processed[p] = True
        rest = candidates[candidates != p]
        new = np.maximum(core[p], dist[p, rest])
        np.minimum.at(reach, rest, new)
    return ordering, reach_plot, core


def _steep_flags(plot: np.ndarray, xi: float):
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = plot[:-1] / plot[1:]
    comp = 1.0 - xi
    steep_up = ratio <= comp
    steep_down = ratio >= 1.0 / comp
    upward = ratio < 1.0
    downward = ratio > 1.0
    return steep_up, steep_down, upward, downward


def _extend_region(steep, xward, start, min_samples):
    """Largest end such that the region stays steep, allowing at most
    min_samples consecutive flat points that do not reverse direction."""
    n = steep.shape[0]
    index, end, slack = start, start, 0
    while index < n:
        if steep[index]:
            slack = 0
            end = index
        elif not xward[index]:
            slack += 1
            if slack > min_samples:
                break
        else:
            break
        index += 1
    return end


def _xi_extract(plot: np.ndarray, xi: float, min_samples: int, min_cluster_size: int):
    """Steep-area cluster extraction over the reachability plot (with a
    trailing +inf sentinel).  Returns [start, end] index pairs."""
    plot = np.concatenate([plot, [np.inf]])
    steep_up, steep_down, upward, downward = _steep_flags(plot, xi)
    comp = 1.0 - xi
    sdas: list[dict] = []
    clusters: list[tuple[int, int]] = []
    index = 0
    mib = 0.0
    for steep_index in np.flatnonzero(steep_up | steep_down):
        steep_index = int(steep_index)
        if steep_index < index:
            continue
        mib = max(mib, float(np.max(plot[index:steep_index + 1])))
        if np.isinf(mib):
            sdas = []
        else:
            sdas = [s for s in sdas if mib <= plot[s["start"]] * comp]
            for s in sdas:
                s["mib"] = max(s["mib"], mib)
        if steep_down[steep_index]:
            end = _extend_region(steep_down, upward, steep_index, min_samples)
            sdas.append({"start": steep_index, "end": end, "mib": 0.0})
            index = end + 1
            mib = float(plot[index])
        else:
            u_start = steep_index
            u_end = _extend_region(steep_up, downward, steep_index, min_samples)
            index = u_end + 1
            mib = float(plot[index])
            event: list[tuple[int, int]] = []
            for s in sdas:
                c_start, c_end = s["start"], u_end
                if plot[c_end + 1] * comp < s["mib"]:
                    continue
                d_max = plot[s["start"]]
                if d_max * comp >= plot[c_end + 1]:
                    while c_start < s["end"] and plot[c_start + 1] > plot[c_end + 1]:
                        c_start += 1
                elif plot[c_end + 1] * comp >= d_max:
                    while c_end > u_start and plot[c_end - 1] > d_max:
                        c_end -= 1
                if c_end - c_start + 1 < min_cluster_size:
                    continue
                if c_start > s["end"] or c_end < u_start:
                    continue
                event.append((c_start, c_end))
            # narrower (later-start) candidates first, so nested clusters
            # precede their enclosing ones in the collected order
            clusters.extend(reversed(event))
    return clusters


def optics(points: np.ndarray, min_samples: int, xi: float) -> ClusterAssignment:
    """OPTICS with xi cluster extraction.

    Extracted intervals are painted in collected order, skipping any that
    overlap an already-painted one; nested intervals come first, so each
    labeled point carries its smallest enclosing kept cluster.  Points
    under no painted interval are noise.
    """
    if not 0.0 < xi < 1.0:
        raise ValueError("xi must lie in (0, 1)")
    ordering, plot, _ = optics_reachability(points, min_samples)
    intervals = _xi_extract(plot, xi, min_samples, min_cluster_size=min_samples)
    n = points.shape[0]
    position_label = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for s, e in intervals:
        if np.all(position_label[s:e + 1] == -1):
            position_label[s:e + 1] = next_label
            next_label += 1
    raw = np.full(n, -1, dtype=np.int64)
    raw[ordering] = position_label
    return _renumber(raw)
