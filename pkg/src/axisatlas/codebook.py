"""Word-codebook construction.

PCA whitening of keyword embeddings, K-means over a candidate ladder of
codebook sizes, and automatic size selection by the penalty-adjusted
silhouette objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blockio
from .corpus import EmbeddingTable
from .metrics import pairwise_distances, silhouette_from_distances

DEFAULT_LADDER = (32, 48, 64, 96, 128, 192, 256, 384, 512, 768, 1024)


class DegenerateInputError(ValueError):
    """Input carries no usable variance or violates a size precondition."""


@dataclass(frozen=True)
class Whitener:
    mean: np.ndarray
    components: np.ndarray  # (retained_dim, input_dim), orthonormal rows
    scales: np.ndarray      # 1/sqrt(eigenvalue) per retained component
    retained_dim: int
    variance_captured: float

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        return (x - self.mean) @ self.components.T * self.scales


@dataclass(frozen=True)
class CodebookConfig:
    variance_target: float = 0.95
    penalty_singleton: float = 0.6
    penalty_empty: float = 0.8
    penalty_gini: float = 0.2
    candidate_ladder: tuple[int, ...] = DEFAULT_LADDER
    kmeans_mode: str = "minibatch"  # "full" | "minibatch"
    minibatch_size: int = 1024
    seed: int = 42

    def __post_init__(self):
        if min(self.penalty_singleton, self.penalty_empty, self.penalty_gini) < 0:
            raise ValueError("penalties must be non-negative")
        if self.kmeans_mode not in ("full", "minibatch"):
            raise ValueError(f"unknown kmeans mode {self.kmeans_mode!r}")

    def to_dict(self) -> dict:
        return {
            "variance_target": self.variance_target,
            "penalty_singleton": self.penalty_singleton,
            "penalty_empty": self.penalty_empty,
            "penalty_gini": self.penalty_gini,
            "candidate_ladder": list(self.candidate_ladder),
            "kmeans_mode": self.kmeans_mode,
            "minibatch_size": self.minibatch_size,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodebookConfig":
        d = dict(d)
        if "candidate_ladder" in d:
            d["candidate_ladder"] = tuple(d["candidate_ladder"])
        return cls(**d)


@dataclass(frozen=True)
class CandidateDiagnostics:
    k: int
    silhouette: float
    r_singleton: float
    r_empty: float
    gini: float
    adjusted: float


@dataclass(frozen=True)
class Codebook:
    whitener: Whitener
    centroids: np.ndarray  # (K_c, retained_dim) in whitened space
    k: int
    assignments: dict[str, int]
    diagnostics: tuple[CandidateDiagnostics, ...]
    config: CodebookConfig
    input_dim: int

    @property
    def retained_dim(self) -> int:
        return self.whitener.retained_dim


def fit_whitener(vectors: np.ndarray, variance_target: float) -> Whitener:
    """PCA whitener retaining the smallest leading-component count whose
    cumulative explained variance meets the target.

    Transformed fitting data has unit per-component sample variance
    (ddof=1).  Raises on degenerate input with zero total variance.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DegenerateInputError("need at least 2 vectors to fit a whitener")
    if not np.all(np.isfinite(x)):
        raise DegenerateInputError("non-finite entries in input")
    mean = x.mean(axis=0)
    centered = x - mean
    # Eigen-decomposition via SVD of the centered matrix: stable and exact
    # for n << d.  Eigenvalues of the (ddof=1) covariance are s^2/(n-1).
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eigvals = svals**2 / (x.shape[0] - 1)
    total = float(eigvals.sum())
    if total <= 0.0 or eigvals[0] <= 0.0:
        raise DegenerateInputError("all vectors identical: zero variance")

    # Components below numerical rank carry no real variance.
    usable = eigvals > max(eigvals[0] * 1e-12, 0.0)
    cumvar = np.cumsum(eigvals) / total
    retained = int(np.searchsorted(cumvar, variance_target - 1e-12) + 1)
    retained = min(retained, int(np.sum(usable)))
    retained = max(retained, 1)

    components = vt[:retained]
    # Deterministic orientation: largest-magnitude entry of each row positive.
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    scales = 1.0 / np.sqrt(eigvals[:retained])
    return Whitener(
        mean=mean,
        components=components,
        scales=scales,
        retained_dim=retained,
        variance_captured=float(cumvar[retained - 1]),
    )


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding (D^2 sampling)."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # Remaining mass exhausted (duplicate points): spread uniformly.
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
        centroids[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[c]) ** 2, axis=1))
    return centroids


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (ties to lowest index) and squared distances."""
    p2 = np.sum(points**2, axis=1)[:, None]
    c2 = np.sum(centroids**2, axis=1)[None, :]
    d2 = np.maximum(p2 + c2 - 2.0 * points @ centroids.T, 0.0)
    labels = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
    return labels, d2[np.arange(points.shape[0]), labels]


def _reseed_empty(points, centroids, labels, dists):
    """Move each empty centroid onto the point currently farthest from its
    assigned centroid; keeps K populated without hiding final imbalance."""
    counts = np.bincount(labels, minlength=centroids.shape[0])
    taken: set[int] = set()
    for c in np.flatnonzero(counts == 0):
        order = np.argsort(dists, kind="stable")[::-1]
        for far in order:
            if int(far) not in taken:
                centroids[c] = points[far]
                taken.add(int(far))
                dists = dists.copy()
                dists[far] = 0.0
                break
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int, mode: str = "full",
           minibatch_size: int = 1024, max_iter: int = 300,
           tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray, float]:
    """K-means with k-means++ seeding.

    Full mode runs Lloyd iterations until the largest centroid shift
    drops below ``tol`` (inertia asserted non-increasing per step);
    minibatch mode runs a fixed 100 epochs over shuffled batches with
    per-center learning rates.  Same seed, same output.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise DegenerateInputError(f"k={k} invalid for {n} points")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)

    if mode == "full":
        prev_inertia = math.inf
        for _ in range(max_iter):
            labels, d2 = _assign(points, centroids)
            centroids = _reseed_empty(points, centroids, labels, d2)
            labels, d2 = _assign(points, centroids)
            inertia = float(d2.sum())
            assert inertia <= prev_inertia + 1e-9, "Lloyd inertia increased"
            prev_inertia = inertia
            new_centroids = centroids.copy()
            for c in range(k):
                members = labels == c
                if members.any():
                    new_centroids[c] = points[members].mean(axis=0)
            shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
            centroids = new_centroids
            if shift < tol:
                break
    elif mode == "minibatch":
        # Per-center learning-rate updates (eta = 1/count) telescope into a
        # running mean, so each batch applies in one vectorized step.
        counts = np.ones(k)
        for _ in range(100):
            perm = rng.permutation(n)
            for start in range(0, n, minibatch_size):
                batch = points[perm[start:start + minibatch_size]]
                blabels, _ = _assign(batch, centroids)
                hits = np.bincount(blabels, minlength=k).astype(np.float64)
                sums = np.zeros_like(centroids)
                np.add.at(sums, blabels, batch)
                touched = hits > 0
                new_counts = counts + hits
                centroids[touched] = (
                    (counts[touched, None] * centroids[touched] + sums[touched])
                    / new_counts[touched, None])
                counts = new_counts
        labels, d2 = _assign(points, centroids)
        centroids = _reseed_empty(points, centroids, labels, d2)
    else:
        raise ValueError(f"unknown kmeans mode {mode!r}")

    labels, d2 = _assign(points, centroids)
    return centroids, labels, float(d2.sum())


def candidate_codebook_sizes(n_keywords: int, config: CodebookConfig) -> list[int]:
    """Ladder plus root-scaled candidates, deduplicated, clipped to
    [2, n_keywords - 1], ascending."""
    if n_keywords < 4:
        raise DegenerateInputError("need at least 4 keywords to scan codebook sizes")
    root = math.sqrt(n_keywords)
    # round() is round-half-to-even, the documented convention
    extras = {round(root), round(1.5 * root), round(2.0 * root)}
    candidates = set(config.candidate_ladder) | extras
    return sorted(c for c in candidates if 2 <= c <= n_keywords - 1)


def gini_imbalance(sizes) -> float:
    """Gini coefficient of cluster sizes: sum of absolute pairwise
    differences over 2 * m^2 * mean."""
    s = np.asarray(sizes, dtype=np.float64)
    if s.size == 0 or np.any(s < 0):
        raise ValueError("sizes must be non-empty and non-negative")
    total = s.sum()
    if total <= 0:
        raise ValueError("all-zero sizes")
    m = s.size
    diff_sum = float(np.sum(np.abs(s[:, None] - s[None, :])))
    return diff_sum / (2.0 * m * m * (total / m))


def combine_adjusted_silhouette(s: float, r_singleton: float, r_empty: float,
                                gini: float, config: CodebookConfig) -> float:
    """The selection objective: silhouette minus weighted singleton,
    empty, and imbalance penalties."""
    return (s - config.penalty_singleton * r_singleton
            - config.penalty_empty * r_empty
            - config.penalty_gini * gini)


def adjusted_silhouette(points: np.ndarray, labels: np.ndarray, requested_k: int,
                        config: CodebookConfig,
                        distances: np.ndarray | None = None) -> CandidateDiagnostics:
    """Silhouette with structural penalties for a clustering that was
    *asked* for ``requested_k`` clusters (empties count against it)."""
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=requested_k)
    nonempty = counts[counts > 0]
    if nonempty.size < 2:
        raise DegenerateInputError("adjusted silhouette needs >= 2 non-empty clusters")
    r_singleton = float(np.sum(counts == 1)) / requested_k
    r_empty = float(requested_k - nonempty.size) / requested_k
    gini = gini_imbalance(nonempty)
    if distances is None:
        distances = pairwise_distances(points)
    s = silhouette_from_distances(distances, labels)
    return CandidateDiagnostics(
        k=requested_k, silhouette=s, r_singleton=r_singleton, r_empty=r_empty,
        gini=gini, adjusted=combine_adjusted_silhouette(s, r_singleton, r_empty, gini, config))


def build_codebook(table: EmbeddingTable, config: CodebookConfig | None = None) -> Codebook:
    """Whiten the table, run K-means per candidate size (each candidate
    seeded as seed + candidate index, so schedules don't matter), and keep
    the size maximizing adjusted silhouette (ties to the smaller size)."""
    config = config or CodebookConfig()
    keywords = table.keywords()
    raw = table.matrix(keywords)
    whitener = fit_whitener(raw, config.variance_target)
    points = whitener.transform(raw)
    distances = pairwise_distances(points)

    candidates = candidate_codebook_sizes(len(keywords), config)
    diagnostics: list[CandidateDiagnostics] = []
    runs: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for idx, k in enumerate(candidates):
        centroids, labels, _ = kmeans(
            points, k, seed=config.seed + idx, mode=config.kmeans_mode,
            minibatch_size=config.minibatch_size)
        diagnostics.append(adjusted_silhouette(points, labels, k, config, distances))
        runs[k] = (centroids, labels)

    best = max(diagnostics, key=lambda d: (d.adjusted, -d.k))
    centroids, labels = runs[best.k]
    # Drop empty clusters so indices are dense 0..K_c-1.
    used = np.unique(labels)
    remap = {int(old): new for new, old in enumerate(used)}
    centroids = centroids[used]
    assignments = {kw: remap[int(labels[i])] for i, kw in enumerate(keywords)}
    return Codebook(
        whitener=whitener, centroids=centroids, k=int(used.size),
        assignments=assignments, diagnostics=tuple(diagnostics),
        config=config, input_dim=table.dimension)


def assign_keyword(codebook: Codebook, vector: np.ndarray) -> int:
    """Nearest-centroid cluster of a (possibly unseen) keyword vector,
    ties to the lowest index."""
    vec = np.asarray(vector, dtype=np.float64)
    if vec.shape != (codebook.input_dim,):
        raise ValueError(
            f"vector has dimension {vec.shape}, codebook expects ({codebook.input_dim},)")
    white = codebook.whitener.transform(vec)[0]
    d2 = np.sum((codebook.centroids - white) ** 2, axis=1)
    return int(np.argmin(d2))


# -- serialization -----------------------------------------------------------

def save_codebook(codebook: Codebook, json_path, block_path) -> None:
    """JSON sidecar (config, diagnostics, assignments) plus the binary
    whitener/centroid block; loading reproduces assignment bit-exactly."""
    sidecar = {
        "k": codebook.k,
        "input_dim": codebook.input_dim,
        "retained_dim": codebook.retained_dim,
        "variance_captured": codebook.whitener.variance_captured,
        "config": codebook.config.to_dict(),
        "assignments": codebook.assignments,
        "diagnostics": [
            {"k": d.k, "silhouette": d.silhouette, "r_singleton": d.r_singleton,
             "r_empty": d.r_empty, "gini": d.gini, "adjusted": d.adjusted}
            for d in codebook.diagnostics
        ],
        "block_file": Path(block_path).name,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    blockio.write_matrix_blocks(block_path, {
        "mean": codebook.whitener.mean,
        "components": codebook.whitener.components,
        "scales": codebook.whitener.scales,
        "centroids": codebook.centroids,
    })


def load_codebook(json_path, block_path=None) -> Codebook:
    with open(json_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    if block_path is None:
        block_path = Path(json_path).parent / sidecar["block_file"]
    blocks = blockio.read_matrix_blocks(block_path)
    whitener = Whitener(
        mean=blocks["mean"],
        components=blocks["components"],
        scales=blocks["scales"],
        retained_dim=int(blocks["components"].shape[0]),
        variance_captured=float(sidecar["variance_captured"]),
    )
    diagnostics = tuple(
        CandidateDiagnostics(k=d["k"], silhouette=d["silhouette"],
                             r_singleton=d["r_singleton"], r_empty=d["r_empty"],
                             gini=d["gini"], adjusted=d["adjusted"])
        for d in sidecar["diagnostics"]
    )
    return Codebook(
        whitener=whitener, centroids=blocks["centroids"], k=int(sidecar["k"]),
        assignments={k: int(v) for k, v in sidecar["assignments"].items()},
        diagnostics=diagnostics, config=CodebookConfig.from_dict(sidecar["config"]),
        input_dim=int(sidecar["input_dim"]))
