"""Projection spaces: RAW (identity), truncated SVD, and UMAP.

The UMAP path is self-contained: exact brute-force kNN, per-point
bandwidth calibration, fuzzy-union graph, damped-least-squares curve
fit, seeded spectral initialization, and a serial negative-sampling SGD
layout (numba-accelerated when available) for bit-reproducible output.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blockio
from .features import svd_reduce
from .metrics import cosine_distances, pairwise_distances

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an install-time dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

FAMILIES = ("raw", "svd", "umap")
METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class UmapParams:
    n_neighbors: int = 10
    min_dist: float = 0.01
    metric: str = "cosine"
    n_epochs: int = 500
    spread: float = 1.0
    negative_sample_rate: int = 5

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")

    def to_dict(self) -> dict:
        return {"n_neighbors": self.n_neighbors, "min_dist": self.min_dist,
                "metric": self.metric, "n_epochs": self.n_epochs,
                "spread": self.spread, "negative_sample_rate": self.negative_sample_rate}


@dataclass(frozen=True)
class ProjectionSpec:
    family: str
    out_dim: int | None = None  # None only for raw (identity keeps input width)
    umap_params: UmapParams | None = None
    seed: int = 42

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown projection family {self.family!r}")
        if (self.family == "umap") != (self.umap_params is not None):
            raise ValueError("umap_params present iff family is umap")
        if self.family != "raw" and (self.out_dim is None or self.out_dim < 2):
            raise ValueError("out_dim must be >= 2 for svd/umap")

    def key(self) -> str:
        if self.family == "raw":
            return "raw"
        if self.family == "svd":
            return f"svd{self.out_dim}"
        p = self.umap_params
        return (f"umap{self.out_dim}-nn{p.n_neighbors}-md{p.min_dist:g}-{p.metric}"
                f"-s{self.seed}")

    def to_dict(self) -> dict:
        return {"family": self.family, "out_dim": self.out_dim,
                "umap_params": self.umap_params.to_dict() if self.umap_params else None,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectionSpec":
        params = d.get("umap_params")
        return cls(family=d["family"], out_dim=d.get("out_dim"),
                   umap_params=UmapParams(**params) if params else None,
                   seed=d.get("seed", 42))


@dataclass(frozen=True)
class ProjectedSpace:
    spec: ProjectionSpec
    coordinates: np.ndarray
    source_fingerprint: str


def matrix_fingerprint(matrix: np.ndarray) -> str:
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    h = hashlib.sha256()
    h.update(repr(m.shape).encode())
    h.update(m.tobytes())
    return h.hexdigest()


# -- kNN ---------------------------------------------------------------------

def knn_graph(points: np.ndarray, k: int, metric: str = "euclidean"):
    """Exact brute-force k nearest neighbors per point.

    Self excluded; ties broken by index.  Returns (indices, distances),
    each of shape (n, k), rows sorted by (distance, index).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k={k} out of range for n={n}")
    if metric == "euclidean":
        dist = pairwise_distances(points)
    elif metric == "cosine":
        dist = cosine_distances(points)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    return order, dist[rows, order]


# -- curve fit ---------------------------------------------------------------

def fit_curve_params(min_dist: float, spread: float = 1.0,
                     n_samples: int = 300, n_iter: int = 100) -> tuple[float, float]:
    """Fit (a, b) of the low-dimensional kernel (1 + a d^(2b))^-1 to the
    offset exponential that is 1 inside min_dist and decays with the
    given spread, by damped least squares over a fixed sample grid."""
    d = np.linspace(0.0, 3.0 * spread, n_samples + 1)[1:]  # (0, 3*spread]
    y = np.where(d < min_dist, 1.0, np.exp(-(d - min_dist) / spread))

    def residual_jacobian(a, b):
        db = d ** (2.0 * b)
        denom = 1.0 + a * db
        f = 1.0 / denom
        r = f - y
        ja = -db / denom**2
        jb = -2.0 * a * db * np.log(d) / denom**2
        return r, np.column_stack([ja, jb])

    a, b = 1.0, 1.0
    lam = 1e-3
    r, jac = residual_jacobian(a, b)
    loss = float(r @ r)
    for _ in range(n_iter):
        jtj = jac.T @ jac
        rhs = -jac.T @ r
        try:
            delta = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)), rhs)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        a_new, b_new = a + delta[0], b + delta[1]
        if a_new <= 0 or b_new <= 0:
            lam *= 10.0
            continue
        r_new, jac_new = residual_jacobian(a_new, b_new)
        loss_new = float(r_new @ r_new)
        if loss_new < loss:
            a, b, r, jac, loss = a_new, b_new, r_new, jac_new, loss_new
            lam = max(lam / 3.0, 1e-12)
        else:
            lam *= 10.0
    return float(a), float(b)


# -- fuzzy graph -------------------------------------------------------------

def calibrate_bandwidths(knn_dists: np.ndarray, n_iter: int = 100):
    """Per-point (rho, sigma): rho is the nearest-neighbor distance and
    sigma solves sum_j exp(-max(0, d_ij - rho_i)/sigma_i) = log2(k) by
    bisection."""
    n, k = knn_dists.shape
    target = math.log2(k)
    rho = knn_dists[:, 0].copy()
    sigma = np.empty(n)
    for i in range(n):
        gaps = np.maximum(knn_dists[i] - rho[i], 0.0)

        def mass(s):
            return float(np.sum(np.exp(-gaps / s)))

        hi = 1.0
        while mass(hi) < target and hi < 1e12:
            hi *= 2.0
        lo = 0.0
        mid = hi
        for _ in range(n_iter):
            mid = (lo + hi) / 2.0
            if mid <= 0.0:
                break
            if mass(mid) > target:
                hi = mid
            else:
                lo = mid
        sigma[i] = max(mid, 1e-12)
    return rho, sigma


def fuzzy_graph(points: np.ndarray, n_neighbors: int, metric: str):
    """Symmetrized fuzzy neighborhood graph: directed membership weights
    exp(-max(0, d - rho)/sigma) combined by the probabilistic union
    w = a + b - a*b.  Dense (n, n), zero diagonal."""
    idx, dists = knn_graph(points, n_neighbors, metric)
    rho, sigma = calibrate_bandwidths(dists)
    n = points.shape[0]
    directed = np.zeros((n, n))
    for i in range(n):
        w = np.exp(-np.maximum(dists[i] - rho[i], 0.0) / sigma[i])
        directed[i, idx[i]] = w
    sym = directed + directed.T - directed * directed.T
    np.fill_diagonal(sym, 0.0)
    return sym


# -- spectral init -----------------------------------------------------------

def _connected_components(adj: np.ndarray) -> list[np.ndarray]:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = [start]
        while stack:
            p = stack.pop()
            for q in np.flatnonzero(adj[p] > 0):
                if not seen[q]:
                    seen[q] = True
                    comp.append(int(q))
                    stack.append(int(q))
        comps.append(np.array(sorted(comp)))
    return comps


def _component_spectral(graph: np.ndarray, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Leading non-trivial eigenvectors of the normalized Laplacian with a
    deterministic sign convention; random fallback for tiny components."""
    m = graph.shape[0]
    if m <= dim + 1:
        return rng.normal(scale=1.0, size=(m, dim))
    deg = graph.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-12))
    lap = np.eye(m) - (inv_sqrt[:, None] * graph) * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh(lap)
    init = vecs[:, 1:dim + 1].copy()
    for col in range(init.shape[1]):
        pivot = np.argmax(np.abs(init[:, col]))
        if init[pivot, col] < 0:
            init[:, col] *= -1.0
    return init


def spectral_init(graph: np.ndarray, dim: int, seed: int) -> np.ndarray:
    """Spectral embedding of the fuzzy graph; disconnected components are
    laid out separately with seeded random offsets."""
    rng = np.random.default_rng(seed)
    comps = _connected_components(graph)
    n = graph.shape[0]
    init = np.zeros((n, dim))
    if len(comps) == 1:
        init = _component_spectral(graph, dim, rng)
    else:
        for comp in comps:
            block = _component_spectral(graph[np.ix_(comp, comp)], dim, rng)
            scale = np.max(np.abs(block))
            if scale > 0:
                block = block / scale
            offset = rng.normal(scale=10.0, size=dim)
            init[comp] = block + offset
    # normalize to the layout box [0, 10] and break exact coincidences
    span = init.max(axis=0) - init.min(axis=0)
    span[span == 0.0] = 1.0
    init = 10.0 * (init - init.min(axis=0)) / span
    init = init + rng.normal(scale=1e-4, size=init.shape)
    return init.astype(np.float32)


# -- SGD layout --------------------------------------------------------------

@njit(cache=True)
def _tau_rand_int(state):
    state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
        (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19)
    state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
        (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25)
    state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
        (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11)
    return state[0] ^ state[1] ^ state[2]


@njit(cache=True)
def _clip(val):
    if val > 4.0:
        return 4.0
    if val < -4.0:
        return -4.0
    return val


@njit(cache=True)
def _optimize_layout(embedding, head, tail, n_epochs, epochs_per_sample,
                     a, b, gamma, initial_alpha, negative_sample_rate, rng_state):
    """Serial negative-sampling SGD over the fuzzy graph edges.

    The edge schedule depends only on weights and epochs; the only
    randomness is the taus88 stream for negative sample targets, so a
    fixed rng_state reproduces the layout bit for bit.
    """
    n_vertices = embedding.shape[0]
    dim = embedding.shape[1]
    n_edges = head.shape[0]
    epoch_of_next_sample = epochs_per_sample.copy()
    epochs_per_negative = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative = epochs_per_negative.copy()

    for epoch in range(n_epochs):
        alpha = initial_alpha * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if epoch_of_next_sample[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            dist_sq = 0.0
            for d in range(dim):
                diff = embedding[i, d] - embedding[j, d]
                dist_sq += diff * diff
            if dist_sq > 0.0:
                coeff = (-2.0 * a * b * dist_sq ** (b - 1.0)) / (a * dist_sq**b + 1.0)
            else:
                coeff = 0.0
            for d in range(dim):
                grad = _clip(coeff * (embedding[i, d] - embedding[j, d]))
                embedding[i, d] += grad * alpha
                embedding[j, d] -= grad * alpha
            epoch_of_next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - epoch_of_next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                t = _tau_rand_int(rng_state) % n_vertices
                if t < 0:
                    t += n_vertices
                if t == i:
                    continue
                dist_sq = 0.0
                for d in range(dim):
                    diff = embedding[i, d] - embedding[t, d]
                    dist_sq += diff * diff
                if dist_sq > 0.0:
                    coeff = (2.0 * gamma * b) / ((0.001 + dist_sq) * (a * dist_sq**b + 1.0))
                else:
                    coeff = 0.0
                for d in range(dim):
                    if coeff > 0.0:
                        grad = _clip(coeff * (embedding[i, d] - embedding[t, d]))
                    else:
                        grad = 4.0
                    embedding[i, d] += grad * alpha
            epoch_of_next_negative[e] += n_neg * epochs_per_negative[e]


def _graph_edges(graph: np.ndarray):
    """Deterministic COO listing (row-major) of the symmetric graph."""
    rows, cols = np.nonzero(graph)
    return rows.astype(np.int64), cols.astype(np.int64), graph[rows, cols]


def umap_fit(points: np.ndarray, spec: ProjectionSpec) -> ProjectedSpace:
    """Standard UMAP: fuzzy graph, curve fit, spectral init, SGD layout.

    Deterministic under a fixed spec seed; serial edge schedule."""
    if spec.family != "umap":
        raise ValueError("umap_fit requires a umap spec")
    points = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(points)):
        raise ValueError("non-finite input")
    p = spec.umap_params
    if points.shape[0] < p.n_neighbors + 1:
        raise ValueError("need at least n_neighbors + 1 points")

    graph = fuzzy_graph(points, p.n_neighbors, p.metric)
    a, b = fit_curve_params(p.min_dist, p.spread)
    embedding = spectral_init(graph, spec.out_dim, spec.seed)

    head, tail, weights = _graph_edges(graph)
    epochs_per_sample = weights.max() / weights
    rng = np.random.default_rng(spec.seed)
    rng_state = rng.integers(1 << 16, 1 << 31, size=3).astype(np.int64)
    _optimize_layout(embedding, head, tail, int(p.n_epochs),
                     epochs_per_sample.astype(np.float64), float(a), float(b),
                     1.0, 1.0, int(p.negative_sample_rate), rng_state)
    return ProjectedSpace(spec=spec, coordinates=embedding.astype(np.float64),
                          source_fingerprint=matrix_fingerprint(points))


def project(points: np.ndarray, spec: ProjectionSpec) -> ProjectedSpace:
    """Dispatch to the identity, truncated SVD, or UMAP projection."""
    points = np.asarray(points, dtype=np.float64)
    if spec.family == "raw":
        coords = points.copy()
    elif spec.family == "svd":
        coords = svd_reduce(points, spec.out_dim, seed=spec.seed)
    else:
        return umap_fit(points, spec)
    return ProjectedSpace(spec=spec, coordinates=coords,
                          source_fingerprint=matrix_fingerprint(points))


# -- export ------------------------------------------------------------------

def save_projection(space: ProjectedSpace, json_path, block_path) -> None:
    header = {"spec": space.spec.to_dict(),
              "source_fingerprint": space.source_fingerprint,
              "block_file": Path(block_path).name}
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    blockio.write_matrix_blocks(block_path, {"coordinates": space.coordinates})


def load_projection(json_path, block_path=None) -> ProjectedSpace:
    with open(json_path, "r", encoding="utf-8") as fh:
        header = json.load(fh)
    if block_path is None:
        block_path = Path(json_path).parent / header["block_file"]
    blocks = blockio.read_matrix_blocks(block_path)
    return ProjectedSpace(spec=ProjectionSpec.from_dict(header["spec"]),
                          coordinates=blocks["coordinates"],
                          source_fingerprint=header["source_fingerprint"])
