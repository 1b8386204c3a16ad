"""The representation-space-algorithm sweep.

Enumerates the trial grid deterministically under a stratified cap,
executes trials through a shared projection cache, applies the
trustworthiness/continuity guardrails, runs seed-variation and bootstrap
stability analyses, and ranks results into complete-assignment and
density tracks.
"""

from __future__ import annotations

import csv
import hashlib
import json
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .clustering import ClusterAssignment, agglomerative_cluster, dbscan, optics
from .codebook import Codebook, kmeans
from .corpus import Corpus, EmbeddingTable
from .features import FeatureMatrix, FeatureVariant, build_features
from .metrics import MetricBundle
from .projection import ProjectedSpace, ProjectionSpec, UmapParams, project

ALGORITHMS = ("kmeans", "agglomerative", "dbscan", "optics")


class SweepError(ValueError):
    """Invalid sweep configuration or empty grid."""


@dataclass(frozen=True)
class ClusteringSpec:
    """One clustering configuration of the sweep grid.

    Density parameters are stored symbolically (eps as a percentile of
    the pairwise distances of the projected space) so one grid spans
    spaces of different scales; the resolved eps lands in the result.
    """
    algorithm: str
    k: int | None = None
    linkage: str | None = None
    eps_percentile: float | None = None
    min_samples: int | None = None
    xi: float | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SweepError(f"unknown algorithm {self.algorithm!r}")
        partitional = self.algorithm in ("kmeans", "agglomerative")
        if partitional != (self.k is not None):
            raise SweepError("k present iff algorithm is partitional")
        if (self.algorithm == "agglomerative") != (self.linkage is not None):
            raise SweepError("linkage present iff agglomerative")
        if (self.algorithm == "dbscan") != (self.eps_percentile is not None):
            raise SweepError("eps_percentile present iff dbscan")
        if (self.algorithm == "optics") != (self.xi is not None):
            raise SweepError("xi present iff optics")
        if self.algorithm in ("dbscan", "optics") and self.min_samples is None:
            raise SweepError("density algorithms need min_samples")

    @property
    def partitional(self) -> bool:
        return self.algorithm in ("kmeans", "agglomerative")

    def key(self) -> str:
        if self.algorithm == "kmeans":
            return f"kmeans-k{self.k}"
        if self.algorithm == "agglomerative":
            return f"agglomerative-{self.linkage}-k{self.k}"
        if self.algorithm == "dbscan":
            return f"dbscan-p{self.eps_percentile:g}-ms{self.min_samples}"
        return f"optics-xi{self.xi:g}-ms{self.min_samples}"

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "k": self.k, "linkage": self.linkage,
                "eps_percentile": self.eps_percentile,
                "min_samples": self.min_samples, "xi": self.xi}

    @classmethod
    def from_dict(cls, d: dict) -> "ClusteringSpec":
        return cls(**d)


def default_feature_variants() -> list[FeatureVariant]:
    """The 8 representations of the sweep: TF-IDF and its SVD cuts,
    BM25, binary, raw counts, and quantized centroid embeddings."""
    return [
        FeatureVariant("tfidf_counts"),
        FeatureVariant("tfidf_counts", svd_dim=50),
        FeatureVariant("tfidf_counts", svd_dim=100),
        FeatureVariant("tfidf_counts", svd_dim=150),
        FeatureVariant("bm25_counts"),
        FeatureVariant("binary"),
        FeatureVariant("raw_counts"),
        FeatureVariant("quantized_embed"),
    ]


def default_projection_specs() -> list[ProjectionSpec]:
    """RAW + SVD 50/100/150 + the 3x3x3 UMAP grid (cosine)."""
    specs = [ProjectionSpec("raw")]
    specs += [ProjectionSpec("svd", d) for d in (50, 100, 150)]
    for out_dim in (4, 8, 16):
        for nn in (10, 15, 30):
            for md in (0.01, 0.1, 0.5):
                specs.append(ProjectionSpec(
                    "umap", out_dim,
                    UmapParams(n_neighbors=nn, min_dist=md, metric="cosine")))
    return specs


@dataclass(frozen=True)
class SweepConfig:
    feature_variants: tuple[FeatureVariant, ...] = ()
    projection_specs: tuple[ProjectionSpec, ...] = ()
    k_list: tuple[int, ...] = tuple(range(2, 16))
    algorithms: tuple[str, ...] = ALGORITHMS
    linkages: tuple[str, ...] = ("average", "complete", "ward")
    eps_percentiles: tuple[float, ...] = (10.0, 25.0, 50.0)
    dbscan_min_samples: tuple[int, ...] = (3, 5, 10)
    xi_values: tuple[float, ...] = (0.03, 0.05, 0.1)
    optics_min_samples: tuple[int, ...] = (3, 5, 10)
    max_trials: int = 800
    guardrail_trust: float = 0.80
    guardrail_cont: float = 0.80
    neighborhood_k: int = 10
    stability_reps: int = 5
    base_seed: int = 42
    allow_missing: bool = False

    def __post_init__(self):
        if self.max_trials < 1:
            raise SweepError("max_trials must be >= 1")
        if not self.feature_variants:
            object.__setattr__(self, "feature_variants", tuple(default_feature_variants()))
        if not self.projection_specs:
            object.__setattr__(self, "projection_specs", tuple(default_projection_specs()))
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise SweepError(f"unknown algorithms {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "feature_variants": [v.to_dict() for v in self.feature_variants],
            "projection_specs": [s.to_dict() for s in self.projection_specs],
            "k_list": list(self.k_list),
            "algorithms": list(self.algorithms),
            "linkages": list(self.linkages),
            "eps_percentiles": list(self.eps_percentiles),
            "dbscan_min_samples": list(self.dbscan_min_samples),
            "xi_values": list(self.xi_values),
            "optics_min_samples": list(self.optics_min_samples),
            "max_trials": self.max_trials,
            "guardrail_trust": self.guardrail_trust,
            "guardrail_cont": self.guardrail_cont,
            "neighborhood_k": self.neighborhood_k,
            "stability_reps": self.stability_reps,
            "base_seed": self.base_seed,
            "allow_missing": self.allow_missing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        if "feature_variants" in d:
            d["feature_variants"] = tuple(FeatureVariant.from_dict(v)
                                          for v in d["feature_variants"])
        if "projection_specs" in d:
            d["projection_specs"] = tuple(ProjectionSpec.from_dict(s)
                                          for s in d["projection_specs"])
        for key in ("k_list", "algorithms", "linkages", "eps_percentiles",
                    "dbscan_min_samples", "xi_values", "optics_min_samples"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class TrialSpec:
    trial_id: int
    feature_variant: FeatureVariant
    projection_spec: ProjectionSpec
    clustering_spec: ClusteringSpec
    derived_seed: int

    def key(self) -> str:
        return "|".join([self.feature_variant.key(), self.projection_spec.key(),
                         self.clustering_spec.key()])

    def to_dict(self) -> dict:
        return {"trial_id": self.trial_id,
                "feature_variant": self.feature_variant.to_dict(),
                "projection_spec": self.projection_spec.to_dict(),
                "clustering_spec": self.clustering_spec.to_dict(),
                "derived_seed": self.derived_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "TrialSpec":
        return cls(trial_id=int(d["trial_id"]),
                   feature_variant=FeatureVariant.from_dict(d["feature_variant"]),
                   projection_spec=ProjectionSpec.from_dict(d["projection_spec"]),
                   clustering_spec=ClusteringSpec.from_dict(d["clustering_spec"]),
                   derived_seed=int(d["derived_seed"]))


@dataclass(frozen=True)
class StabilityReport:
    seed_silhouettes: tuple[float, ...]
    mean: float
    std: float
    cv: float
    pairwise_ari: tuple[float, ...]
    pairwise_nmi: tuple[float, ...]
    bootstrap_ari_to_reference: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"seed_silhouettes": list(self.seed_silhouettes),
                "mean": self.mean, "std": self.std, "cv": self.cv,
                "pairwise_ari": list(self.pairwise_ari),
                "pairwise_nmi": list(self.pairwise_nmi),
                "bootstrap_ari_to_reference": list(self.bootstrap_ari_to_reference)}


@dataclass(frozen=True)
class TrialResult:
    spec: TrialSpec
    metrics: MetricBundle | None
    passed_guardrails: bool
    guardrail_vacuous: bool
    labels: np.ndarray | None
    resolved_eps: float | None
    error: str | None
    wall_time: float = 0.0  # informational only; never serialized

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        rec = self.spec.to_dict()
        rec["passed_guardrails"] = self.passed_guardrails
        rec["guardrail_vacuous"] = self.guardrail_vacuous
        rec["resolved_eps"] = self.resolved_eps
        rec["error"] = self.error
        if self.metrics is not None:
            rec["metrics"] = {"silhouette": self.metrics.silhouette,
                              "trustworthiness": self.metrics.trustworthiness,
                              "continuity": self.metrics.continuity,
                              "noise_ratio": self.metrics.noise_ratio,
                              "n_clusters": self.metrics.n_clusters}
        else:
            rec["metrics"] = None
        rec["labels"] = self.labels.tolist() if self.labels is not None else None
        return rec


# -- enumeration ---------------------------------------------------------------

def _content_seed(base_seed: int, *keys: str) -> int:
    digest = hashlib.sha256("|".join(keys).encode("utf-8")).digest()
    return (base_seed ^ int.from_bytes(digest[:4], "little")) & 0x7FFFFFFF


def _grid_sort_key(spec: ClusteringSpec):
    return (spec.algorithm, spec.linkage or "", spec.k or 0,
            spec.eps_percentile or 0.0, spec.xi or 0.0, spec.min_samples or 0)


def _clustering_grid(config: SweepConfig) -> list[ClusteringSpec]:
    grid: list[ClusteringSpec] = []
    if "kmeans" in config.algorithms:
        grid += [ClusteringSpec("kmeans", k=k) for k in config.k_list]
    if "agglomerative" in config.algorithms:
        grid += [ClusteringSpec("agglomerative", k=k, linkage=linkage)
                 for linkage in config.linkages for k in config.k_list]
    if "dbscan" in config.algorithms:
        grid += [ClusteringSpec("dbscan", eps_percentile=p, min_samples=ms)
                 for p in config.eps_percentiles for ms in config.dbscan_min_samples]
    if "optics" in config.algorithms:
        grid += [ClusteringSpec("optics", xi=xi, min_samples=ms)
                 for xi in config.xi_values for ms in config.optics_min_samples]
    # canonical order: configured list order must not leak into trial ids
    return sorted(grid, key=_grid_sort_key)


def enumerate_trials(config: SweepConfig, n_rows: int | None = None) -> list[TrialSpec]:
    """Full cross product in canonical (feature, space, algorithm) order,
    capped at max_trials by a round-robin interleave over the four
    algorithm families so no family is starved.

    Seeds derive from content hashes, so permuting the configured lists
    or adding a variant never changes another trial's randomness.
    ``n_rows``, when known, drops projections that cannot fit the data.
    """
    variants = sorted(config.feature_variants, key=lambda v: v.key())
    spaces = sorted(config.projection_specs, key=lambda s: s.key())
    if n_rows is not None:
        spaces = [s for s in spaces
                  if s.family == "raw"
                  or (s.family == "svd" and s.out_dim <= n_rows)
                  or (s.family == "umap" and s.umap_params.n_neighbors + 1 <= n_rows)]
    grid = _clustering_grid(config)
    if not variants or not spaces or not grid:
        raise SweepError("empty sweep grid")

    all_specs: list[TrialSpec] = []
    trial_id = 0
    for variant in variants:
        for space in spaces:
            seeded_space = replace(space, seed=_content_seed(
                config.base_seed, "projection", variant.key(), space.key()))
            for cspec in grid:
                seed = _content_seed(config.base_seed, "trial", variant.key(),
                                     space.key(), cspec.key())
                all_specs.append(TrialSpec(
                    trial_id=trial_id, feature_variant=variant,
                    projection_spec=seeded_space, clustering_spec=cspec,
                    derived_seed=seed))
                trial_id += 1

    if len(all_specs) <= config.max_trials:
        return all_specs

    by_family: dict[str, list[TrialSpec]] = {a: [] for a in ALGORITHMS}
    for spec in all_specs:
        by_family[spec.clustering_spec.algorithm].append(spec)
    queues = [q for q in (by_family[a] for a in ALGORITHMS) if q]
    picked: list[TrialSpec] = []
    cursor = [0] * len(queues)
    while len(picked) < config.max_trials:
        progressed = False
        for qi, queue in enumerate(queues):
            if cursor[qi] < len(queue) and len(picked) < config.max_trials:
                picked.append(queue[cursor[qi]])
                cursor[qi] += 1
                progressed = True
        if not progressed:
            break
    picked.sort(key=lambda s: s.trial_id)
    return picked


# -- execution -----------------------------------------------------------------

class PipelineCache:
    """Thread-safe, compute-once cache for feature matrices, projections,
    and the per-(feature, space) neighborhood-preservation pair."""

    def __init__(self, corpus: Corpus, codebook: Codebook, table: EmbeddingTable,
                 allow_missing: bool = False, enabled: bool = True):
        self.corpus = corpus
        self.codebook = codebook
        self.table = table
        self.allow_missing = allow_missing
        self.enabled = enabled
        self._lock = threading.Lock()
        self._futures: dict[tuple, Future] = {}

    def _once(self, key, compute):
        if not self.enabled:
            return compute()
        with self._lock:
            fut = self._futures.get(key)
            owner = fut is None
            if owner:
                fut = Future()
                self._futures[key] = fut
        if owner:
            try:
                fut.set_result(compute())
            except BaseException as exc:
                fut.set_exception(exc)
        return fut.result()

    def features(self, variant: FeatureVariant) -> FeatureMatrix:
        return self._once(("features", variant.key()), lambda: build_features(
            self.corpus, self.codebook, self.table, variant,
            allow_missing=self.allow_missing))

    def projection(self, variant: FeatureVariant, spec: ProjectionSpec) -> ProjectedSpace:
        fm = self.features(variant)
        return self._once(("projection", fm.fingerprint(), spec.key()),
                          lambda: project(fm.values, spec))

    def preservation(self, variant: FeatureVariant, spec: ProjectionSpec,
                     k: int) -> tuple[float, float]:
        fm = self.features(variant)
        space = self.projection(variant, spec)
        return self._once(
            ("preservation", fm.fingerprint(), spec.key(), k),
            lambda: metrics.neighborhood_preservation(fm.values, space.coordinates, k))


def _run_clustering(cspec: ClusteringSpec, coords: np.ndarray,
                    seed: int) -> tuple[ClusterAssignment, float | None]:
    """Execute one clustering spec in a projected space; returns the
    assignment and the resolved eps for dbscan."""
    if cspec.algorithm == "kmeans":
        _, labels, _ = kmeans(coords, cspec.k, seed=seed, mode="full")
        labs = np.asarray(labels)
        dense = np.unique(labs)
        remap = {int(c): i for i, c in enumerate(dense)}
        labels = np.array([remap[int(c)] for c in labs])
        return ClusterAssignment(labels=labels, n_clusters=len(dense), noise_count=0), None
    if cspec.algorithm == "agglomerative":
        return agglomerative_cluster(coords, cspec.k, cspec.linkage), None
    d = metrics.pairwise_distances(coords)
    upper = d[np.triu_indices_from(d, k=1)]
    if cspec.algorithm == "dbscan":
        eps = float(np.percentile(upper, cspec.eps_percentile))
        if eps <= 0:
            eps = float(upper[upper > 0].min()) if np.any(upper > 0) else 1.0
        return dbscan(coords, eps, cspec.min_samples), eps
    return optics(coords, cspec.min_samples, cspec.xi), None


def run_trial(spec: TrialSpec, cache: PipelineCache, config: SweepConfig) -> TrialResult:
    """Build (or reuse) features and projection, cluster, and measure.

    Degenerate outcomes (undefined silhouette, unusable projection) are
    captured as error-marked results and never raise."""
    try:
        space = cache.projection(spec.feature_variant, spec.projection_spec)
        assignment, resolved_eps = _run_clustering(
            spec.clustering_spec, space.coordinates, spec.derived_seed)
        trust, cont = cache.preservation(
            spec.feature_variant, spec.projection_spec, config.neighborhood_k)
        sil = metrics.silhouette(space.coordinates, assignment.labels)
    except Exception as exc:
        return TrialResult(spec=spec, metrics=None, passed_guardrails=False,
                           guardrail_vacuous=False, labels=None, resolved_eps=None,
                           error=f"{type(exc).__name__}: {exc}")
    bundle = MetricBundle(
        silhouette=sil, trustworthiness=trust, continuity=cont,
        noise_ratio=metrics.noise_ratio(assignment.labels),
        n_clusters=assignment.n_clusters)
    vacuous = spec.projection_spec.family in ("raw", "svd")
    passed = vacuous or (trust >= config.guardrail_trust and cont >= config.guardrail_cont)
    return TrialResult(spec=spec, metrics=bundle, passed_guardrails=passed,
                       guardrail_vacuous=vacuous, labels=assignment.labels,
                       resolved_eps=resolved_eps, error=None)


def run_sweep(config: SweepConfig, corpus: Corpus, codebook: Codebook,
              table: EmbeddingTable, jobs: int = 1,
              cache: PipelineCache | None = None,
              progress=None) -> "SweepReport":
    """Execute the full capped sweep; output is schedule-independent."""
    cache = cache or PipelineCache(corpus, codebook, table,
                                   allow_missing=config.allow_missing)
    specs = enumerate_trials(config, n_rows=len(corpus.works))
    results: dict[int, TrialResult] = {}
    if jobs <= 1:
        for i, spec in enumerate(specs):
            results[spec.trial_id] = run_trial(spec, cache, config)
            if progress:
                progress(i + 1, len(specs))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run_trial, spec, cache, config): spec for spec in specs}
            for done, fut in enumerate(list(futures)):
                spec = futures[fut]
                results[spec.trial_id] = fut.result()
                if progress:
                    progress(done + 1, len(specs))
    ordered = [results[spec.trial_id] for spec in specs]
    return rank_trials(ordered, config)


# -- ranking -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepReport:
    config: SweepConfig
    results: tuple[TrialResult, ...]
    complete_track: tuple[int, ...]
    density_track: tuple[int, ...]
    per_algorithm_best: dict[str, int]
    headline: int | None

    def result_by_id(self, trial_id: int) -> TrialResult:
        for r in self.results:
            if r.spec.trial_id == trial_id:
                return r
        raise KeyError(f"no trial {trial_id}")

    @property
    def headline_result(self) -> TrialResult | None:
        return self.result_by_id(self.headline) if self.headline is not None else None


def _rank_key(result: TrialResult):
    c = result.spec.clustering_spec
    return (-result.metrics.silhouette, c.k if c.k is not None else 0,
            result.spec.trial_id)


def rank_trials(results: list[TrialResult], config: SweepConfig) -> SweepReport:
    """Two ranked tables: the complete-assignment track (partitional,
    guardrails passed) that names the headline winner, and the density
    track reported alongside but excluded from headline selection."""
    valid = [r for r in results if r.ok and r.metrics is not None]
    if not valid:
        raise SweepError("no valid trial results to rank")
    complete = sorted(
        (r for r in valid if r.spec.clustering_spec.partitional and r.passed_guardrails),
        key=_rank_key)
    density = sorted(
        (r for r in valid if not r.spec.clustering_spec.partitional),
        key=_rank_key)
    best: dict[str, int] = {}
    for algo in ALGORITHMS:
        pool = [r for r in valid if r.spec.clustering_spec.algorithm == algo
                and r.passed_guardrails]
        if pool:
            best[algo] = min(pool, key=_rank_key).spec.trial_id
    return SweepReport(
        config=config,
        results=tuple(results),
        complete_track=tuple(r.spec.trial_id for r in complete),
        density_track=tuple(r.spec.trial_id for r in density),
        per_algorithm_best=best,
        headline=complete[0].spec.trial_id if complete else None)


# -- stability -----------------------------------------------------------------

def stability(spec: TrialSpec, cache: PipelineCache, config: SweepConfig,
              reps: int | None = None) -> StabilityReport:
    """Two distinct analyses on one configuration.

    Seed variation reruns projection+clustering under seeds base..base+r-1
    and reports silhouette spread plus pairwise label agreement; the
    bootstrap resamples works with replacement, reclusters the resampled
    projection rows, and scores ARI against the reference labels over the
    distinct sampled works."""
    reps = reps or config.stability_reps
    fm = cache.features(spec.feature_variant)

    sils: list[float] = []
    label_sets: list[np.ndarray] = []
    for offset in range(reps):
        seed = config.base_seed + offset
        pspec = spec.projection_spec
        if pspec.family == "umap":
            pspec = replace(pspec, seed=seed)
        space = cache.projection(spec.feature_variant, pspec)
        assignment, _ = _run_clustering(spec.clustering_spec, space.coordinates, seed)
        sils.append(metrics.silhouette(space.coordinates, assignment.labels))
        label_sets.append(assignment.labels)

    mean = float(np.mean(sils))
    std = float(np.std(sils, ddof=1)) if reps > 1 else 0.0
    cv = std / abs(mean) if mean != 0 else 0.0
    pairwise_ari = tuple(metrics.ari(label_sets[i], label_sets[j])
                         for i in range(reps) for j in range(i + 1, reps))
    pairwise_nmi = tuple(metrics.nmi(label_sets[i], label_sets[j])
                         for i in range(reps) for j in range(i + 1, reps))

    # bootstrap against the reference run of this exact spec
    ref_space = cache.projection(spec.feature_variant, spec.projection_spec)
    ref_assignment, _ = _run_clustering(spec.clustering_spec, ref_space.coordinates,
                                        spec.derived_seed)
    n = ref_space.coordinates.shape[0]
    rng = np.random.default_rng(spec.derived_seed ^ 0xB007)
    boot_scores: list[float] = []
    for rep in range(reps):
        idx = rng.integers(0, n, size=n)
        coords = ref_space.coordinates[idx]
        assignment, _ = _run_clustering(spec.clustering_spec, coords,
                                        spec.derived_seed + rep + 1)
        distinct, first_pos = np.unique(idx, return_index=True)
        boot_labels = assignment.labels[first_pos]
        ref_labels = ref_assignment.labels[distinct]
        boot_scores.append(metrics.ari(boot_labels, ref_labels))

    return StabilityReport(
        seed_silhouettes=tuple(sils), mean=mean, std=std, cv=cv,
        pairwise_ari=pairwise_ari, pairwise_nmi=pairwise_nmi,
        bootstrap_ari_to_reference=tuple(boot_scores))


# -- diagnostics ---------------------------------------------------------------

def gap_statistic(points: np.ndarray, k_list, seed: int = 42,
                  n_refs: int = 10) -> dict[int, tuple[float, float]]:
    """Gap statistic diagnostic (uniform bounding-box references).

    Returns {k: (gap, s_k)}; corroboration only, never part of ranking."""
    points = np.asarray(points, dtype=np.float64)
    rng = np.random.default_rng(seed)
    lo, hi = points.min(axis=0), points.max(axis=0)

    def log_wk(data, k, kseed):
        _, labels, _ = kmeans(data, k, seed=kseed, mode="full")
        total = 0.0
        for c in np.unique(labels):
            members = data[labels == c]
            if len(members) > 1:
                total += float(np.sum((members - members.mean(axis=0)) ** 2))
        return np.log(max(total, 1e-12))

    out: dict[int, tuple[float, float]] = {}
    for k in k_list:
        ref_logs = []
        for r in range(n_refs):
            ref = rng.uniform(lo, hi, size=points.shape)
            ref_logs.append(log_wk(ref, k, seed + r + 1))
        ref_logs = np.array(ref_logs)
        gap = float(ref_logs.mean() - log_wk(points, k, seed))
        s_k = float(ref_logs.std(ddof=1) * np.sqrt(1 + 1 / n_refs)) if n_refs > 1 else 0.0
        out[k] = (gap, s_k)
    return out


# -- serialization -------------------------------------------------------------

def report_to_dict(report: SweepReport) -> dict:
    return {
        "config": report.config.to_dict(),
        "n_trials": len(report.results),
        "n_errors": sum(1 for r in report.results if not r.ok),
        "trials": [r.to_dict() for r in report.results],
        "complete_track": list(report.complete_track),
        "density_track": list(report.density_track),
        "per_algorithm_best": dict(sorted(report.per_algorithm_best.items())),
        "headline": report.headline,
    }


def save_report_json(report: SweepReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report_csv(report: SweepReport, path) -> None:
    fields = ["trial_id", "feature", "space", "algorithm", "params", "derived_seed",
              "silhouette", "trustworthiness", "continuity", "noise_ratio",
              "n_clusters", "resolved_eps", "passed_guardrails", "track", "error"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in report.results:
            c = r.spec.clustering_spec
            m = r.metrics
            writer.writerow([
                r.spec.trial_id, r.spec.feature_variant.key(),
                r.spec.projection_spec.key(), c.algorithm, c.key(),
                r.spec.derived_seed,
                repr(m.silhouette) if m else "",
                repr(m.trustworthiness) if m else "",
                repr(m.continuity) if m else "",
                repr(m.noise_ratio) if m else "",
                m.n_clusters if m else "",
                repr(r.resolved_eps) if r.resolved_eps is not None else "",
                r.passed_guardrails,
                "complete" if c.partitional else "density",
                r.error or ""])


def format_best_table(report: SweepReport) -> str:
    """Per-algorithm best runs, one row per algorithm."""
    lines = [f"{'Algorithm':<15} {'#Clusters':>9} {'Noise(%)':>9} "
             f"{'Silhouette':>11} {'Trust/Cont':>13}  Space"]
    for algo in ALGORITHMS:
        tid = report.per_algorithm_best.get(algo)
        if tid is None:
            lines.append(f"{algo:<15} {'-':>9} {'-':>9} {'-':>11} {'-':>13}  -")
            continue
        r = report.result_by_id(tid)
        m = r.metrics
        lines.append(
            f"{algo:<15} {m.n_clusters:>9} {100 * m.noise_ratio:>9.1f} "
            f"{m.silhouette:>11.3f} {m.trustworthiness:>6.3f}/{m.continuity:<6.3f} "
            f"{r.spec.projection_spec.key()} [{r.spec.feature_variant.key()}]")
    return "\n".join(lines)
