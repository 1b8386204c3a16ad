"""Artwork-level feature construction.

Per-axis codebook activations (raw / TF-IDF / BM25 / binary weighting),
quantized centroid-average embeddings, stage-1 axis-mean embeddings,
and truncated-SVD reduction, all behind one variant dispatch.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blockio
from .codebook import Codebook
from .corpus import Artwork, Corpus, EmbeddingTable, MissingKeywordError

COUNT_KINDS = ("tfidf_counts", "bm25_counts", "raw_counts", "binary")
KINDS = COUNT_KINDS + ("quantized_embed", "axis_mean_embed")


@dataclass(frozen=True)
class FeatureVariant:
    kind: str
    svd_dim: int | None = None
    l2_normalized: bool = True
    l2_scope: str = "row"  # "row" | "axis"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.l2_scope not in ("row", "axis"):
            raise ValueError(f"unknown l2 scope {self.l2_scope!r}")

    def key(self) -> str:
        parts = [self.kind]
        if self.svd_dim is not None:
            parts.append(f"svd{self.svd_dim}")
        parts.append("l2" if self.l2_normalized else "raw")
        if self.l2_normalized and self.l2_scope != "row":
            parts.append(self.l2_scope)
        return "-".join(parts)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "svd_dim": self.svd_dim,
                "l2_normalized": self.l2_normalized, "l2_scope": self.l2_scope}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVariant":
        return cls(**d)


@dataclass(frozen=True)
class FeatureMatrix:
    variant: FeatureVariant
    row_ids: tuple[str, ...]
    columns: tuple[tuple[str, int], ...]  # (axis, cluster) or (axis/"svd", component)
    values: np.ndarray

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.values.shape).encode())
        h.update(np.ascontiguousarray(self.values, dtype=np.float64).tobytes())
        return h.hexdigest()


def axis_mean_embedding(keywords, table: EmbeddingTable, allow_missing: bool = False) -> np.ndarray:
    """Arithmetic mean of the keyword vectors; empty list gives the zero
    vector of the table dimension."""
    vecs = []
    for kw in keywords:
        if kw not in table.entries:
            if allow_missing:
                continue
            raise MissingKeywordError(f"keyword {kw!r} missing from embedding table")
        vecs.append(np.asarray(table.entries[kw], dtype=np.float64))
    if not vecs:
        return np.zeros(table.dimension)
    return np.mean(vecs, axis=0)


def axis_cluster_counts(work: Artwork, codebook: Codebook) -> dict[tuple[str, int], int]:
    """Count of the work's keywords per (axis, concept-cluster)."""
    counts: dict[tuple[str, int], int] = {}
    for axis, kws in work.keywords_by_axis.items():
        for kw in kws:
            try:
                cluster = codebook.assignments[kw]
            except KeyError as exc:
                raise MissingKeywordError(
                    f"keyword {kw!r} of work {work.id!r} not in codebook") from exc
            key = (axis, cluster)
            counts[key] = counts.get(key, 0) + 1
    return counts


def weight_counts(counts: np.ndarray, mode: str, bm25_params=(1.2, 0.75)) -> np.ndarray:
    """Column weighting of a works x columns count matrix.

    tfidf : tf * (ln((1+N)/(1+df)) + 1), tf the raw count
    bm25  : idf * tf*(k1+1) / (tf + k1*(1 - b + b*len/avglen)),
            idf = ln(1 + (N - df + 0.5)/(df + 0.5)), len the work's total count
    binary: presence indicator; raw: pass-through.  No normalization here.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    n = counts.shape[0]
    if mode == "raw":
        return counts.copy()
    if mode == "binary":
        return (counts > 0).astype(np.float64)
    df = np.sum(counts > 0, axis=0)
    if mode == "tfidf":
        idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
        return counts * idf[None, :]
    if mode == "bm25":
        k1, b = bm25_params
        idf = np.log(1.0 + (n - df + 0.5) / (df + 0.5))
        lengths = counts.sum(axis=1)
        avg_len = lengths.mean() if n else 0.0
        if avg_len == 0.0:
            return np.zeros_like(counts)
        denom = counts + k1 * (1.0 - b + b * lengths[:, None] / avg_len)
        return idf[None, :] * counts * (k1 + 1.0) / denom
    raise ValueError(f"unknown weighting mode {mode!r}")


def quantized_axis_embeddings(counts: dict[tuple[str, int], int], axes,
                              codebook: Codebook) -> np.ndarray:
    """Per-axis count-weighted centroid average, axis blocks concatenated;
    an axis with no keywords contributes a zero block."""
    dim = codebook.retained_dim
    blocks = []
    for axis in axes:
        total = 0
        acc = np.zeros(dim)
        for (ax, cluster), cnt in counts.items():
            if ax == axis:
                acc += cnt * codebook.centroids[cluster]
                total += cnt
        blocks.append(acc / total if total else acc)
    return np.concatenate(blocks)


def _count_matrix(corpus: Corpus, codebook: Codebook):
    """Dense count matrix over the observed (axis, cluster) columns,
    ordered axis-major then cluster ascending."""
    per_work = [axis_cluster_counts(w, codebook) for w in corpus.works]
    observed = sorted(
        {key for counts in per_work for key in counts},
        key=lambda key: (corpus.axes.index(key[0]), key[1]))
    col_index = {key: i for i, key in enumerate(observed)}
    mat = np.zeros((len(corpus.works), len(observed)))
    for r, counts in enumerate(per_work):
        for key, cnt in counts.items():
            mat[r, col_index[key]] = cnt
    return mat, tuple(observed), per_work


def _normalize_rows(values: np.ndarray, columns, scope: str) -> np.ndarray:
    out = values.copy()
    if scope == "row":
        norms = np.linalg.norm(out, axis=1)
        nz = norms > 0
        out[nz] /= norms[nz, None]
        return out
    # per-axis blocks
    axes = [c[0] for c in columns]
    for axis in dict.fromkeys(axes):
        cols = [i for i, a in enumerate(axes) if a == axis]
        block = out[:, cols]
        norms = np.linalg.norm(block, axis=1)
        nz = norms > 0
        block[nz] /= norms[nz, None]
        out[:, cols] = block
    return out


def svd_reduce(matrix: np.ndarray, d: int, seed: int = 0) -> np.ndarray:
    """Project onto the top-d right singular directions.

    Deterministic sign convention: the largest-magnitude entry of each
    singular vector is made positive.  ``seed`` is accepted for interface
    symmetry; the exact LAPACK solve needs no randomness.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if not 1 <= d <= min(matrix.shape):
        raise ValueError(f"svd dimension {d} out of range for shape {matrix.shape}")
    _, svals, vt = np.linalg.svd(matrix, full_matrices=False)
    vt = vt[:d].copy()
    for row in vt:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return matrix @ vt.T


def build_features(corpus: Corpus, codebook: Codebook, table: EmbeddingTable,
                   variant: FeatureVariant, allow_missing: bool = False) -> FeatureMatrix:
    """Assemble the requested representation for every work.

    Row order is corpus (id-sorted) order; count-variant columns are the
    observed (axis, cluster) pairs in axis-major order.  L2 normalization,
    when requested, applies before any SVD reduction.
    """
    row_ids = tuple(corpus.work_ids())
    if variant.kind in COUNT_KINDS:
        mat, columns, _ = _count_matrix(corpus, codebook)
        mode = {"tfidf_counts": "tfidf", "bm25_counts": "bm25",
                "raw_counts": "raw", "binary": "binary"}[variant.kind]
        values = weight_counts(mat, mode)
    elif variant.kind == "quantized_embed":
        rows = []
        for w in corpus.works:
            counts = axis_cluster_counts(w, codebook)
            rows.append(quantized_axis_embeddings(counts, corpus.axes, codebook))
        values = np.vstack(rows) if rows else np.zeros((0, len(corpus.axes) * codebook.retained_dim))
        columns = tuple((axis, j) for axis in corpus.axes for j in range(codebook.retained_dim))
    elif variant.kind == "axis_mean_embed":
        rows = []
        for w in corpus.works:
            blocks = [axis_mean_embedding(w.keywords_by_axis.get(axis, ()), table,
                                          allow_missing=allow_missing)
                      for axis in corpus.axes]
            rows.append(np.concatenate(blocks))
        values = np.vstack(rows) if rows else np.zeros((0, len(corpus.axes) * table.dimension))
        columns = tuple((axis, j) for axis in corpus.axes for j in range(table.dimension))
    else:  # pragma: no cover - guarded by FeatureVariant
        raise ValueError(variant.kind)

    if variant.l2_normalized:
        values = _normalize_rows(values, columns, variant.l2_scope)
    if variant.svd_dim is not None:
        values = svd_reduce(values, variant.svd_dim)
        columns = tuple(("svd", j) for j in range(variant.svd_dim))
    return FeatureMatrix(variant=variant, row_ids=row_ids, columns=columns, values=values)


# -- export ------------------------------------------------------------------

def save_features(fm: FeatureMatrix, json_path, block_path, provenance: dict | None = None) -> None:
    header = {
        "variant": fm.variant.to_dict(),
        "row_ids": list(fm.row_ids),
        "columns": [[axis, int(i)] for axis, i in fm.columns],
        "fingerprint": fm.fingerprint(),
        "block_file": Path(block_path).name,
    }
    if provenance:
        header["provenance"] = provenance
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    blockio.write_matrix_blocks(block_path, {"values": np.asarray(fm.values, dtype=np.float64)})


def load_features(json_path, block_path=None) -> FeatureMatrix:
    with open(json_path, "r", encoding="utf-8") as fh:
        header = json.load(fh)
    if block_path is None:
        block_path = Path(json_path).parent / header["block_file"]
    blocks = blockio.read_matrix_blocks(block_path)
    return FeatureMatrix(
        variant=FeatureVariant.from_dict(header["variant"]),
        row_ids=tuple(header["row_ids"]),
        columns=tuple((axis, int(i)) for axis, i in header["columns"]),
        values=blocks["values"])


def export_features_csv(fm: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["work_id"] + [f"{axis}:{i}" for axis, i in fm.columns])
        for rid, row in zip(fm.row_ids, fm.values):
            writer.writerow([rid] + [repr(float(v)) for v in row])
