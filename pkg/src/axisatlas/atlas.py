"""Neighborhood analytics and atlas assembly.

Mutual k-NN membership, rank displacement, and group cohesion computed
in the headline projected space, plus the final atlas document (JSON
schema + self-contained static HTML export).
"""

from __future__ import annotations

import html
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .codebook import Codebook
from .corpus import Corpus
from .features import COUNT_KINDS, FeatureMatrix
from .metrics import pairwise_distances
from .projection import ProjectedSpace


@dataclass(frozen=True)
class NeighborhoodReport:
    k: int
    mutual_pairs: frozenset[tuple[str, str]]
    neighbor_lists: dict[str, tuple[str, ...]]  # id -> ids ranked by distance


def _ranked_neighbors(coords: np.ndarray, ids: list[str]) -> dict[str, list[str]]:
    """Full distance-ranked neighbor list per work, ties broken by id."""
    dist = pairwise_distances(coords)
    order = {}
    for i, wid in enumerate(ids):
        pairs = sorted((float(dist[i, j]), ids[j]) for j in range(len(ids)) if j != i)
        order[wid] = [other for _, other in pairs]
    return order


def mutual_knn(coords: np.ndarray, ids, k: int) -> NeighborhoodReport:
    """Exact k-NN per work (Euclidean); a pair is mutual iff each work
    appears among the other's k nearest."""
    ids = list(ids)
    n = len(ids)
    if not 1 <= k < n:
        raise ValueError(f"k={k} out of range for n={n}")
    ranked = _ranked_neighbors(np.asarray(coords, dtype=np.float64), ids)
    knn = {wid: set(ranked[wid][:k]) for wid in ids}
    pairs = set()
    for wid in ids:
        for other in knn[wid]:
            if wid in knn[other]:
                pairs.add(tuple(sorted((wid, other))))
    return NeighborhoodReport(
        k=k, mutual_pairs=frozenset(pairs),
        neighbor_lists={wid: tuple(ranked[wid]) for wid in ids})


def rank_displacement(coords: np.ndarray, ids, i: str, j: str) -> tuple[int, int]:
    """(rank of j among i's neighbors, rank of i among j's), 1 = nearest."""
    ids = list(ids)
    if i == j:
        raise ValueError("rank displacement needs two distinct works")
    if i not in ids or j not in ids:
        missing = i if i not in ids else j
        raise KeyError(f"unknown work id {missing!r}")
    ranked = _ranked_neighbors(np.asarray(coords, dtype=np.float64), ids)
    return ranked[i].index(j) + 1, ranked[j].index(i) + 1


def group_cohesion(coords: np.ndarray, ids, labels, group, k: int):
    """(mutual_fraction, mean_rank, same_cluster_fraction) for a set of
    works: how often group pairs are mutual k-NNs, their mean rank
    displacement over ordered pairs, and their label agreement."""
    ids = list(ids)
    group = sorted(set(group))
    if len(group) < 2:
        raise ValueError("group must contain at least 2 works")
    index = {wid: pos for pos, wid in enumerate(ids)}
    for wid in group:
        if wid not in index:
            raise KeyError(f"unknown work id {wid!r}")
    report = mutual_knn(coords, ids, k)
    labels = np.asarray(labels)

    pairs = [(a, b) for ai, a in enumerate(group) for b in group[ai + 1:]]
    mutual = sum(1 for a, b in pairs if (a, b) in report.mutual_pairs)
    same = sum(1 for a, b in pairs if labels[index[a]] == labels[index[b]])
    ranks = []
    for a, b in pairs:
        ranks.append(report.neighbor_lists[a].index(b) + 1)
        ranks.append(report.neighbor_lists[b].index(a) + 1)
    return mutual / len(pairs), float(np.mean(ranks)), same / len(pairs)


# -- atlas document -----------------------------------------------------------

def build_atlas(corpus: Corpus, space: ProjectedSpace, labels, codebook: Codebook,
                feature_matrix: FeatureMatrix, k: int = 5,
                provenance: dict | None = None, alt_labels=None) -> dict:
    """Assemble the atlas document for one headline trial.

    The 2-D display projection is the first two coordinates of the
    headline space (recorded as such in provenance, never a separate
    embedding).  Cluster summaries list the top (axis, concept) columns
    by aggregate TF-IDF mass with their member keywords.
    """
    coords = np.asarray(space.coordinates, dtype=np.float64)
    labels = np.asarray(labels)
    ids = corpus.work_ids()
    if not (len(ids) == coords.shape[0] == labels.shape[0] == len(feature_matrix.row_ids)):
        raise ValueError("corpus, coordinates, labels, and features disagree on rows")
    if coords.shape[1] < 2:
        raise ValueError("atlas needs at least 2 coordinates per work")
    report = mutual_knn(coords, ids, k)

    by_cluster: dict[int, list[int]] = {}
    for row, lab in enumerate(labels):
        by_cluster.setdefault(int(lab), []).append(row)

    cluster_to_keywords: dict[int, list[str]] = {}
    for kw, cl in codebook.assignments.items():
        cluster_to_keywords.setdefault(cl, []).append(kw)

    # Only the count-based variants carry (axis, concept-cluster) columns
    # whose indices refer to codebook clusters; SVD/embedding columns are
    # components with no keyword membership.
    concept_columns = feature_matrix.variant.kind in COUNT_KINDS and feature_matrix.variant.svd_dim is None
    clusters = []
    for lab in sorted(by_cluster):
        rows = by_cluster[lab]
        if lab == -1:
            clusters.append({"id": -1, "size": len(rows), "top_concepts": []})
            continue
        mass = feature_matrix.values[rows].sum(axis=0)
        order = np.argsort(-mass, kind="stable")[:5]
        top = []
        for col in order:
            if mass[col] <= 0:
                continue
            axis, concept = feature_matrix.columns[col]
            member_kws = sorted(cluster_to_keywords.get(concept, []))[:5] \
                if concept_columns else []
            top.append({"axis": axis, "cluster": int(concept),
                        "keywords": member_kws, "mass": float(mass[col])})
        clusters.append({"id": lab, "size": len(rows), "top_concepts": top})

    works = []
    for row, work in enumerate(corpus.works):
        neighbors = [{"id": other, "rank": r + 1}
                     for r, other in enumerate(report.neighbor_lists[work.id][:k])]
        entry = {
            "id": work.id, "title": work.title, "artist": work.artist,
            "year": work.year,
            "xy": [float(coords[row, 0]), float(coords[row, 1])],
            "coords": [float(v) for v in coords[row]],
            "cluster": int(labels[row]),
            "neighbors": neighbors,
        }
        if alt_labels is not None:
            entry["alt_cluster"] = int(np.asarray(alt_labels)[row])
        works.append(entry)

    doc = {
        "provenance": {
            "version": __version__,
            "display": "coords[:2] of the headline space",
            "projection_spec": space.spec.to_dict(),
            "source_fingerprint": space.source_fingerprint,
            "feature_fingerprint": feature_matrix.fingerprint(),
            "feature_variant": feature_matrix.variant.to_dict(),
            "neighborhood_k": k,
            **(provenance or {}),
        },
        "axes": list(corpus.axes),
        "works": works,
        "clusters": clusters,
        "mutual_pairs": sorted(list(p) for p in report.mutual_pairs),
    }
    return doc


def save_atlas(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def load_atlas(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# -- static HTML export --------------------------------------------------------

_PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
            "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#ff7f0e",
            "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def export_html(doc: dict, path, width: int = 900, height: int = 640) -> None:
    """One self-contained HTML file: embedded atlas JSON plus an inline
    SVG scatter of the 2-D display slice.  No external assets."""
    works = doc["works"]
    xs = np.array([w["xy"][0] for w in works])
    ys = np.array([w["xy"][1] for w in works])
    pad = 0.06
    span_x = (xs.max() - xs.min()) or 1.0
    span_y = (ys.max() - ys.min()) or 1.0

    def sx(x):
        return (pad + (1 - 2 * pad) * (x - xs.min()) / span_x) * width

    def sy(y):
        return (1 - pad - (1 - 2 * pad) * (y - ys.min()) / span_y) * height

    dots = []
    for w in works:
        color = "#666666" if w["cluster"] < 0 else _PALETTE[w["cluster"] % len(_PALETTE)]
        year = f" ({w['year']})" if w["year"] else ""
        label = html.escape(f"{w['title']} - {w['artist']}{year} [cluster {w['cluster']}]")
        dots.append(
            f'<circle cx="{sx(w["xy"][0]):.2f}" cy="{sy(w["xy"][1]):.2f}" r="6" '
            f'fill="{color}" fill-opacity="0.85" stroke="#333" stroke-width="0.5">'
            f"<title>{label}</title></circle>")

    legend = []
    for c in doc["clusters"]:
        if c["id"] < 0:
            continue
        color = _PALETTE[c["id"] % len(_PALETTE)]
        concepts = ", ".join(
            html.escape(t["keywords"][0]) for t in c["top_concepts"][:2] if t["keywords"])
        legend.append(f'<div><span style="background:{color}"></span>'
                      f'cluster {c["id"]} (n={c["size"]}) {concepts}</div>')

    payload = json.dumps(doc, sort_keys=True, ensure_ascii=False)
    page = f"""<!DOCTYPE html>
<html lang="en"><head><meta charset="utf-8">
<title>Axis Atlas</title>
<style>
 body {{ font-family: system-ui, sans-serif; margin: 1.5rem; color: #222; }}
 .legend div {{ margin: 2px 0; font-size: 13px; }}
 .legend span {{ display:inline-block; width:12px; height:12px; margin-right:6px;
                 border:1px solid #333; vertical-align:-1px; }}
 svg {{ border: 1px solid #ccc; background: #fafafa; }}
</style></head>
<body>
<h1>Axis Atlas</h1>
<p>{len(works)} works, {sum(1 for c in doc["clusters"] if c["id"] >= 0)} clusters.
Hover a point for details. Static export; the full document is embedded below.</p>
<svg width="{width}" height="{height}" viewBox="0 0 {width} {height}">
{chr(10).join(dots)}
</svg>
<div class="legend">
{chr(10).join(legend)}
</div>
<script id="atlas-data" type="application/json">
{payload}
</script>
</body></html>
"""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(page)
