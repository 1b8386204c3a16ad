#!/usr/bin/env python3
"""Generate the released-dataset-shaped fixture.

Writes data/fixture/corpus.json and data/fixture/embeddings.bin with the
published corpus statistics (81 works, 33 artists, 13 axes, 770 distinct
keywords, 2285 assignments) and planted concept/archetype structure so
the full sweep behaves like the real pipeline.  Fully deterministic.

Usage: python3 tools/make_fixture.py [--out-dir data/fixture] [--seed 9]
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from axisatlas import blockio  # noqa: E402
from axisatlas.corpus import load_corpus, load_embedding_table, validate_against  # noqa: E402

AXES = [
    "Materiality", "Methodology", "Actor Relations & Configurations",
    "Ethical Approach", "Aesthetic Strategy", "Epistemic Function",
    "Philosophical Stance", "Social Context", "Audience Engagement",
    "Temporal Scale", "Spatial Scale", "Power and Capital Critique",
    "Documentation & Representation",
]
# per-axis distinct keyword targets (total 821; 51 names shared across
# two axes bring the distinct count to 770)
AXIS_UNIQUE = [98, 88, 62, 53, 76, 54, 47, 44, 53, 44, 56, 61, 85]
# per-axis assignment totals; round(mean_per_work * 81), sums to 2285
AXIS_TOTAL = [209, 194, 176, 175, 208, 179, 181, 176, 162, 124, 120, 145, 236]
N_WORKS = 81
N_SHARED = sum(AXIS_UNIQUE) - 770

# 33 artists; work counts adapted from the published roster (three
# singleton artists gain one work so the roster covers all 81 works)
ARTIST_COUNTS = [4, 4, 2, 3, 3, 2, 1, 1, 1, 3, 2, 2, 2, 2, 2, 2, 2, 1, 1, 5,
                 4, 4, 3, 3, 3, 3, 3, 2, 2, 2, 2, 2, 3]

# uneven archetype sizes: fewer latent "practice families" than the
# headline k=15, so partitional methods must split the large ones
ARCHETYPE_SIZES = [20, 18, 6, 6, 6, 6, 5, 5, 5, 4]

EMBED_DIM = 2048
CONCEPTS_PER_AXIS = 16         # concept groups inside each axis vocabulary
MID_SLOTS = 6                  # concept slots reserved for satellite families
CONCEPT_SCALE = 10.0           # separation of concept centers
KEYWORD_NOISE = 1.5            # within-concept spread
PREFERRED_CONCEPTS = 2         # concepts an archetype prefers per axis
N_STYLES = 4                   # cross-cutting factor on the style axes
STYLE_AXES = (9, 10, 11, 12)   # axes driven by style, not archetype
COMMON_RATE = 0.12              # chance a keyword comes from the axis's
                               # common vocabulary shared by everyone
TIGHT_MIX_RATE = 0.08          # foreign-concept rate inside dense cores
SATELLITE_MIX_RATE = 0.08      # tight satellites: cohesive but blurred
LOOSE_MIX_RATE = 0.35          # foreign-concept rate, loose archetypes
WING_MIX_RATE = 0.45           # mega-family wings: on-theme but diffuse
FLOATER_MIX_RATE = 0.6        # boundary works drifting between archetypes
FLOATER_EVERY = 2              # every 2nd loose-family work is a floater
FILAMENT = 0                   # the drifting-filament family
NUCLEUS_FAMILY = 1             # the dense nucleus family


def axis_slug(axis: str) -> str:
    return "".join(ch for ch in axis.lower() if ch.isalnum())[:6]


def build_vocabulary(rng):
    """770 distinct names spread over the axes; 51 appear in two axes.

    Returns per-axis keyword lists, a name->concept map, and the
    per-axis concept ids."""
    names = [f"kw-{i:04d}" for i in range(770)]
    rng.shuffle(names)
    per_axis: list[list[str]] = []
    cursor = 0
    for a, count in enumerate(AXIS_UNIQUE):
        fresh = count if a < len(AXIS_UNIQUE) - 1 else 770 - cursor
        fresh = min(fresh, count, 770 - cursor)
        vocab = names[cursor:cursor + fresh]
        cursor += fresh
        per_axis.append(vocab)
    # recycle names across axes until every axis meets its target size
    donors = [kw for vocab in per_axis for kw in vocab]
    d = 0
    for a, count in enumerate(AXIS_UNIQUE):
        while len(per_axis[a]) < count:
            candidate = donors[d % len(donors)]
            d += 1
            if candidate not in per_axis[a]:
                per_axis[a].append(candidate)

    concept_of: dict[tuple[int, str], int] = {}
    concept_ids: list[list[int]] = []
    next_concept = 0
    for a, vocab in enumerate(per_axis):
        ids = list(range(next_concept, next_concept + CONCEPTS_PER_AXIS))
        next_concept += CONCEPTS_PER_AXIS
        concept_ids.append(ids)
        for i, kw in enumerate(vocab):
            concept_of[(a, kw)] = ids[i % CONCEPTS_PER_AXIS]
    return per_axis, concept_of, concept_ids


def build_embeddings(rng, per_axis, concept_of):
    """Keyword vector = center of its (first) concept + noise."""
    n_concepts = 1 + max(concept_of.values())
    centers = rng.normal(scale=CONCEPT_SCALE, size=(n_concepts, EMBED_DIM))
    vectors: dict[str, np.ndarray] = {}
    for a, vocab in enumerate(per_axis):
        for kw in vocab:
            if kw in vectors:
                continue  # shared keyword: keep its first-axis concept
            c = concept_of[(a, kw)]
            vec = centers[c] + rng.normal(scale=KEYWORD_NOISE, size=EMBED_DIM)
            vectors[kw] = vec.astype(np.float32)
    return vectors


def allocate_counts(rng):
    """Per-(work, axis) keyword counts hitting the axis totals exactly."""
    counts = np.zeros((N_WORKS, len(AXES)), dtype=int)
    for a, total in enumerate(AXIS_TOTAL):
        base, extra = divmod(total, N_WORKS)
        counts[:, a] = base
        bump = rng.permutation(N_WORKS)[:extra]
        counts[bump, a] += 1
    return counts


def assign_archetypes():
    arche = []
    for g, size in enumerate(ARCHETYPE_SIZES):
        arche += [g] * size
    assert len(arche) == N_WORKS
    return arche


def build_works(rng, per_axis, concept_of, concept_ids, counts, archetypes):
    """Sample keywords per work: archetype-preferred concepts most of the
    time, foreign concepts at the work's mix rate, no repeats per cell.

    Preferences are drawn independently per (archetype, axis) so every
    archetype has a distinct cross-axis signature; every FLOATER_EVERY-th
    work of an archetype drifts between concept pools, giving the map the
    density contrast the sweep's density methods key on."""
    n_arch = len(ARCHETYPE_SIZES)
    # Concept space partition per axis: slot 0 is the common vocabulary,
    # slots 1..MID_SLOTS the satellite-archetype range, and the tail the
    # filament's reserved corridor.  Keeping the ranges disjoint stops
    # satellites from sitting on the filament's path and chaining into
    # its density cores.
    from itertools import combinations
    mid_range = list(range(1, 1 + MID_SLOTS))
    combos = list(combinations(mid_range, 2))
    prefs: dict[tuple[int, int], list[int]] = {}
    for a in range(len(AXES)):
        ids = concept_ids[a]
        order = rng.permutation(len(combos))
        for g in range(n_arch):
            picked = combos[order[(g - 2) % len(combos)]] if g >= 2 else \
                tuple(int(c) for c in rng.choice(mid_range, size=PREFERRED_CONCEPTS, replace=False))
            prefs[(g, a)] = [ids[picked[0]], ids[picked[1]]]
    style_prefs: dict[tuple[int, int], list[int]] = {}
    for s in range(N_STYLES):
        for a in STYLE_AXES:
            ids = concept_ids[a]
            chosen = rng.choice(mid_range, size=PREFERRED_CONCEPTS, replace=False)
            style_prefs[(s, a)] = [ids[int(c)] for c in chosen]
    # macro-groups of loose satellites share a backbone concept on the even
    # axes: the map keeps a stable coarse structure across layout seeds
    # without packing tight families into joint density pockets
    macros = ((3, 5), (7, 9))
    for members in macros:
        for a in range(0, len(AXES), 2):
            backbone = concept_ids[a][int(rng.choice(mid_range))]
            for g in members:
                prefs[(g, a)] = [backbone, prefs[(g, a)][1]]

    pools: dict[tuple[int, int], list[str]] = {}
    for a, vocab in enumerate(per_axis):
        for kw in vocab:
            pools.setdefault((a, concept_of[(a, kw)]), []).append(kw)

    rank_in_arch: list[int] = []
    seen: dict[int, int] = {}
    for g in archetypes:
        rank_in_arch.append(seen.get(g, 0))
        seen[g] = seen.get(g, 0) + 1

    works_kw: list[dict[str, list[str]]] = []
    for w in range(N_WORKS):
        g = archetypes[w]
        if g == FILAMENT:
            floater = False
            mix = TIGHT_MIX_RATE
        elif g == NUCLEUS_FAMILY:
            floater = False
            mix = TIGHT_MIX_RATE
        elif g % 2 == 0:
            floater = False
            mix = SATELLITE_MIX_RATE
        else:
            floater = (rank_in_arch[w] + 1) % FLOATER_EVERY == 0
            mix = FLOATER_MIX_RATE if floater else LOOSE_MIX_RATE
        # dense families and tight satellites stay style-pure (distinct
        # styles each); loose works scatter across styles per work
        if g < 2:
            style = g
        elif g % 2 == 0:
            style = (g // 2 + 1) % N_STYLES
        else:
            style = (w * 7) % N_STYLES
        by_axis: dict[str, list[str]] = {}
        for a, axis in enumerate(AXES):
            need = counts[w, a]
            if g == FILAMENT and a not in STYLE_AXES:
                # open sliding window over the reserved corridor: works
                # drift in lockstep, tracing one long non-convex filament;
                # the head windows are crowded (a strict-density knot), the
                # tail tapers off
                ids = concept_ids[a]
                corridor = ids[1 + MID_SLOTS:]
                frac = rank_in_arch[w] / max(ARCHETYPE_SIZES[g] - 1, 1)
                pos = min(int(round(frac**1.7 * (len(corridor) - 2))), len(corridor) - 2)
                source = [corridor[pos], corridor[pos + 1]]
            elif a in STYLE_AXES:
                source = style_prefs[(style, a)]
            else:
                source = prefs[(g, a)]
            chosen: list[str] = []
            guard = 0
            while len(chosen) < need and guard < 200:
                guard += 1
                roll = rng.random()
                if roll < COMMON_RATE:
                    concept = concept_ids[a][0]  # ubiquitous terms of the axis
                elif roll < COMMON_RATE + mix * (1 - COMMON_RATE):
                    concept = int(rng.choice(concept_ids[a]))
                else:
                    concept = int(rng.choice(source))
                pool = pools[(a, concept)]
                kw = str(pool[int(rng.integers(len(pool)))])
                if kw not in chosen:
                    chosen.append(kw)
            by_axis[axis] = chosen
        works_kw.append(by_axis)
    return works_kw


def force_full_coverage(rng, works_kw, per_axis):
    """Swap unused keywords into works so all 770 names occur."""
    usage = Counter(kw for by_axis in works_kw for kws in by_axis.values() for kw in kws)
    all_names = {kw for vocab in per_axis for kw in vocab}
    unused = sorted(all_names - set(usage))
    axis_of = {}
    for a, vocab in enumerate(per_axis):
        for kw in vocab:
            axis_of.setdefault(kw, []).append(a)
    order = rng.permutation(N_WORKS)
    for kw in unused:
        placed = False
        for a in axis_of[kw]:
            axis = AXES[a]
            for w in order:
                cell = works_kw[int(w)][axis]
                for pos, old in enumerate(cell):
                    if usage[old] > 1 and kw not in cell:
                        usage[old] -= 1
                        usage[kw] += 1
                        cell[pos] = kw
                        placed = True
                        break
                if placed:
                    break
            if placed:
                break
        if not placed:
            raise RuntimeError(f"could not place keyword {kw}")


def build_corpus_doc(rng, works_kw, archetypes):
    artists = [f"artist-{i:02d}" for i in range(len(ARTIST_COUNTS))]
    artist_of: list[str] = []
    for artist, count in zip(artists, ARTIST_COUNTS):
        artist_of += [artist] * count
    assert len(artist_of) == N_WORKS

    years = rng.integers(1976, 2023, size=N_WORKS)
    works = []
    for w in range(N_WORKS):
        works.append({
            "id": f"work-{w:03d}",
            "title": f"Untitled Study {w + 1}",
            "artist": artist_of[w],
            "year": int(years[w]),
            "keywords": works_kw[w],
        })
    return {"axes": AXES, "works": works}


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-dir", default="data/fixture")
    parser.add_argument("--seed", type=int, default=67)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    per_axis, concept_of, concept_ids = build_vocabulary(rng)
    vectors = build_embeddings(rng, per_axis, concept_of)
    counts = allocate_counts(rng)
    archetypes = assign_archetypes()
    works_kw = build_works(rng, per_axis, concept_of, concept_ids, counts, archetypes)
    force_full_coverage(rng, works_kw, per_axis)
    doc = build_corpus_doc(rng, works_kw, archetypes)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.json"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out / "archetypes.json", "w", encoding="utf-8") as fh:
        json.dump({f"work-{w:03d}": archetypes[w] for w in range(N_WORKS)}, fh,
                  indent=1, sort_keys=True)
        fh.write("\n")
    table_path = out / "embeddings.bin"
    ordered = {kw: vectors[kw] for kw in sorted(vectors)}
    blockio.write_embedding_table(table_path, ordered, EMBED_DIM)

    corpus = load_corpus(corpus_path)
    table = load_embedding_table(table_path)
    report = validate_against(corpus, table)
    stats = {
        "works": len(corpus.works),
        "artists": len(corpus.artists),
        "axes": len(corpus.axes),
        "distinct_keywords": len(corpus.vocabulary()),
        "assignments": report.assignments,
        "missing": len(report.missing),
        "unused": len(report.unused),
        "mean_per_work": round(report.assignments / len(corpus.works), 2),
    }
    print(json.dumps(stats, indent=2))
    expected = {"works": 81, "artists": 33, "axes": 13, "distinct_keywords": 770,
                "assignments": 2285, "missing": 0, "unused": 0}
    for key, want in expected.items():
        assert stats[key] == want, f"{key}: {stats[key]} != {want}"
    print("fixture OK:", corpus_path, table_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
