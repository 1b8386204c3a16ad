"""Shared synthetic pipelines with planted cluster structure."""

import numpy as np
import pytest

from axisatlas import codebook as cb
from axisatlas.corpus import EmbeddingTable, corpus_from_dict


def make_toy_pipeline(n_groups=3, works_per_group=8, kw_per_group=12, dim=16,
                      n_axes=3, seed=0, cross_rate=0.0):
    """Corpus + table + codebook with ``n_groups`` planted work archetypes.

    Each archetype draws keywords from its own concept pool; concept
    pools are far apart in embedding space, so work features separate
    cleanly.  ``cross_rate`` mixes in foreign keywords for harder data.
    """
    rng = np.random.default_rng(seed)
    axes = [f"Axis{a}" for a in range(n_axes)]
    centers = rng.normal(scale=20.0, size=(n_groups, dim))
    entries = {}
    pools = []
    for g in range(n_groups):
        pool = []
        for i in range(kw_per_group):
            kw = f"g{g}kw{i:02d}"
            entries[kw] = (centers[g] + rng.normal(scale=1.0, size=dim)).astype(np.float32)
            pool.append(kw)
        pools.append(pool)
    table = EmbeddingTable(dimension=dim, entries=entries)

    works = []
    for g in range(n_groups):
        for w in range(works_per_group):
            keywords = {}
            for a, axis in enumerate(axes):
                n_kw = int(rng.integers(1, 4))
                src = pools[g]
                chosen = list(rng.choice(src, size=min(n_kw, len(src)), replace=False))
                if cross_rate > 0 and rng.random() < cross_rate:
                    other = pools[int(rng.integers(n_groups))]
                    chosen.append(str(rng.choice(other)))
                keywords[axis] = chosen
            works.append({"id": f"w{g}{w:02d}", "title": f"work {g}-{w}",
                          "artist": f"artist{g}", "year": 1990 + g * 10 + w,
                          "keywords": keywords})
    corpus = corpus_from_dict({"axes": axes, "works": works})

    cfg = cb.CodebookConfig(candidate_ladder=tuple(range(2, 7)), kmeans_mode="full", seed=7)
    book = cb.build_codebook(table, cfg)
    truth = np.array([g for g in range(n_groups) for _ in range(works_per_group)])
    return corpus, table, book, truth


@pytest.fixture(scope="session")
def toy_pipeline():
    return make_toy_pipeline()


@pytest.fixture(scope="session")
def two_blob_pipeline():
    return make_toy_pipeline(n_groups=2, works_per_group=10, seed=3)
