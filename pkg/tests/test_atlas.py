import json
import math

import numpy as np
import pytest

from axisatlas import atlas as at
from axisatlas import sweep as sw
from axisatlas.features import FeatureVariant
from axisatlas.projection import ProjectionSpec


def ids_for(n):
    return [f"w{i:02d}" for i in range(n)]


# -- oracles -------------------------------------------------------------------

def oracle_neighbors(coords, ids):
    n = len(ids)
    out = {}
    for i in range(n):
        pairs = sorted(
            (math.dist(coords[i], coords[j]), ids[j]) for j in range(n) if j != i)
        out[ids[i]] = [wid for _, wid in pairs]
    return out


def oracle_mutual_pairs(coords, ids, k):
    nb = oracle_neighbors(coords, ids)
    knn = {w: set(nb[w][:k]) for w in ids}
    return {tuple(sorted((a, b))) for a in ids for b in knn[a] if a in knn[b]}


# -- mutual knn ----------------------------------------------------------------

def test_mutual_knn_coincident_pair():
    coords = np.array([[0.0, 0.0], [0.0, 0.0], [9.0, 9.0]])
    rep = at.mutual_knn(coords, ids_for(3), k=1)
    assert ("w00", "w01") in rep.mutual_pairs


def test_mutual_knn_chain():
    coords = np.array([[0.0], [1.0], [2.0], [10.0]])
    rep = at.mutual_knn(coords, ids_for(4), k=1)
    assert rep.mutual_pairs == frozenset({("w00", "w01")})


def test_mutual_knn_matches_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(8, 21))
        k = int(rng.integers(1, 5))
        coords = rng.normal(size=(n, 3))
        ids = ids_for(n)
        rep = at.mutual_knn(coords, ids, k)
        assert rep.mutual_pairs == frozenset(oracle_mutual_pairs(coords, ids, k))
        assert {w: list(v) for w, v in rep.neighbor_lists.items()} == oracle_neighbors(coords, ids)


def test_mutual_pairs_symmetric():
    rng = np.random.default_rng(3)
    coords = rng.normal(size=(15, 2))
    rep = at.mutual_knn(coords, ids_for(15), k=3)
    for a, b in rep.mutual_pairs:
        assert a < b  # stored unordered as sorted tuples


def test_mutual_knn_k_range():
    with pytest.raises(ValueError):
        at.mutual_knn(np.zeros((4, 2)), ids_for(4), k=4)


# -- rank displacement -----------------------------------------------------------

def test_rank_displacement_nearest():
    coords = np.array([[0.0], [1.0], [5.0]])
    r_ij, r_ji = at.rank_displacement(coords, ids_for(3), "w00", "w01")
    assert r_ij == 1 and r_ji == 1


def test_rank_displacement_coincident_tie_break():
    coords = np.array([[0.0], [0.0], [0.0]])
    r_ij, r_ji = at.rank_displacement(coords, ids_for(3), "w00", "w01")
    assert (r_ij, r_ji) == (1, 1)  # id order breaks the tie


def test_rank_displacement_matches_oracle():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(5, 15))
        coords = rng.normal(size=(n, 2))
        ids = ids_for(n)
        nb = oracle_neighbors(coords, ids)
        i, j = ids[int(rng.integers(n))], ids[int(rng.integers(n))]
        if i == j:
            continue
        got = at.rank_displacement(coords, ids, i, j)
        assert got == (nb[i].index(j) + 1, nb[j].index(i) + 1)


def test_rank_displacement_unknown_id():
    with pytest.raises(KeyError):
        at.rank_displacement(np.zeros((3, 1)), ids_for(3), "w00", "zzz")
    with pytest.raises(ValueError):
        at.rank_displacement(np.zeros((3, 1)), ids_for(3), "w00", "w00")


# -- group cohesion ---------------------------------------------------------------

def test_group_cohesion_planted_blob():
    rng = np.random.default_rng(5)
    blob = rng.normal(size=(4, 2)) * 0.05
    scatter = rng.normal(size=(12, 2)) * 0.05 + np.array([[40, 0]]) * np.arange(1, 13).reshape(-1, 1)
    coords = np.vstack([blob, scatter])
    ids = ids_for(16)
    labels = np.array([0] * 4 + list(range(1, 13)))
    mutual, mean_rank, same = at.group_cohesion(coords, ids, labels, ids[:4], k=3)
    assert mutual == 1.0
    assert same == 1.0
    assert 1.0 <= mean_rank <= 3.0


def test_group_cohesion_antipodal_pair():
    rng = np.random.default_rng(6)
    crowd = rng.normal(size=(10, 2))
    coords = np.vstack([crowd, [[50.0, 0.0]], [[-50.0, 0.0]]])
    ids = ids_for(12)
    labels = np.zeros(12, dtype=int)
    mutual, _, _ = at.group_cohesion(coords, ids, labels, [ids[10], ids[11]], k=3)
    assert mutual == 0.0


def test_group_cohesion_whole_dataset_mixed_labels():
    rng = np.random.default_rng(8)
    coords = rng.normal(size=(10, 2))
    labels = np.array([0] * 5 + [1] * 5)
    _, mean_rank, same = at.group_cohesion(coords, ids_for(10), labels, ids_for(10), k=3)
    assert same < 1.0
    assert mean_rank >= 1.0


def test_group_cohesion_singleton_rejected():
    with pytest.raises(ValueError):
        at.group_cohesion(np.zeros((5, 2)), ids_for(5), np.zeros(5), ["w00"], k=2)


# -- atlas document ----------------------------------------------------------------

@pytest.fixture(scope="module")
def toy_atlas(toy_pipeline):
    corpus, table, book, truth = toy_pipeline
    cfg = sw.SweepConfig(
        feature_variants=(FeatureVariant("tfidf_counts"),),
        projection_specs=(ProjectionSpec("raw"),),
        algorithms=("agglomerative",), linkages=("average",), k_list=(3,),
        neighborhood_k=4)
    cache = sw.PipelineCache(corpus, book, table)
    report = sw.run_sweep(cfg, corpus, book, table, cache=cache)
    headline = report.headline_result
    fm = cache.features(headline.spec.feature_variant)
    space = cache.projection(headline.spec.feature_variant, headline.spec.projection_spec)
    doc = at.build_atlas(corpus, space, headline.labels, book, fm, k=4,
                         provenance={"trial_id": headline.spec.trial_id,
                                     "seed": cfg.base_seed})
    return corpus, doc


def test_atlas_document_complete(toy_atlas):
    corpus, doc = toy_atlas
    assert len(doc["works"]) == len(corpus.works)
    for w in doc["works"]:
        assert len(w["xy"]) == 2
        assert w["coords"][:2] == w["xy"]
        assert isinstance(w["cluster"], int)
        assert len(w["neighbors"]) == 4
        assert w["neighbors"][0]["rank"] == 1
    assert {c["id"] for c in doc["clusters"]} == {0, 1, 2}
    for c in doc["clusters"]:
        assert c["size"] > 0
        assert c["top_concepts"], "agglomerative clusters must summarize concepts"
        for t in c["top_concepts"]:
            assert t["mass"] > 0 and t["keywords"]
    assert doc["provenance"]["trial_id"] is not None
    assert doc["provenance"]["seed"] == 42


def test_atlas_round_trip(toy_atlas, tmp_path):
    _, doc = toy_atlas
    p = tmp_path / "atlas.json"
    at.save_atlas(doc, p)
    assert at.load_atlas(p) == json.loads(json.dumps(doc))


def test_atlas_row_mismatch_rejected(toy_atlas, toy_pipeline):
    corpus, doc = toy_atlas
    corpus2, table, book, _ = toy_pipeline
    from axisatlas.features import build_features
    from axisatlas.projection import ProjectedSpace, ProjectionSpec
    fm = build_features(corpus2, book, table, FeatureVariant("tfidf_counts"))
    bad_space = ProjectedSpace(spec=ProjectionSpec("raw"),
                               coordinates=np.zeros((3, 2)), source_fingerprint="x")
    with pytest.raises(ValueError):
        at.build_atlas(corpus2, bad_space, np.zeros(3, dtype=int), book, fm)


def test_html_export_self_contained(toy_atlas, tmp_path):
    _, doc = toy_atlas
    p = tmp_path / "atlas.html"
    at.export_html(doc, p)
    text = p.read_text()
    assert text.startswith("<!DOCTYPE html>")
    assert "http://" not in text and "https://" not in text  # no external assets
    assert text.count("<circle") == len(doc["works"])
    embedded = text.split('<script id="atlas-data" type="application/json">')[1]
    embedded = embedded.split("</script>")[0]
    assert json.loads(embedded) == json.loads(json.dumps(doc))
