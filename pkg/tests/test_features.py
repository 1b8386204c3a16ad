import math

import numpy as np
import pytest

from axisatlas import codebook as cb
from axisatlas import features as ft
from axisatlas.corpus import Corpus, EmbeddingTable, MissingKeywordError, corpus_from_dict


def toy_table():
    # Two tight concept groups in 2-D so a k=2 codebook is forced.
    entries = {
        "plant": np.array([10.0, 0.0], dtype=np.float32),
        "fungus": np.array([10.5, 0.2], dtype=np.float32),
        "moss": np.array([9.5, -0.2], dtype=np.float32),
        "data": np.array([0.0, 10.0], dtype=np.float32),
        "code": np.array([0.2, 10.5], dtype=np.float32),
        "sensor": np.array([-0.2, 9.5], dtype=np.float32),
    }
    return EmbeddingTable(dimension=2, entries=entries)


def toy_corpus(works):
    return corpus_from_dict({"axes": ["Materiality", "Methodology"], "works": works})


def toy_codebook(table=None):
    table = table or toy_table()
    cfg = cb.CodebookConfig(candidate_ladder=(2, 3), kmeans_mode="full", seed=1)
    return cb.build_codebook(table, cfg)


def work(wid, materiality=(), methodology=()):
    return {"id": wid, "title": wid, "artist": "a", "year": 2000,
            "keywords": {"Materiality": list(materiality), "Methodology": list(methodology)}}


def test_axis_mean_embedding_basics():
    t = EmbeddingTable(dimension=2, entries={
        "a": np.array([1.0, 0.0], dtype=np.float32),
        "b": np.array([0.0, 1.0], dtype=np.float32)})
    assert np.allclose(ft.axis_mean_embedding(["a", "b"], t), [0.5, 0.5])
    assert np.allclose(ft.axis_mean_embedding(["a"], t), [1.0, 0.0])
    assert np.array_equal(ft.axis_mean_embedding([], t), np.zeros(2))
    with pytest.raises(MissingKeywordError):
        ft.axis_mean_embedding(["zzz"], t)
    assert np.allclose(ft.axis_mean_embedding(["a", "zzz"], t, allow_missing=True), [1.0, 0.0])


def test_axis_cluster_counts():
    book = toy_codebook()
    c_plant = book.assignments["plant"]
    corpus = toy_corpus([work("w1", materiality=["plant", "fungus"])])
    counts = ft.axis_cluster_counts(corpus.works[0], book)
    assert counts == {("Materiality", c_plant): 2}
    empty = toy_corpus([work("w0")])
    assert ft.axis_cluster_counts(empty.works[0], book) == {}


def test_counts_mass_conservation():
    book = toy_codebook()
    corpus = toy_corpus([
        work("w1", materiality=["plant", "data"], methodology=["code"]),
        work("w2", materiality=["moss"], methodology=["sensor", "data", "plant"]),
    ])
    total = sum(sum(ft.axis_cluster_counts(w, book).values()) for w in corpus.works)
    assert total == corpus.assignment_count() == 7


def test_weight_counts_tfidf():
    counts = np.array([[2.0, 1.0], [0.0, 3.0]])
    out = ft.weight_counts(counts, "tfidf")
    # col 0: df=1 -> idf = ln(3/2)+1 ; col 1: df=N=2 -> idf = ln(1)+1 = 1
    assert out[0, 0] == pytest.approx(2 * (math.log(3 / 2) + 1), abs=1e-12)
    assert out[0, 0] == pytest.approx(2.8109, abs=1e-4)
    assert out[0, 1] == pytest.approx(1.0)
    assert out[1, 1] == pytest.approx(3.0)


def test_weight_counts_saturated_df_reduces_to_raw():
    rng = np.random.default_rng(0)
    counts = rng.integers(1, 5, size=(6, 4)).astype(float)  # every column in every work
    assert np.allclose(ft.weight_counts(counts, "tfidf"), counts)


def test_weight_counts_binary_and_raw():
    counts = np.array([[7.0, 0.0]])
    assert np.array_equal(ft.weight_counts(counts, "binary"), [[1.0, 0.0]])
    assert np.array_equal(ft.weight_counts(counts, "raw"), counts)


def test_weight_counts_bm25_formula():
    counts = np.array([[2.0, 1.0], [0.0, 3.0]])
    k1, b = 1.2, 0.75
    out = ft.weight_counts(counts, "bm25", (k1, b))
    lengths = counts.sum(axis=1)
    avg = lengths.mean()
    idf0 = math.log(1 + (2 - 1 + 0.5) / (1 + 0.5))
    expected00 = idf0 * 2 * (k1 + 1) / (2 + k1 * (1 - b + b * lengths[0] / avg))
    assert out[0, 0] == pytest.approx(expected00, abs=1e-12)
    assert out[1, 0] == 0.0


def test_quantized_axis_embeddings():
    book = toy_codebook()
    mu = book.centroids
    counts = {("Materiality", 0): 2, ("Materiality", 1): 1}
    got = ft.quantized_axis_embeddings(counts, ("Materiality", "Methodology"), book)
    expected_block = (2 * mu[0] + mu[1]) / 3
    assert np.allclose(got[:book.retained_dim], expected_block, atol=1e-12)
    assert np.array_equal(got[book.retained_dim:], np.zeros(book.retained_dim))

    single = ft.quantized_axis_embeddings({("Methodology", 1): 4}, ("Materiality", "Methodology"), book)
    assert np.allclose(single[book.retained_dim:], mu[1], atol=1e-12)


def test_quantized_block_is_convex_combination():
    book = toy_codebook()
    counts = {("Materiality", 0): 3, ("Materiality", 1): 2}
    got = ft.quantized_axis_embeddings(counts, ("Materiality",), book)
    weights = np.array([3, 2]) / 5
    assert np.allclose(got, weights @ book.centroids, atol=1e-12)
    assert weights.sum() == pytest.approx(1.0) and np.all(weights >= 0)


def test_build_features_tfidf_shape_and_norms():
    book = toy_codebook()
    corpus = toy_corpus([
        work("w1", materiality=["plant", "fungus"], methodology=["data"]),
        work("w2", materiality=["data"], methodology=["sensor", "code"]),
        work("w3"),
    ])
    fm = ft.build_features(corpus, book, toy_table(), ft.FeatureVariant("tfidf_counts"))
    assert fm.row_ids == ("w1", "w2", "w3")
    assert len(fm.columns) <= 2 * book.k
    norms = np.linalg.norm(fm.values, axis=1)
    assert np.allclose(norms[:2], 1.0, atol=1e-9)
    assert norms[2] == 0.0  # empty work keeps a zero row
    # axis-major column order
    axes_order = [c[0] for c in fm.columns]
    assert axes_order == sorted(axes_order, key=["Materiality", "Methodology"].index)


def test_build_features_binary_values():
    book = toy_codebook()
    corpus = toy_corpus([work("w1", materiality=["plant", "fungus"], methodology=["data"])])
    fm = ft.build_features(corpus, book, toy_table(), ft.FeatureVariant("binary"))
    nz = fm.values[fm.values != 0]
    assert np.allclose(nz, nz[0])  # equal normalized indicators


def test_build_features_quantized_shape():
    book = toy_codebook()
    corpus = toy_corpus([work("w1", materiality=["plant"]), work("w2", methodology=["data"])])
    fm = ft.build_features(corpus, book, toy_table(), ft.FeatureVariant("quantized_embed"))
    assert fm.values.shape == (2, 2 * book.retained_dim)


def test_build_features_axis_mean_shape():
    book = toy_codebook()
    corpus = toy_corpus([work("w1", materiality=["plant", "data"])])
    fm = ft.build_features(corpus, book, toy_table(),
                           ft.FeatureVariant("axis_mean_embed", l2_normalized=False))
    assert fm.values.shape == (1, 2 * 2)
    assert np.allclose(fm.values[0, :2], (toy_table().vector("plant") + toy_table().vector("data")) / 2)


def test_row_permutation_property():
    book = toy_codebook()
    w1 = work("a1", materiality=["plant"], methodology=["data", "code"])
    w2 = work("b2", materiality=["moss", "fungus"])
    fm_before = ft.build_features(toy_corpus([w1, w2]), book, toy_table(),
                                  ft.FeatureVariant("tfidf_counts"))
    # Swap the ids so canonical (sorted) order swaps the rows.
    w1b = dict(w1, id="b2")
    w2b = dict(w2, id="a1")
    fm_after = ft.build_features(toy_corpus([w1b, w2b]), book, toy_table(),
                                 ft.FeatureVariant("tfidf_counts"))
    assert fm_before.columns == fm_after.columns
    assert np.array_equal(fm_before.values, fm_after.values[::-1])


def test_per_axis_normalization_scope():
    book = toy_codebook()
    corpus = toy_corpus([work("w1", materiality=["plant", "fungus"], methodology=["data"])])
    fm = ft.build_features(corpus, book, toy_table(),
                           ft.FeatureVariant("raw_counts", l2_scope="axis"))
    for axis in ("Materiality", "Methodology"):
        cols = [i for i, c in enumerate(fm.columns) if c[0] == axis]
        assert np.linalg.norm(fm.values[0, cols]) == pytest.approx(1.0, abs=1e-9)


def test_svd_reduce_rank1_and_full_rank():
    rng = np.random.default_rng(3)
    u = rng.normal(size=(8, 1))
    v = rng.normal(size=(1, 5))
    rank1 = u @ v
    red = ft.svd_reduce(rank1, 1)
    d_before = np.linalg.norm(rank1[:, None] - rank1[None], axis=2)
    d_after = np.linalg.norm(red[:, None] - red[None], axis=2)
    assert np.allclose(d_before, d_after, atol=1e-9)

    full = rng.normal(size=(6, 4))
    red_full = ft.svd_reduce(full, 4)
    d_b = np.linalg.norm(full[:, None] - full[None], axis=2)
    d_a = np.linalg.norm(red_full[:, None] - red_full[None], axis=2)
    assert np.allclose(d_b, d_a, atol=1e-9)


def test_svd_reduce_out_of_range():
    with pytest.raises(ValueError):
        ft.svd_reduce(np.ones((3, 3)), 0)
    with pytest.raises(ValueError):
        ft.svd_reduce(np.ones((3, 3)), 4)


def test_svd_variant_through_build(tmp_path):
    book = toy_codebook()
    corpus = toy_corpus([
        work("w1", materiality=["plant"], methodology=["data"]),
        work("w2", materiality=["moss", "fungus"]),
        work("w3", methodology=["code", "sensor"]),
    ])
    fm = ft.build_features(corpus, book, toy_table(),
                           ft.FeatureVariant("tfidf_counts", svd_dim=2))
    assert fm.values.shape == (3, 2)
    assert fm.columns == (("svd", 0), ("svd", 1))

    jp, bp = tmp_path / "f.json", tmp_path / "f.axem"
    ft.save_features(fm, jp, bp)
    loaded = ft.load_features(jp, bp)
    assert loaded.variant == fm.variant
    assert loaded.columns == fm.columns
    assert np.array_equal(loaded.values, fm.values)
    assert loaded.fingerprint() == fm.fingerprint()
