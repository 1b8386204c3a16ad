import math

import numpy as np
import pytest

from axisatlas import metrics
from axisatlas import projection as pj


def umap_spec(out_dim=2, n_neighbors=5, min_dist=0.1, metric="euclidean",
              seed=42, n_epochs=200):
    return pj.ProjectionSpec(
        "umap", out_dim,
        pj.UmapParams(n_neighbors=n_neighbors, min_dist=min_dist, metric=metric,
                      n_epochs=n_epochs),
        seed=seed)


# -- knn ----------------------------------------------------------------------

def oracle_knn(points, k, metric):
    n = len(points)
    out_idx, out_dist = [], []
    for i in range(n):
        cands = []
        for j in range(n):
            if j == i:
                continue
            if metric == "euclidean":
                d = math.dist(points[i], points[j])
            else:
                ni, nj = np.linalg.norm(points[i]), np.linalg.norm(points[j])
                d = 1.0 if ni == 0 or nj == 0 else 1.0 - float(points[i] @ points[j]) / (ni * nj)
            cands.append((d, j))
        cands.sort()
        out_idx.append([j for _, j in cands[:k]])
        out_dist.append([d for d, _ in cands[:k]])
    return np.array(out_idx), np.array(out_dist)


def test_knn_collinear_points():
    idx, dist = pj.knn_graph(np.array([[0.0], [1.0], [3.0]]), 1)
    assert idx.ravel().tolist() == [1, 0, 1]
    assert dist.ravel().tolist() == [1.0, 1.0, 2.0]


def test_knn_cosine_orthogonal():
    pts = np.array([[1.0, 0.0], [0.0, 1.0]])
    _, dist = pj.knn_graph(pts, 1, metric="cosine")
    assert np.allclose(dist, 1.0)


def test_knn_zero_row_cosine_convention():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    idx, dist = pj.knn_graph(pts, 2, metric="cosine")
    assert np.allclose(dist[0], 1.0)  # zero row: distance 1 to everything
    assert idx[0].tolist() == [1, 2]  # index tie-break


def test_knn_matches_oracle():
    rng = np.random.default_rng(3)
    for metric in ("euclidean", "cosine"):
        pts = rng.normal(size=(20, 5))
        idx, dist = pj.knn_graph(pts, 4, metric=metric)
        oidx, odist = oracle_knn(pts, 4, metric)
        assert np.array_equal(idx, oidx)
        assert np.allclose(dist, odist, atol=1e-12)


def test_knn_k_out_of_range():
    with pytest.raises(ValueError):
        pj.knn_graph(np.zeros((4, 2)), 4)


# -- curve fit + calibration ---------------------------------------------------

def test_curve_fit_matches_reference_values():
    # scipy curve_fit on the same target yields these (published defaults)
    for md, (a_ref, b_ref) in [(0.01, (1.93, 0.79)), (0.1, (1.577, 0.895)),
                               (0.5, (0.583, 1.334))]:
        a, b = pj.fit_curve_params(md)
        assert a == pytest.approx(a_ref, rel=0.05)
        assert b == pytest.approx(b_ref, rel=0.05)


def test_curve_kernel_near_one_at_min_dist():
    for md in (0.01, 0.1, 0.5):
        a, b = pj.fit_curve_params(md)
        assert 1.0 / (1.0 + a * md ** (2 * b)) >= 0.9


def test_calibration_hits_log2k():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(50, 8))
    for k in (5, 10, 15):
        _, dists = pj.knn_graph(pts, k)
        rho, sigma = pj.calibrate_bandwidths(dists)
        target = math.log2(k)
        for i in range(50):
            mass = float(np.sum(np.exp(-np.maximum(dists[i] - rho[i], 0) / sigma[i])))
            assert abs(mass - target) <= 1e-3


def test_fuzzy_graph_symmetric_unit_interval():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(30, 4))
    g = pj.fuzzy_graph(pts, 6, "euclidean")
    assert np.array_equal(g, g.T)
    nz = g[g > 0]
    assert np.all(nz <= 1.0) and np.all(nz > 0.0)


# -- umap / project -------------------------------------------------------------

def test_umap_deterministic():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(40, 10))
    spec = umap_spec()
    s1 = pj.umap_fit(pts, spec)
    s2 = pj.umap_fit(pts, spec)
    assert np.array_equal(s1.coordinates, s2.coordinates)
    s3 = pj.umap_fit(pts, umap_spec(seed=43))
    assert not np.array_equal(s1.coordinates, s3.coordinates)


def test_umap_separates_planted_blobs():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(20, 50)) + np.r_[np.ones(25) * 8, np.zeros(25)]
    b = rng.normal(size=(20, 50))
    space = pj.umap_fit(np.vstack([a, b]), umap_spec(n_neighbors=10))
    labels = np.array([0] * 20 + [1] * 20)
    assert metrics.silhouette(space.coordinates, labels) > 0.5


def test_umap_attractive_loss_decreases():
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(30, 6))
    graph = pj.fuzzy_graph(pts, 5, "euclidean")
    a, b = pj.fit_curve_params(0.1)

    def attractive_loss(coords):
        loss = 0.0
        for i, j in zip(*np.nonzero(graph)):
            d2 = float(np.sum((coords[i] - coords[j]) ** 2))
            nu = 1.0 / (1.0 + a * d2 ** b)
            loss += graph[i, j] * -math.log(max(nu, 1e-12))
        return loss

    init = pj.spectral_init(graph, 2, seed=42)
    final = pj.umap_fit(pts, umap_spec(n_neighbors=5)).coordinates
    assert attractive_loss(final) < attractive_loss(init.astype(np.float64))


def test_umap_shape_and_requirements():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(30, 12))
    space = pj.umap_fit(pts, umap_spec(out_dim=8, n_epochs=50))
    assert space.coordinates.shape == (30, 8)
    with pytest.raises(ValueError):
        pj.umap_fit(pts[:4], umap_spec(n_neighbors=5))
    bad = pts.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        pj.umap_fit(bad, umap_spec())


def test_project_dispatch():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(25, 30))
    raw = pj.project(pts, pj.ProjectionSpec("raw"))
    assert np.array_equal(raw.coordinates, pts)
    svd = pj.project(pts, pj.ProjectionSpec("svd", 5))
    assert svd.coordinates.shape == (25, 5)
    um = pj.project(pts, umap_spec(out_dim=4, n_epochs=50))
    assert um.coordinates.shape == (25, 4)
    assert raw.source_fingerprint == svd.source_fingerprint == um.source_fingerprint


def test_spec_validation():
    with pytest.raises(ValueError):
        pj.ProjectionSpec("umap", 4)  # missing params
    with pytest.raises(ValueError):
        pj.ProjectionSpec("svd", 4, pj.UmapParams())  # params on non-umap
    with pytest.raises(ValueError):
        pj.ProjectionSpec("svd", 1)  # out_dim < 2
    with pytest.raises(ValueError):
        pj.UmapParams(metric="manhattan")


def test_projection_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(20, 6))
    space = pj.umap_fit(pts, umap_spec(n_epochs=50))
    jp, bp = tmp_path / "p.json", tmp_path / "p.axem"
    pj.save_projection(space, jp, bp)
    loaded = pj.load_projection(jp, bp)
    assert loaded.spec == space.spec
    assert loaded.source_fingerprint == space.source_fingerprint
    assert np.array_equal(loaded.coordinates, space.coordinates)
