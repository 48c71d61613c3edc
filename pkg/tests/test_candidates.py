import numpy as np
import pytest

from edgemesh.candidates import generate_candidates, save_edges_txt
from edgemesh.geometry import PointCloud, SpatialIndex


def brute_candidates(points, k):
    """Oracle: union of each vertex's k nearest (by distance then index), canonicalized."""
    pairs = set()
    for i, p in enumerate(points):
        d = np.sqrt(((points - p) ** 2).sum(axis=1))
        order = np.lexsort((np.arange(len(points)), d))
        picked = [j for j in order if j != i][:k]
        for j in picked:
            pairs.add((min(i, j), max(i, j)))
    return sorted(pairs)


def make(points, k):
    cloud = PointCloud(np.asarray(points, dtype=float))
    return generate_candidates(cloud, SpatialIndex(cloud.points), k)


def test_two_points_one_edge():
    es = make([[0, 0, 0], [1, 1, 1]], 1)
    assert es.edges.tolist() == [[0, 1]]
    assert es.lengths[0] == pytest.approx(np.sqrt(3))


def test_unit_square_perimeter_only():
    # each corner's 2 nearest are the adjacent corners, so diagonals never appear
    es = make([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], 2)
    assert es.edges.tolist() == [[0, 1], [0, 3], [1, 2], [2, 3]]
    np.testing.assert_allclose(es.lengths, 1.0)


def test_matches_brute_force_union():
    rng = np.random.default_rng(31)
    pts = rng.random((200, 3))
    es = make(pts, 32)
    assert es.edges.tolist() == [list(p) for p in brute_candidates(pts, 32)]
    assert len(es) <= 200 * 32


def test_k_not_below_cloud_size():
    pts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    with pytest.raises(ValueError, match="smaller than"):
        make(pts, 4)


def test_every_vertex_covered():
    rng = np.random.default_rng(5)
    pts = rng.random((60, 3))
    es = make(pts, 3)
    assert set(np.unique(es.edges)) == set(range(60))


def test_coverage_monotone_in_k():
    rng = np.random.default_rng(8)
    pts = rng.random((80, 3))
    smaller = {tuple(e) for e in make(pts, 4).edges}
    larger = {tuple(e) for e in make(pts, 5).edges}
    assert smaller <= larger


def test_rigid_invariance_of_pairs():
    rng = np.random.default_rng(13)
    pts = rng.random((100, 3))
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    moved = pts @ q.T + rng.normal(size=3)
    assert make(pts, 8).edges.tolist() == make(moved, 8).edges.tolist()


def test_lengths_match_endpoints():
    rng = np.random.default_rng(21)
    pts = rng.random((50, 3))
    es = make(pts, 6)
    recomputed = np.linalg.norm(pts[es.edges[:, 0]] - pts[es.edges[:, 1]], axis=1)
    np.testing.assert_allclose(es.lengths, recomputed, atol=1e-12)
    assert (es.lengths > 0).all()


def test_debug_dump(tmp_path):
    es = make([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], 2)
    path = tmp_path / "edges.txt"
    save_edges_txt(es, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == len(es)
    i, j, length = lines[0].split()
    assert (int(i), int(j)) == tuple(es.edges[0])
    assert float(length) == es.lengths[0]
