import numpy as np
import pytest

from edgemesh.assembly import (
    AssemblyConfig,
    ScoredEdgeSet,
    assemble_mesh,
    circumball_empty,
    enumerate_triangles,
    fill_holes,
    filter_edges,
    greedy_select,
    prune_long_edges,
    reconstruct,
    triangle_circumballs,
)
from edgemesh.distance import MeshDistanceIndex
from edgemesh.geometry import PointCloud
from edgemesh.labels import edge_surface_distances
from edgemesh.shapes import ShapeSpec, generate_shape


def scored(edges, lengths=None, predicted=None):
    edges = np.asarray(edges, dtype=np.int64)
    if lengths is None:
        lengths = np.ones(len(edges))
    if predicted is None:
        predicted = np.zeros(len(edges))
    return ScoredEdgeSet(edges=edges, lengths=np.asarray(lengths, float),
                         predicted=np.asarray(predicted, float))


def edge_face_counts(faces):
    counts = {}
    for a, b, c in np.sort(faces, axis=1):
        for e in ((a, b), (b, c), (a, c)):
            counts[e] = counts.get(e, 0) + 1
    return counts


class TestFilterPrune:
    def test_threshold_is_strict(self):
        s = scored([[0, 1], [1, 2], [2, 3]], predicted=[0.001, 0.014, 0.5])
        out = filter_edges(s, 0.014)
        assert out.edges.tolist() == [[0, 1]]

    def test_all_zero_predictions_kept(self):
        s = scored([[0, 1], [1, 2]], predicted=[0.0, 0.0])
        assert len(filter_edges(s, 0.014)) == 2

    def test_filter_matches_oracle(self):
        rng = np.random.default_rng(3)
        s = scored(rng.integers(0, 50, size=(200, 2)) + [[0, 50]],
                   predicted=rng.random(200) * 0.03)
        out = filter_edges(s, 0.014)
        expect = [i for i in range(200) if s.predicted[i] < 0.014]
        assert out.predicted.tolist() == s.predicted[expect].tolist()

    def test_prune_mean_rule(self):
        s = scored([[0, 1], [1, 2], [2, 3], [3, 4]], lengths=[1, 1, 1, 10])
        out = prune_long_edges(s, 1.5)  # mean 3.25, cutoff 4.875
        assert out.lengths.tolist() == [1, 1, 1]

    def test_prune_keeps_equal_lengths(self):
        s = scored([[0, 1], [1, 2]], lengths=[2, 2])
        assert len(prune_long_edges(s, 1.5)) == 2

    def test_prune_single_pass_oracle(self):
        rng = np.random.default_rng(7)
        lengths = rng.random(300) * 3
        s = scored(np.stack([np.arange(300), np.arange(300) + 1], 1), lengths=lengths)
        out = prune_long_edges(s, 1.5)
        expect = lengths[lengths <= 1.5 * lengths.mean()]
        np.testing.assert_array_equal(out.lengths, expect)

    def test_prune_empty_is_empty(self):
        s = scored(np.empty((0, 2)))
        assert len(prune_long_edges(s, 1.5)) == 0


class TestEnumerateTriangles:
    def test_single_triangle(self):
        points = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
        out = enumerate_triangles(np.array([[0, 1], [1, 2], [0, 2]]), points)
        assert out.triangles.tolist() == [[0, 1, 2]]
        assert out.perimeter[0] == pytest.approx(2 + np.sqrt(2))
        assert out.max_edge[0] == pytest.approx(np.sqrt(2))

    def test_four_clique_gives_four_triangles(self):
        points = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
        edges = [[a, b] for a in range(4) for b in range(a + 1, 4)]
        out = enumerate_triangles(np.array(edges), points)
        assert len(out) == 4

    def test_matches_brute_force_triple_scan(self):
        rng = np.random.default_rng(11)
        points = rng.random((20, 3))
        edges = np.unique(np.sort(rng.integers(0, 20, size=(50, 2)), axis=1), axis=0)
        edges = edges[edges[:, 0] != edges[:, 1]]
        out = enumerate_triangles(edges, points)
        has = {tuple(e) for e in edges.tolist()}
        expect = [
            [a, b, c]
            for a in range(20)
            for b in range(a + 1, 20)
            for c in range(b + 1, 20)
            if (a, b) in has and (b, c) in has and (a, c) in has
        ]
        assert out.triangles.tolist() == expect

    def test_no_triangles(self):
        points = np.zeros((4, 3))
        points[:, 0] = np.arange(4)
        out = enumerate_triangles(np.array([[0, 1], [2, 3]]), points)
        assert len(out) == 0


class TestCircumballFilter:
    def test_circumcenter_of_right_triangle(self):
        # circumcenter of a right triangle is the hypotenuse midpoint
        points = np.array([[0, 0, 0], [2, 0, 0], [0, 2, 0]], dtype=float)
        center, radius = triangle_circumballs(points, np.array([[0, 1, 2]]))
        np.testing.assert_allclose(center[0], [1, 1, 0], atol=1e-12)
        assert radius[0] == pytest.approx(np.sqrt(2))

    def test_collinear_triple_rejected(self):
        points = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [5, 5, 5]], dtype=float)
        cands = enumerate_triangles(np.array([[0, 1], [1, 2], [0, 2]]), points)
        assert circumball_empty(cands, points).tolist() == [False]

    def test_enclosed_point_rejects_triangle(self):
        # big triangle around the origin with a fourth point at the center
        points = np.array([[0, 2, 0], [-2, -1, 0], [2, -1, 0], [0, 0, 0]], dtype=float)
        cands = enumerate_triangles(np.array([[0, 1], [1, 2], [0, 2]]), points)
        assert circumball_empty(cands, points).tolist() == [False]

    def test_clean_triangle_kept(self):
        points = np.array([[0, 2, 0], [-2, -1, 0], [2, -1, 0], [50, 0, 0]], dtype=float)
        cands = enumerate_triangles(np.array([[0, 1], [1, 2], [0, 2]]), points)
        assert circumball_empty(cands, points).tolist() == [True]

    def test_cocircular_grid_point_does_not_reject(self):
        # unit square: the 4th corner lies exactly on each triangle's circumball
        points = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        edges = np.array([[0, 1], [1, 2], [2, 3], [0, 3], [0, 2]])
        cands = enumerate_triangles(edges, points)
        assert len(cands) == 2
        assert circumball_empty(cands, points).all()

    def test_shingle_suppression_on_sphere(self):
        from edgemesh.distance import MeshDistanceIndex
        from edgemesh.labels import edge_surface_distances

        gt, cloud = generate_shape(ShapeSpec("sphere", sample_count=300, seed=21))
        gt_index = MeshDistanceIndex(gt)

        def oracle(edges, emb, emb_sym):
            return edge_surface_distances(cloud.points, edges, gt_index)

        with_filter, _ = reconstruct(
            cloud, oracle, AssemblyConfig(circumball_filter=True), k_neighbors=16, patch_size=30
        )
        without, _ = reconstruct(
            cloud, oracle, AssemblyConfig(circumball_filter=False), k_neighbors=16, patch_size=30
        )
        sphere_area = np.pi  # radius 0.5 in unit-cube coordinates
        assert with_filter.face_areas().sum() < 1.3 * sphere_area
        assert without.face_areas().sum() > 2.0 * sphere_area


class TestGreedySelect:
    def make_candidates(self, points, tris):
        from edgemesh.assembly import TriangleCandidates

        tris = np.asarray(tris, dtype=np.int64)
        pa, pb, pc = points[tris[:, 0]], points[tris[:, 1]], points[tris[:, 2]]
        lengths = np.stack(
            [
                np.linalg.norm(pa - pb, axis=1),
                np.linalg.norm(pb - pc, axis=1),
                np.linalg.norm(pa - pc, axis=1),
            ],
            axis=1,
        )
        return TriangleCandidates(tris, lengths.max(axis=1), lengths.sum(axis=1))

    def test_shared_edge_pair_both_accepted(self):
        points = np.array([[0, 0, 0], [1, 0, 0], [0.5, 1, 0], [0.5, -1, 0]])
        cands = self.make_candidates(points, [[0, 1, 2], [0, 1, 3]])
        assert len(greedy_select(cands)) == 2

    def test_third_face_on_same_edge_rejected(self):
        points = np.array([[0, 0, 0], [1, 0, 0], [0.5, 0.6, 0], [0.5, -0.7, 0], [0.5, 0, 1.5]])
        cands = self.make_candidates(points, [[0, 1, 2], [0, 1, 3], [0, 1, 4]])
        out = greedy_select(cands)
        assert len(out) == 2
        # the two smallest max-edge triangles win; [0,1,4] has the largest
        assert [0, 1, 4] not in out.tolist()

    def brute_greedy(self, cands):
        rows = sorted(
            range(len(cands)),
            key=lambda i: (
                cands.max_edge[i],
                cands.perimeter[i],
                tuple(cands.triangles[i]),
            ),
        )
        load, seen, out = {}, set(), []
        for i in rows:
            t = tuple(int(v) for v in cands.triangles[i])
            if t in seen:
                continue
            a, b, c = t
            es = ((a, b), (b, c), (a, c))
            if any(load.get(e, 0) >= 2 for e in es):
                continue
            for e in es:
                load[e] = load.get(e, 0) + 1
            seen.add(t)
            out.append(list(t))
        return out

    def test_matches_brute_force_replay(self):
        rng = np.random.default_rng(13)
        for trial in range(20):
            points = rng.random((12, 3))
            tris = np.unique(np.sort(rng.integers(0, 12, size=(100, 3)), axis=1), axis=0)
            tris = tris[(tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2])]
            cands = self.make_candidates(points, tris)
            assert greedy_select(cands).tolist() == self.brute_greedy(cands)

    def test_result_edge_manifold(self):
        rng = np.random.default_rng(17)
        points = rng.random((15, 3))
        tris = np.unique(np.sort(rng.integers(0, 15, size=(200, 3)), axis=1), axis=0)
        tris = tris[(tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2])]
        out = greedy_select(self.make_candidates(points, tris))
        assert max(edge_face_counts(out).values()) <= 2

    def test_greedy_prefix_property(self):
        rng = np.random.default_rng(19)
        points = rng.random((10, 3))
        tris = np.unique(np.sort(rng.integers(0, 10, size=(60, 3)), axis=1), axis=0)
        tris = tris[(tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2])]
        cands = self.make_candidates(points, tris)
        accepted = greedy_select(cands)
        if len(accepted) < 2:
            pytest.skip("degenerate draw")
        # acceptance follows the sort, so accepted[-1] has the largest key
        drop = tuple(accepted[-1])
        keep = [i for i in range(len(cands)) if tuple(cands.triangles[i]) != drop]
        from edgemesh.assembly import TriangleCandidates

        rerun = greedy_select(
            TriangleCandidates(
                cands.triangles[keep], cands.max_edge[keep], cands.perimeter[keep]
            )
        )
        remaining = {tuple(t) for t in accepted.tolist()} - {drop}
        assert remaining <= {tuple(t) for t in rerun.tolist()}


class TestFillHoles:
    def test_open_tetrahedron_completed(self):
        faces = np.array([[0, 1, 2], [0, 1, 3], [0, 2, 3]])
        added, stats = fill_holes(faces, ring_max=8)
        assert added.tolist() == [[1, 2, 3]]
        assert stats["rings_filled"] == 1

    def test_quad_hole_fan(self):
        # square pyramid sides, open square base ring (0,1,2,3)
        faces = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [0, 3, 4]])
        added, stats = fill_holes(faces, ring_max=8)
        assert stats["rings_filled"] == 1
        assert added.tolist() == [[0, 1, 2], [0, 2, 3]]

    def test_closed_mesh_untouched(self):
        from edgemesh.shapes import icosphere

        mesh = icosphere(subdivisions=1)
        added, stats = fill_holes(mesh.faces, ring_max=8)
        assert len(added) == 0
        assert stats["boundary_edges"] == 0

    def test_large_ring_left_open(self):
        # hexagonal fan around vertex 6 with open rim of length 6
        faces = np.array([[i, (i + 1) % 6, 6] for i in range(6)])
        added, stats = fill_holes(faces, ring_max=4)
        assert len(added) == 0
        assert stats["rings_skipped"] == 1

    def test_ring_filled_when_cap_allows(self):
        faces = np.array([[i, (i + 1) % 6, 6] for i in range(6)])
        added, stats = fill_holes(faces, ring_max=6)
        assert stats["rings_filled"] == 1
        assert len(added) == 4  # hexagon fan
        total = np.concatenate([faces, added])
        assert max(edge_face_counts(total).values()) <= 2


class TestReconstruct:
    def test_oracle_plane_reconstruction(self):
        # grid cloud on a plane, oracle scorer = true distance to the plane (all zero)
        g = np.linspace(-0.5, 0.5, 12)
        xx, yy = np.meshgrid(g, g)
        pts = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)])
        cloud = PointCloud(pts)

        def truth(edges, emb, emb_sym):
            return np.zeros(len(edges))

        mesh, diag = reconstruct(cloud, truth, AssemblyConfig(), k_neighbors=8, patch_size=12)
        assert mesh.n_faces > 150
        np.testing.assert_array_equal(mesh.vertices, pts)
        assert max(edge_face_counts(mesh.faces).values()) <= 2
        # flat surface: every face lies in the plane
        np.testing.assert_allclose(mesh.vertices[mesh.faces][..., 2], 0.0, atol=1e-15)

    def test_vertices_preserved_bit_identical(self):
        gt, cloud = generate_shape(ShapeSpec("sphere", sample_count=200, seed=3))
        gt_index = MeshDistanceIndex(gt)

        def oracle(edges, emb, emb_sym):
            return edge_surface_distances(cloud.points, edges, gt_index)

        mesh, diag = reconstruct(cloud, oracle, AssemblyConfig(), k_neighbors=16, patch_size=30)
        assert mesh.vertices is cloud.points or (mesh.vertices == cloud.points).all()
        assert diag.accepted_triangles > 0

    def test_zero_survivors_is_empty_mesh(self):
        gt, cloud = generate_shape(ShapeSpec("sphere", sample_count=64, seed=5))

        def far(edges, emb, emb_sym):
            return np.full(len(edges), 10.0)

        mesh, diag = reconstruct(cloud, far, AssemblyConfig(), k_neighbors=8, patch_size=16)
        assert mesh.n_faces == 0
        assert diag.kept_edges == 0

    def test_deterministic(self):
        gt, cloud = generate_shape(ShapeSpec("torus", sample_count=150, seed=7))
        gt_index = MeshDistanceIndex(gt)

        def oracle(edges, emb, emb_sym):
            return edge_surface_distances(cloud.points, edges, gt_index)

        a, _ = reconstruct(cloud, oracle, AssemblyConfig(), k_neighbors=12, patch_size=24)
        b, _ = reconstruct(cloud, oracle, AssemblyConfig(), k_neighbors=12, patch_size=24)
        assert a.faces.tolist() == b.faces.tolist()

    def test_assemble_respects_duplicate_faces_rule(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.2]])
        cloud = PointCloud(pts)
        s = scored([[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]],
                   lengths=np.ones(5), predicted=np.zeros(5))
        mesh, diag = assemble_mesh(cloud, s, AssemblyConfig())
        assert len(np.unique(np.sort(mesh.faces, axis=1), axis=0)) == mesh.n_faces
