"""Exact point-to-triangle and point-to-mesh distance queries.

The triangle kernel is a vectorized barycentric region classification
(Ericson-style closest-point tests). Mesh queries run through an axis-aligned
bounding-box hierarchy whose results are identical to the brute-force minimum
over all faces, because pruning only skips triangles that provably cannot
beat the current bound.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .geometry import TriMesh, warn_degenerate_faces
from .validation import check_point, check_points

_REL_DEGENERACY_TOL = 1e-12


def closest_point_on_segments(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Closest points on segments [a, b] to points p; all arrays (M, 3)."""
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", p - a, ab)
    t = np.divide(t, denom, out=np.zeros_like(t), where=denom > 0)
    np.clip(t, 0.0, 1.0, out=t)
    return a + t[:, None] * ab


def closest_point_on_triangles(
    p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray
) -> np.ndarray:
    """Closest points on closed triangles (a, b, c) to points p; all arrays (M, 3).

    Degenerate (collinear) triangles fall back to the nearest point over the
    three boundary segments.
    """
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    decided = np.zeros(p.shape[0], dtype=bool)

    def claim(mask, values):
        mask = mask & ~decided
        if mask.any():
            out[mask] = values[mask]
            decided[mask] = True

    # Degenerate triangles are resolved first so the barycentric branches
    # below never divide by a vanishing denominator.
    cross = np.cross(ab, ac)
    degenerate = np.linalg.norm(cross, axis=1) <= _REL_DEGENERACY_TOL * np.linalg.norm(
        ab, axis=1
    ) * np.linalg.norm(ac, axis=1)
    if degenerate.any():
        idx = np.flatnonzero(degenerate)
        cand = np.stack(
            [
                closest_point_on_segments(p[idx], a[idx], b[idx]),
                closest_point_on_segments(p[idx], a[idx], c[idx]),
                closest_point_on_segments(p[idx], b[idx], c[idx]),
            ],
            axis=0,
        )
        d = np.linalg.norm(cand - p[idx][None, :, :], axis=2)
        pick = d.argmin(axis=0)
        out[idx] = cand[pick, np.arange(idx.size)]
        decided[idx] = True

    claim((d1 <= 0) & (d2 <= 0), a)  # vertex region A
    claim((d3 >= 0) & (d4 <= d3), b)  # vertex region B
    denom_ab = d1 - d3
    v = np.divide(d1, denom_ab, out=np.zeros_like(d1), where=denom_ab != 0)
    claim((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)  # edge AB
    claim((d6 >= 0) & (d5 <= d6), c)  # vertex region C
    denom_ac = d2 - d6
    w = np.divide(d2, denom_ac, out=np.zeros_like(d2), where=denom_ac != 0)
    claim((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)  # edge AC
    denom_bc = (d4 - d3) + (d5 - d6)
    w = np.divide(d4 - d3, denom_bc, out=np.zeros_like(d4), where=denom_bc != 0)
    claim((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + w[:, None] * (c - b))  # edge BC

    if not decided.all():  # interior
        inner = ~decided
        denom = (va + vb + vc)[inner]
        v = vb[inner] / denom
        w = vc[inner] / denom
        out[inner] = a[inner] + v[:, None] * ab[inner] + w[:, None] * ac[inner]

    return out


def triangle_distances(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    cp = closest_point_on_triangles(p, a, b, c)
    return np.sqrt(((p - cp) ** 2).sum(axis=1))


def point_triangle_distance(p, a, b, c) -> float:
    """Euclidean distance from a point to a closed triangle (interior, edges, vertices)."""
    p, a, b, c = (check_point(x)[None, :] for x in (p, a, b, c))
    return float(triangle_distances(p, a, b, c)[0])


class MeshDistanceIndex:
    """Bounding-volume hierarchy over a mesh for batched exact distance queries.

    Zero-area faces are skipped (with a warning). A nearest-vertex query seeds
    a strict upper bound per query point, so most subtrees prune immediately.
    """

    def __init__(self, mesh: TriMesh, leaf_size: int = 8):
        if mesh.n_faces == 0:
            raise ValueError("mesh has no faces")
        keep = warn_degenerate_faces(mesh)
        if keep.size == 0:
            raise ValueError("mesh has no non-degenerate faces")
        self.mesh = mesh
        a, b, c = mesh.triangle_corners()
        self._tri = np.stack([a[keep], b[keep], c[keep]], axis=1)  # (F, 3, 3)
        self._vertex_tree = cKDTree(mesh.vertices)
        self._leaf_size = leaf_size
        self._build()

    def _build(self) -> None:
        nf = self._tri.shape[0]
        tri_lo = self._tri.min(axis=1)
        tri_hi = self._tri.max(axis=1)
        centroids = self._tri.mean(axis=1)

        order = np.arange(nf)
        bbox_lo, bbox_hi, lefts, rights, starts, ends = [], [], [], [], [], []

        # Iterative median-split build; node children are appended after the
        # parent, so node 0 is always the root.
        stack = [(0, nf, -1, False)]
        while stack:
            begin, end, parent, is_right = stack.pop()
            node = len(bbox_lo)
            if parent >= 0:
                (rights if is_right else lefts)[parent] = node
            ids = order[begin:end]
            bbox_lo.append(tri_lo[ids].min(axis=0))
            bbox_hi.append(tri_hi[ids].max(axis=0))
            lefts.append(-1)
            rights.append(-1)
            if end - begin <= self._leaf_size:
                starts.append(begin)
                ends.append(end)
                continue
            starts.append(-1)
            ends.append(-1)
            axis = int((tri_hi[ids].max(axis=0) - tri_lo[ids].min(axis=0)).argmax())
            mid = (end - begin) // 2
            part = np.argpartition(centroids[ids, axis], mid)
            order[begin:end] = ids[part]
            stack.append((begin + mid, end, node, True))
            stack.append((begin, begin + mid, node, False))

        self._order = order
        self._bbox_lo = np.asarray(bbox_lo)
        self._bbox_hi = np.asarray(bbox_hi)
        self._left = np.asarray(lefts)
        self._right = np.asarray(rights)
        self._start = np.asarray(starts)
        self._end = np.asarray(ends)

    def query(self, points) -> np.ndarray:
        """Distances from each query point to the mesh surface; (Q,) float64."""
        points = check_points(points, name="query points")
        ub, _ = self._vertex_tree.query(points)
        # Strictly above the true distance, so every optimal face is visited
        # and the result is the exact kernel minimum (bit-equal to brute force).
        prune = np.atleast_1d(ub) * (1.0 + 1e-12) + 1e-300
        best = np.full(points.shape[0], np.inf)
        self._visit(0, np.arange(points.shape[0]), points, prune, best)
        return best

    def _visit(self, node, ids, points, prune, best) -> None:
        lo = self._bbox_lo[node]
        hi = self._bbox_hi[node]
        gap = np.maximum(np.maximum(lo - points[ids], points[ids] - hi), 0.0)
        box_dist = np.sqrt((gap * gap).sum(axis=1))
        ids = ids[box_dist < np.minimum(prune[ids], best[ids])]
        if ids.size == 0:
            return
        if self._left[node] < 0:
            tris = self._order[self._start[node] : self._end[node]]
            q = np.repeat(points[ids], tris.size, axis=0)
            tri = np.tile(self._tri[tris], (ids.size, 1, 1))
            d = triangle_distances(q, tri[:, 0], tri[:, 1], tri[:, 2])
            d = d.reshape(ids.size, tris.size).min(axis=1)
            np.minimum.at(best, ids, d)
            return
        self._visit(self._left[node], ids, points, prune, best)
        self._visit(self._right[node], ids, points, prune, best)

    def brute_force(self, points, chunk: int = 200_000) -> np.ndarray:
        """Reference path: min over every face, chunked to bound memory."""
        points = check_points(points, name="query points")
        nf = self._tri.shape[0]
        rows = max(1, chunk // nf)
        out = np.empty(points.shape[0])
        a, b, c = self._tri[:, 0], self._tri[:, 1], self._tri[:, 2]
        for lo_i in range(0, points.shape[0], rows):
            block = points[lo_i : lo_i + rows]
            q = np.repeat(block, nf, axis=0)
            d = triangle_distances(
                q, np.tile(a, (block.shape[0], 1)), np.tile(b, (block.shape[0], 1)),
                np.tile(c, (block.shape[0], 1)),
            )
            out[lo_i : lo_i + rows] = d.reshape(block.shape[0], nf).min(axis=1)
        return out


def point_to_mesh_distance(p, mesh: TriMesh) -> float:
    """Distance from a single point to a mesh; builds a throwaway index.

    Use :class:`MeshDistanceIndex` directly for repeated queries.
    """
    return float(MeshDistanceIndex(mesh).query(check_point(p)[None, :])[0])
