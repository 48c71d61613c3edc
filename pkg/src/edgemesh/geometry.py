"""Core geometric types: point clouds, triangle meshes, KNN index, surface sampling.

All coordinates are float64. Clouds and meshes are immutable by convention:
no function in this package mutates the arrays it is handed.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .validation import (
    check_count,
    check_faces,
    check_no_duplicate_points,
    check_point,
    check_points,
)

DEGENERATE_AREA_TOL = 1e-12


@dataclass(frozen=True)
class NormalizationRecord:
    """Translation + uniform scale that maps raw coordinates into the unit cube.

    Forward transform: ``normalized = (raw - center) * scale``.
    """

    center: np.ndarray
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + self.center

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and not self.center.any()


def identity_normalization() -> NormalizationRecord:
    return NormalizationRecord(center=np.zeros(3), scale=1.0)


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points; point order defines vertex identity."""

    points: np.ndarray
    normalization: NormalizationRecord | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", check_points(self.points))

    def __len__(self) -> int:
        return self.points.shape[0]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def validate(self, *, min_points: int = 4) -> "PointCloud":
        """Check the full cloud contract (size, distinct points) and return self."""
        check_points(self.points, min_points=min_points)
        check_no_duplicate_points(self.points)
        return self


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh: ``vertices`` (V, 3) float64 and ``faces`` (F, 3) int64."""

    vertices: np.ndarray
    faces: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=np.int64))

    def __post_init__(self):
        vertices = check_points(self.vertices, name="vertices")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", check_faces(self.faces, len(vertices)))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def triangle_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        f = self.faces
        return self.vertices[f[:, 0]], self.vertices[f[:, 1]], self.vertices[f[:, 2]]

    def face_areas(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals from the vertex winding; zero vector for degenerate faces."""
        a, b, c = self.triangle_corners()
        n = np.cross(b - a, c - a)
        norms = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, norms, out=np.zeros_like(n), where=norms > 0)

    def undirected_edges(self) -> np.ndarray:
        """All face edges as canonical (min, max) pairs, duplicates kept."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
        return np.sort(e, axis=1)

    def validate(self, *, area_tol: float = DEGENERATE_AREA_TOL) -> "TriMesh":
        if self.n_faces and self.face_areas().min() <= area_tol:
            raise ValueError("mesh contains a zero-area face")
        return self


def normalization_from_points(points: np.ndarray) -> NormalizationRecord:
    """Record mapping the bounding box of ``points`` into the origin-centered unit cube.

    The box center goes to the origin and the longest side becomes 1.
    Raises for degenerate input (zero extent in every axis).
    """
    points = check_points(points)
    lo, hi = points.min(axis=0), points.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise ValueError("degenerate input: all points coincide")
    return NormalizationRecord(center=(lo + hi) / 2.0, scale=1.0 / extent)


def normalize_cloud(cloud: PointCloud) -> tuple[PointCloud, NormalizationRecord]:
    """Rescale a cloud so its bounding box is centered at the origin with longest side 1."""
    record = normalization_from_points(cloud.points)
    return PointCloud(record.apply(cloud.points), normalization=record), record


class SpatialIndex:
    """K-nearest-neighbor queries over a fixed point set.

    Results are identical to a brute-force scan: exactly ``k`` hits sorted by
    ascending distance, exact ties broken by ascending point index.
    """

    # Extra neighbors fetched per query so boundary ties can be re-sorted
    # without a second tree pass in the common case.
    _TIE_PAD = 8

    def __init__(self, points):
        self.points = check_points(points)
        self._tree = cKDTree(self.points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def knn(self, query, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices and distances of the k nearest points to a single query point."""
        idx, dist = self.knn_batch(check_point(query)[None, :], k)
        return idx[0], dist[0]

    def knn_batch(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized KNN: (Q, k) index and distance arrays, rows independently sorted."""
        queries = check_points(queries, name="queries")
        n = len(self)
        k = check_count(k, name="k")
        if k > n:
            raise ValueError(f"k={k} exceeds indexed point count {n}")

        m = min(k + self._TIE_PAD, n)
        dist, idx = self._tree.query(queries, k=m)
        if m == 1:
            dist, idx = dist[:, None], idx[:, None]

        # A tie spanning the fetch boundary means candidates may be missing;
        # re-fetch those rows with a wider window until the boundary is strict.
        if m < n:
            unresolved = np.flatnonzero(dist[:, m - 1] <= dist[:, k - 1])
            wider = m
            dist_full, idx_full = None, None
            for row in unresolved:
                w = wider
                while True:
                    w = min(2 * w, n)
                    d_row, i_row = self._tree.query(queries[row], k=w)
                    if w == n or d_row[w - 1] > d_row[k - 1]:
                        break
                if dist_full is None:
                    pad = np.full((queries.shape[0], n - m), np.inf)
                    dist_full = np.concatenate([dist, pad], axis=1)
                    idx_full = np.concatenate(
                        [idx, np.full((queries.shape[0], n - m), n, dtype=idx.dtype)], axis=1
                    )
                dist_full[row, :w] = d_row
                idx_full[row, :w] = i_row
            if dist_full is not None:
                dist, idx = dist_full, idx_full

        order = np.lexsort((idx, dist), axis=1)[:, :k]
        rows = np.arange(queries.shape[0])[:, None]
        return idx[rows, order], dist[rows, order]

    def nearest(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Single nearest neighbor per query (no tie guarantees; metric use only)."""
        queries = check_points(queries, name="queries")
        dist, idx = self._tree.query(queries, k=1)
        return np.atleast_1d(idx), np.atleast_1d(dist)


def build_spatial_index(points) -> SpatialIndex:
    return SpatialIndex(points)


@dataclass(frozen=True)
class SurfaceSamples:
    """Points drawn from a mesh surface together with their source-triangle normals."""

    positions: np.ndarray
    normals: np.ndarray

    def __len__(self) -> int:
        return self.positions.shape[0]


def sample_surface(mesh: TriMesh, count: int, seed: int) -> SurfaceSamples:
    """Draw ``count`` area-weighted uniform samples from the mesh surface.

    Triangles are chosen with probability proportional to area, positions
    uniformly within each chosen triangle. Deterministic for a fixed seed.
    """
    count = check_count(count, name="count")
    if mesh.n_faces == 0:
        raise ValueError("cannot sample an empty mesh")
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0.0:
        raise ValueError("cannot sample a mesh with zero total area")

    rng = np.random.default_rng(seed)
    chosen = rng.choice(mesh.n_faces, size=count, p=areas / total)
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]

    a, b, c = mesh.triangle_corners()
    a, b, c = a[chosen], b[chosen], c[chosen]
    positions = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    normals = mesh.face_normals()[chosen]
    return SurfaceSamples(positions=positions, normals=normals)


def warn_degenerate_faces(mesh: TriMesh, *, area_tol: float = DEGENERATE_AREA_TOL) -> np.ndarray:
    """Return indices of non-degenerate faces, warning if any were dropped."""
    keep = np.flatnonzero(mesh.face_areas() > area_tol)
    dropped = mesh.n_faces - keep.size
    if dropped:
        warnings.warn(f"skipping {dropped} zero-area face(s) in distance queries", stacklevel=3)
    return keep
