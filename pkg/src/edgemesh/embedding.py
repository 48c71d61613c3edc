"""Per-edge local canonical frames and flattened neighbor-coordinate embeddings.

For an edge from p_s to p_t with neighbor centroid c_g, the frame is:
origin at the edge midpoint, x along the edge direction, y along
(p_t - p_s) x (c_g - p_s), z = x cross y. Expressing the neighbors of the
midpoint in this frame makes the embedding invariant to rigid transforms of
the whole cloud, and swapping the endpoints exactly flips the x and y
coordinates (the symmetric twin used for order-invariant predictions).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud, SpatialIndex
from .validation import check_count, check_edges, check_point

# |u x w| below this fraction of |u||w| counts as collinear and triggers
# the deterministic fallback axis.
FRAME_COLLINEARITY_TOL = 1e-9


@dataclass(frozen=True)
class EdgeNeighborhoods:
    """For each edge: the n cloud points nearest its midpoint, plus their centroid.

    Neighbor rows are sorted by ascending distance to the midpoint (ties by
    vertex index); both edge endpoints are eligible and usually present.
    """

    indices: np.ndarray  # (E, n) int64
    centroids: np.ndarray  # (E, 3)

    @property
    def size(self) -> int:
        return self.indices.shape[1]


@dataclass(frozen=True)
class CanonicalFrames:
    """Batch of orthonormal frames; rows of ``axes[e]`` are the x, y, z axes."""

    origins: np.ndarray  # (E, 3)
    axes: np.ndarray  # (E, 3, 3)
    degenerate: np.ndarray  # (E,) bool - fallback axis was used


def edge_neighborhoods(
    index: SpatialIndex, cloud: PointCloud, edges: np.ndarray, n: int
) -> EdgeNeighborhoods:
    """The n nearest cloud points to each edge midpoint."""
    n = check_count(n, name="n")
    if n > len(cloud):
        raise ValueError(f"n={n} exceeds cloud size {len(cloud)}")
    edges = check_edges(edges, len(cloud))
    midpoints = 0.5 * (cloud.points[edges[:, 0]] + cloud.points[edges[:, 1]])
    idx, dist = index.knn_batch(midpoints, n)

    # The two endpoints are mathematically equidistant from the midpoint, but
    # rounding breaks that tie inconsistently across rigid motions. Pin both to
    # the exact common value so the (distance, index) order is stable.
    half = 0.5 * np.linalg.norm(cloud.points[edges[:, 0]] - cloud.points[edges[:, 1]], axis=1)
    is_endpoint = (idx == edges[:, [0]]) | (idx == edges[:, [1]])
    dist = np.where(is_endpoint, half[:, None], dist)
    order = np.lexsort((idx, dist), axis=1)
    idx = np.take_along_axis(idx, order, axis=1)

    centroids = cloud.points[idx].mean(axis=1)
    return EdgeNeighborhoods(indices=idx, centroids=centroids)


def canonical_frames(p_s: np.ndarray, p_t: np.ndarray, c_g: np.ndarray) -> CanonicalFrames:
    """Canonical frames for edges (p_s[e], p_t[e]) with neighbor centroids c_g[e]."""
    p_s, p_t, c_g = np.atleast_2d(p_s), np.atleast_2d(p_t), np.atleast_2d(c_g)
    u = p_t - p_s
    u_norm = np.linalg.norm(u, axis=1)
    if (u_norm == 0).any():
        raise ValueError("edge endpoints coincide")
    x = u / u_norm[:, None]

    w = c_g - p_s
    y_raw = np.cross(u, w)
    y_norm = np.linalg.norm(y_raw, axis=1)
    w_norm = np.linalg.norm(w, axis=1)
    degenerate = y_norm <= FRAME_COLLINEARITY_TOL * u_norm * w_norm

    y = np.empty_like(x)
    ok = ~degenerate
    y[ok] = y_raw[ok] / y_norm[ok, None]
    if degenerate.any():
        # centroid collinear with the edge: pick the basis vector least
        # aligned with x (ties to the lowest axis) and build y from it
        xd = x[degenerate]
        basis = np.eye(3)[np.abs(xd).argmin(axis=1)]
        yd = np.cross(xd, basis)
        y[degenerate] = yd / np.linalg.norm(yd, axis=1, keepdims=True)
    z = np.cross(x, y)

    return CanonicalFrames(
        origins=0.5 * (p_s + p_t),
        axes=np.stack([x, y, z], axis=1),
        degenerate=degenerate,
    )


def canonical_frame(p_s, p_t, c_g) -> CanonicalFrames:
    """Single-edge convenience wrapper around :func:`canonical_frames`."""
    return canonical_frames(check_point(p_s), check_point(p_t), check_point(c_g))


def embed_edges(
    cloud: PointCloud,
    edges: np.ndarray,
    neighborhoods: EdgeNeighborhoods,
    frames: CanonicalFrames,
) -> np.ndarray:
    """Flattened (E, 3n) local coordinates of each edge's neighbors in its frame.

    Row layout: [x_0, y_0, z_0, x_1, y_1, z_1, ...] in neighborhood order.
    Coordinates keep the cloud's absolute scale.
    """
    rel = cloud.points[neighborhoods.indices] - frames.origins[:, None, :]
    local = np.einsum("eai,eni->ena", frames.axes, rel)
    return local.reshape(local.shape[0], -1)


def embed_edges_raw(
    cloud: PointCloud, edges: np.ndarray, neighborhoods: EdgeNeighborhoods
) -> np.ndarray:
    """Ablation embedding: midpoint-centered world coordinates, no frame rotation."""
    edges = check_edges(edges, len(cloud))
    midpoints = 0.5 * (cloud.points[edges[:, 0]] + cloud.points[edges[:, 1]])
    rel = cloud.points[neighborhoods.indices] - midpoints[:, None, :]
    return rel.reshape(rel.shape[0], -1)


def symmetric_embedding(embedding: np.ndarray) -> np.ndarray:
    """Flip the x and y local coordinates of every neighbor: the embedding the
    orientation-reversed edge would produce."""
    emb = np.asarray(embedding, dtype=np.float64)
    if emb.shape[-1] % 3 != 0:
        raise ValueError("embedding length must be a multiple of 3")
    out = emb.reshape(*emb.shape[:-1], -1, 3) * np.array([-1.0, -1.0, 1.0])
    return out.reshape(emb.shape)


def edge_embeddings(
    cloud: PointCloud,
    index: SpatialIndex,
    edges: np.ndarray,
    n: int,
    canonical: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Embedding and symmetric twin for each edge; the full pipeline path.

    With ``canonical=False`` (the embedding ablation) the raw midpoint-centered
    coordinates are used and the twin equals the embedding, since reversing the
    edge changes nothing in that representation.
    """
    edges = check_edges(edges, len(cloud))
    nbh = edge_neighborhoods(index, cloud, edges, n)
    if not canonical:
        emb = embed_edges_raw(cloud, edges, nbh)
        return emb, emb.copy()
    frames = canonical_frames(
        cloud.points[edges[:, 0]], cloud.points[edges[:, 1]], nbh.centroids
    )
    emb = embed_edges(cloud, edges, nbh, frames)
    return emb, symmetric_embedding(emb)
