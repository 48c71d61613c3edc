"""Candidate edge generation: K nearest neighbors per vertex, deduplicated."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud, SpatialIndex
from .validation import check_count


@dataclass(frozen=True)
class CandidateEdgeSet:
    """Undirected candidate edges as (i, j) pairs with i < j, lexicographically sorted."""

    edges: np.ndarray  # (E, 2) int64
    lengths: np.ndarray  # (E,) float64
    k_used: int

    def __len__(self) -> int:
        return self.edges.shape[0]


def generate_candidates(cloud: PointCloud, index: SpatialIndex, k: int) -> CandidateEdgeSet:
    """Connect every vertex to its k nearest neighbors (self excluded).

    An undirected edge discovered from both endpoints is stored once, so the
    result has at most N*k edges. Edges are sorted by (i, j) for determinism.
    """
    n = len(cloud)
    k = check_count(k, name="k")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the cloud size {n}")
    cloud.validate(min_points=2)  # distinct points guarantee one self hit per KNN row

    neighbor_idx, _ = index.knn_batch(cloud.points, k + 1)
    sources = np.repeat(np.arange(n), k + 1)
    targets = neighbor_idx.ravel()
    keep = sources != targets  # drop the self hit; exactly one per row
    pairs = np.stack([sources[keep], targets[keep]], axis=1).reshape(n, k, 2).reshape(-1, 2)
    pairs.sort(axis=1)
    edges = np.unique(pairs, axis=0)

    lengths = np.linalg.norm(cloud.points[edges[:, 0]] - cloud.points[edges[:, 1]], axis=1)
    return CandidateEdgeSet(edges=edges, lengths=lengths, k_used=k)


def save_edges_txt(edge_set: CandidateEdgeSet, path) -> None:
    """Debug dump: one `i j length` line per edge."""
    with open(path, "w", encoding="utf-8") as fh:
        for (i, j), length in zip(edge_set.edges, edge_set.lengths):
            fh.write(f"{i} {j} {length:.17g}\n")
