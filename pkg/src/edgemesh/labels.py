"""Ground-truth edge-to-surface distances and labeled training sets.

The label of a candidate edge is the maximum, over equally spaced sample
points on the edge (10 by default, endpoints included), of each sample's
unsigned distance to the reference mesh. Labels are kept raw: no clamping,
no reweighting.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .candidates import generate_candidates
from .distance import MeshDistanceIndex
from .embedding import edge_embeddings
from .geometry import PointCloud, SpatialIndex, TriMesh
from .validation import check_count, check_edges, check_point

DEFAULT_EDGE_SAMPLES = 10


def sample_edge_points(p_s, p_t, count: int = DEFAULT_EDGE_SAMPLES) -> np.ndarray:
    """``count`` points at parameters i/(count-1) along the segment, endpoints included."""
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    p_s, p_t = check_point(p_s), check_point(p_t)
    t = np.linspace(0.0, 1.0, count)[:, None]
    return p_s * (1.0 - t) + p_t * t


def edge_sample_points(points: np.ndarray, edges: np.ndarray, count: int) -> np.ndarray:
    """(E, count, 3) sample points for a batch of edges."""
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    t = np.linspace(0.0, 1.0, count)[None, :, None]
    p_s = points[edges[:, 0]][:, None, :]
    p_t = points[edges[:, 1]][:, None, :]
    return p_s * (1.0 - t) + p_t * t


def edge_surface_distances(
    points: np.ndarray,
    edges: np.ndarray,
    mesh_index: MeshDistanceIndex,
    count: int = DEFAULT_EDGE_SAMPLES,
) -> np.ndarray:
    """Max point-to-mesh distance over each edge's sample points; (E,) labels."""
    edges = check_edges(edges, len(points))
    samples = edge_sample_points(points, edges, count)
    d = mesh_index.query(samples.reshape(-1, 3))
    return d.reshape(len(edges), count).max(axis=1)


def edge_to_surface_distance(
    edge, cloud: PointCloud, gt: TriMesh, count: int = DEFAULT_EDGE_SAMPLES
) -> float:
    """Single-edge label; builds a throwaway mesh index."""
    edges = check_edges(np.asarray(edge).reshape(1, 2), len(cloud))
    return float(edge_surface_distances(cloud.points, edges, MeshDistanceIndex(gt), count)[0])


@dataclass
class TrainingSet:
    """Labeled candidate edges ready for regression training."""

    edges: np.ndarray  # (S, 2) int64
    embeddings: np.ndarray  # (S, D)
    embeddings_sym: np.ndarray  # (S, D)
    labels: np.ndarray  # (S,)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = len(self.labels)
        if not (len(self.edges) == len(self.embeddings) == len(self.embeddings_sym) == s):
            raise ValueError("training arrays disagree on sample count")
        if s == 0:
            raise ValueError("training set is empty")
        if self.embeddings.shape != self.embeddings_sym.shape:
            raise ValueError("embedding pair shapes differ")
        if not np.isfinite(self.labels).all() or (self.labels < 0).any():
            raise ValueError("labels must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def subsample(self, count: int, seed: int = 0) -> "TrainingSet":
        """Random subset without replacement (all samples if count >= len)."""
        if count >= len(self):
            return self
        pick = np.random.default_rng(seed).choice(len(self), size=count, replace=False)
        pick.sort()
        return TrainingSet(
            edges=self.edges[pick],
            embeddings=self.embeddings[pick],
            embeddings_sym=self.embeddings_sym[pick],
            labels=self.labels[pick],
            meta={**self.meta, "subsampled_to": count, "subsample_seed": seed},
        )


def build_training_set(
    cloud: PointCloud,
    gt: TriMesh,
    k: int = 32,
    n: int = 50,
    *,
    canonical: bool = True,
    edge_sample_count: int = DEFAULT_EDGE_SAMPLES,
    meta: dict | None = None,
) -> TrainingSet:
    """Candidate edges of ``cloud`` labeled against ``gt``, with embedding pairs.

    The cloud and mesh must live in the same (normalized) coordinates.
    """
    index = SpatialIndex(cloud.points)
    candidates = generate_candidates(cloud, index, k)
    emb, emb_sym = edge_embeddings(cloud, index, candidates.edges, n, canonical=canonical)
    labels = edge_surface_distances(
        cloud.points, candidates.edges, MeshDistanceIndex(gt), edge_sample_count
    )
    info = {
        "n_points": len(cloud),
        "k": k,
        "n": n,
        "canonical": canonical,
        "edge_sample_count": edge_sample_count,
    }
    if meta:
        info.update(meta)
    return TrainingSet(
        edges=candidates.edges,
        embeddings=emb,
        embeddings_sym=emb_sym,
        labels=labels,
        meta=info,
    )


def merge_training_sets(sets: list[TrainingSet]) -> TrainingSet:
    """Concatenate compatible training sets; merged meta keeps each source."""
    if not sets:
        raise ValueError("nothing to merge")
    dim = sets[0].dim
    if any(s.dim != dim for s in sets):
        raise ValueError("training sets disagree on embedding dimension")
    return TrainingSet(
        edges=np.concatenate([s.edges for s in sets]),
        embeddings=np.concatenate([s.embeddings for s in sets]),
        embeddings_sym=np.concatenate([s.embeddings_sym for s in sets]),
        labels=np.concatenate([s.labels for s in sets]),
        meta={"sources": [s.meta for s in sets]},
    )


def save_training_set(ts: TrainingSet, path) -> None:
    """Write an .npz record: per-sample edge indices, both embeddings, label,
    plus a JSON header with the generation parameters."""
    np.savez_compressed(
        path,
        edges=ts.edges.astype("<i8"),
        embeddings=ts.embeddings.astype("<f8"),
        embeddings_sym=ts.embeddings_sym.astype("<f8"),
        labels=ts.labels.astype("<f8"),
        header=np.frombuffer(json.dumps(ts.meta).encode("utf-8"), dtype=np.uint8),
    )


def load_training_set(path) -> TrainingSet:
    with np.load(path) as data:
        meta = json.loads(bytes(data["header"]).decode("utf-8")) if "header" in data else {}
        return TrainingSet(
            edges=np.ascontiguousarray(data["edges"], dtype=np.int64),
            embeddings=np.ascontiguousarray(data["embeddings"], dtype=np.float64),
            embeddings_sym=np.ascontiguousarray(data["embeddings_sym"], dtype=np.float64),
            labels=np.ascontiguousarray(data["labels"], dtype=np.float64),
            meta=meta,
        )
