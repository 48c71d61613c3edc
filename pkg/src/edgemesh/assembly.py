"""Mesh generation from scored edges.

Edges predicted to hug the surface are kept, overlong ones pruned, every
closed edge triple becomes a candidate triangle, and candidates are accepted
greedily in ascending size order as long as the mesh stays edge-manifold
(every edge bordering at most two faces). Remaining boundary rings up to a
configurable size are fan-triangulated.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .candidates import generate_candidates
from .embedding import edge_embeddings
from .geometry import DEGENERATE_AREA_TOL, PointCloud, SpatialIndex, TriMesh
from .validation import check_edges


@dataclass(frozen=True)
class AssemblyConfig:
    distance_threshold: float = 0.014  # keep edges predicted closer than this
    length_factor: float = 1.5  # prune edges longer than factor * mean length
    ring_max: int = 8  # largest boundary ring that gets fan-filled
    prune_before_filter: bool = False  # default order: filter by distance first
    circumball_filter: bool = True  # drop triangles whose circumball holds another point

    def __post_init__(self):
        if self.distance_threshold <= 0:
            raise ValueError("distance_threshold must be positive")
        if self.length_factor <= 1:
            raise ValueError("length_factor must exceed 1")
        if self.ring_max < 3:
            raise ValueError("ring_max must be at least 3")


@dataclass(frozen=True)
class ScoredEdgeSet:
    """Candidate edges with their predicted surface distances."""

    edges: np.ndarray  # (E, 2) int64
    lengths: np.ndarray  # (E,)
    predicted: np.ndarray  # (E,)

    def __post_init__(self):
        if not (len(self.edges) == len(self.lengths) == len(self.predicted)):
            raise ValueError("scored edge arrays disagree on length")
        if len(self.predicted) and not np.isfinite(self.predicted).all():
            raise ValueError("predicted distances must be finite")

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class TriangleCandidates:
    """Vertex triples (a < b < c) whose three edges are all present."""

    triangles: np.ndarray  # (T, 3) int64
    max_edge: np.ndarray  # (T,)
    perimeter: np.ndarray  # (T,)

    def __len__(self) -> int:
        return len(self.triangles)


@dataclass
class AssemblyDiagnostics:
    candidate_edges: int = 0
    kept_edges: int = 0
    pruned_edges: int = 0
    triangle_candidates: int = 0
    circumball_rejected: int = 0
    accepted_triangles: int = 0
    boundary_edges: int = 0
    rings_filled: int = 0
    rings_skipped: int = 0
    ring_faces_added: int = 0
    degenerate_faces_dropped: int = 0
    degenerate_frames: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def filter_edges(scored: ScoredEdgeSet, distance_threshold: float) -> ScoredEdgeSet:
    """Edges strictly below the threshold, original order preserved."""
    keep = scored.predicted < distance_threshold
    return ScoredEdgeSet(
        edges=scored.edges[keep], lengths=scored.lengths[keep], predicted=scored.predicted[keep]
    )


def prune_long_edges(scored: ScoredEdgeSet, length_factor: float) -> ScoredEdgeSet:
    """Drop edges strictly longer than factor * mean length (single pass)."""
    if len(scored) == 0:
        return scored
    keep = scored.lengths <= length_factor * scored.lengths.mean()
    return ScoredEdgeSet(
        edges=scored.edges[keep], lengths=scored.lengths[keep], predicted=scored.predicted[keep]
    )


def enumerate_triangles(edges: np.ndarray, points: np.ndarray) -> TriangleCandidates:
    """Every vertex triple whose three pairwise edges are present, emitted once.

    Found by intersecting the sorted adjacency lists of each edge's endpoints,
    counting only third vertices above both endpoints.
    """
    edges = check_edges(edges, len(points))
    adjacency: dict[int, np.ndarray] = {}
    if len(edges):
        canon = np.sort(edges, axis=1)
        both = np.concatenate([canon, canon[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        starts = np.searchsorted(both[:, 0], np.arange(len(points)))
        ends = np.searchsorted(both[:, 0], np.arange(len(points)), side="right")
        adjacency = {
            v: both[starts[v] : ends[v], 1] for v in np.unique(both[:, 0])
        }

    triples = []
    for a, b in np.sort(edges, axis=1):
        if a not in adjacency or b not in adjacency:
            continue
        common = np.intersect1d(adjacency[a], adjacency[b], assume_unique=False)
        for c in common[common > b]:
            triples.append((a, b, c))

    if not triples:
        empty = np.empty(0)
        return TriangleCandidates(np.empty((0, 3), dtype=np.int64), empty, empty)
    tris = np.asarray(sorted(set(triples)), dtype=np.int64)
    pa, pb, pc = points[tris[:, 0]], points[tris[:, 1]], points[tris[:, 2]]
    lengths = np.stack(
        [
            np.linalg.norm(pa - pb, axis=1),
            np.linalg.norm(pb - pc, axis=1),
            np.linalg.norm(pa - pc, axis=1),
        ],
        axis=1,
    )
    return TriangleCandidates(
        triangles=tris, max_edge=lengths.max(axis=1), perimeter=lengths.sum(axis=1)
    )


def triangle_circumballs(points: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Circumcenter and circumradius of each vertex triple.

    Degenerate (collinear) triples get an infinite radius, so a subsequent
    emptiness test rejects them.
    """
    a, b, c = points[triangles[:, 0]], points[triangles[:, 1]], points[triangles[:, 2]]
    ba, ca = b - a, c - a
    n = np.cross(ba, ca)
    nn = np.einsum("ij,ij->i", n, n)
    safe = np.where(nn > 0, nn, 1.0)
    offset = (
        np.einsum("ij,ij->i", ca, ca)[:, None] * np.cross(n, ba)
        + np.einsum("ij,ij->i", ba, ba)[:, None] * np.cross(ca, n)
    ) / (2.0 * safe[:, None])
    center = a + offset
    radius = np.linalg.norm(offset, axis=1)
    radius[nn <= 0] = np.inf
    return center, radius


def circumball_empty(candidates: TriangleCandidates, points: np.ndarray) -> np.ndarray:
    """Mask of triangles whose circumscribed ball strictly contains no other point.

    The classic local-Delaunay acceptance test: redundant long-chord triangles
    that shingle over the surface enclose the points they skip, while a clean
    1-ring triangulation survives. Cocircular points (regular grids) sit on
    the boundary and do not reject.
    """
    if len(candidates) == 0:
        return np.zeros(0, dtype=bool)
    tris = candidates.triangles
    center, radius = triangle_circumballs(points, tris)
    strict = radius * (1.0 - 1e-12)
    finite = np.isfinite(radius)
    keep = finite.copy()
    tree = cKDTree(points)
    hits = tree.query_ball_point(center[finite], strict[finite])
    for row, neighbor_ids in zip(np.flatnonzero(finite), hits):
        corners = set(tris[row])
        c_row = center[row]
        bound = strict[row]
        for p in neighbor_ids:
            if p not in corners and np.linalg.norm(points[p] - c_row) < bound:
                keep[row] = False
                break
    return keep


def greedy_select(candidates: TriangleCandidates) -> np.ndarray:
    """Accept triangles in ascending (max edge, perimeter, vertex triple) order,
    rejecting any whose edge already borders two accepted faces or whose vertex
    set is already present. The result is edge-manifold by construction."""
    if len(candidates) == 0:
        return np.empty((0, 3), dtype=np.int64)
    tris = candidates.triangles
    order = np.lexsort(
        (tris[:, 2], tris[:, 1], tris[:, 0], candidates.perimeter, candidates.max_edge)
    )
    edge_load: dict[tuple[int, int], int] = {}
    seen: set[tuple[int, int, int]] = set()
    accepted = []
    for ti in order:
        a, b, c = map(int, tris[ti])
        key = (a, b, c)
        if key in seen:
            continue
        edges = ((a, b), (b, c), (a, c))
        if any(edge_load.get(e, 0) >= 2 for e in edges):
            continue
        for e in edges:
            edge_load[e] = edge_load.get(e, 0) + 1
        seen.add(key)
        accepted.append(key)
    return np.asarray(accepted, dtype=np.int64).reshape(-1, 3)


def _boundary_rings(faces: np.ndarray) -> tuple[list[list[int]], int, int]:
    """Closed vertex loops of boundary edges (edges on exactly one face).

    Only components where every vertex meets exactly two boundary edges are
    walkable; anything else is reported as skipped.
    """
    if len(faces) == 0:
        return [], 0, 0
    edges = np.sort(
        np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [0, 2]]]), axis=1
    )
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = uniq[counts == 1]
    if not len(boundary):
        return [], 0, 0

    neighbors: dict[int, list[int]] = {}
    for a, b in boundary:
        neighbors.setdefault(int(a), []).append(int(b))
        neighbors.setdefault(int(b), []).append(int(a))

    rings: list[list[int]] = []
    skipped = 0
    visited: set[int] = set()
    for start in sorted(neighbors):
        if start in visited:
            continue
        # flood the component
        component = {start}
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in neighbors[v]:
                if w not in component:
                    component.add(w)
                    frontier.append(w)
        visited |= component
        if any(len(neighbors[v]) != 2 for v in component):
            skipped += 1  # non-unique walk: leave open
            continue
        lowest = min(component)
        ring = [lowest]
        prev, current = lowest, min(neighbors[lowest])  # deterministic direction
        while current != lowest:
            ring.append(current)
            a, b = neighbors[current]
            prev, current = current, b if a == prev else a
        rings.append(ring)
    return rings, len(boundary), skipped


def fill_holes(faces: np.ndarray, ring_max: int) -> tuple[np.ndarray, dict]:
    """Fan-triangulate boundary rings of length 3..ring_max from their lowest vertex.

    A ring is skipped whole if any fan triangle would push an edge past two
    incident faces. Returns the added faces and fill statistics.
    """
    rings, boundary_count, skipped = _boundary_rings(faces)
    stats = {"boundary_edges": boundary_count, "rings_filled": 0, "rings_skipped": skipped}

    edge_load: dict[tuple[int, int], int] = {}
    for a, b, c in np.sort(faces, axis=1) if len(faces) else []:
        for e in ((int(a), int(b)), (int(b), int(c)), (int(a), int(c))):
            edge_load[e] = edge_load.get(e, 0) + 1

    added: list[tuple[int, int, int]] = []
    for ring in sorted(rings):
        if len(ring) > ring_max:
            stats["rings_skipped"] += 1
            continue
        fan = [(ring[0], ring[i], ring[i + 1]) for i in range(1, len(ring) - 1)]
        fan_edges = []
        for tri in fan:
            a, b, c = sorted(tri)
            fan_edges += [(a, b), (b, c), (a, c)]
        load = dict(edge_load)
        ok = True
        for e in fan_edges:
            load[e] = load.get(e, 0) + 1
            if load[e] > 2:
                ok = False
                break
        if not ok:
            stats["rings_skipped"] += 1
            continue
        edge_load = load
        added.extend(fan)
        stats["rings_filled"] += 1
    return np.asarray(added, dtype=np.int64).reshape(-1, 3), stats


def assemble_mesh(
    cloud: PointCloud, scored: ScoredEdgeSet, config: AssemblyConfig
) -> tuple[TriMesh, AssemblyDiagnostics]:
    """Scored edges -> edge-manifold mesh over the cloud's points."""
    diag = AssemblyDiagnostics(candidate_edges=len(scored))

    stages = [
        lambda s: filter_edges(s, config.distance_threshold),
        lambda s: prune_long_edges(s, config.length_factor),
    ]
    if config.prune_before_filter:
        stages.reverse()
    after_first = stages[0](scored)
    surviving = stages[1](after_first)
    if config.prune_before_filter:
        diag.pruned_edges = len(scored) - len(after_first)
        diag.kept_edges = len(surviving)
    else:
        diag.kept_edges = len(after_first)
        diag.pruned_edges = len(after_first) - len(surviving)

    if len(surviving) == 0:
        return TriMesh(cloud.points, np.empty((0, 3), dtype=np.int64)), diag

    candidates = enumerate_triangles(surviving.edges, cloud.points)
    diag.triangle_candidates = len(candidates)
    if config.circumball_filter and len(candidates):
        keep = circumball_empty(candidates, cloud.points)
        diag.circumball_rejected = int((~keep).sum())
        candidates = TriangleCandidates(
            candidates.triangles[keep], candidates.max_edge[keep], candidates.perimeter[keep]
        )
    faces = greedy_select(candidates)
    diag.accepted_triangles = len(faces)

    extra, stats = fill_holes(faces, config.ring_max)
    diag.boundary_edges = stats["boundary_edges"]
    diag.rings_filled = stats["rings_filled"]
    diag.rings_skipped = stats["rings_skipped"]
    diag.ring_faces_added = len(extra)
    if len(extra):
        faces = np.concatenate([faces, extra])

    # honor the mesh contract: no zero-area faces
    if len(faces):
        p = cloud.points
        areas = 0.5 * np.linalg.norm(
            np.cross(p[faces[:, 1]] - p[faces[:, 0]], p[faces[:, 2]] - p[faces[:, 0]]), axis=1
        )
        keep = areas > DEGENERATE_AREA_TOL
        diag.degenerate_faces_dropped = int((~keep).sum())
        faces = faces[keep]

    return TriMesh(cloud.points, faces), diag


def reconstruct(
    cloud: PointCloud,
    predict_fn,
    config: AssemblyConfig | None = None,
    *,
    k_neighbors: int = 32,
    patch_size: int = 50,
    canonical: bool = True,
) -> tuple[TriMesh, AssemblyDiagnostics]:
    """Full cloud-to-mesh pipeline around an arbitrary edge scorer.

    ``predict_fn(edges, emb, emb_sym) -> (E,) distances`` receives the
    candidate edges plus their embedding pairs; plugging in ground-truth
    labels instead of a network isolates the assembly stage. Output vertices
    are the input points, bit-identical.
    """
    config = config or AssemblyConfig()
    cloud.validate()
    index = SpatialIndex(cloud.points)
    candidates = generate_candidates(cloud, index, k_neighbors)
    emb, emb_sym = edge_embeddings(cloud, index, candidates.edges, patch_size, canonical=canonical)
    predicted = np.asarray(predict_fn(candidates.edges, emb, emb_sym), dtype=np.float64)
    if predicted.shape != (len(candidates),):
        raise ValueError("predict_fn must return one distance per edge")
    scored = ScoredEdgeSet(
        edges=candidates.edges, lengths=candidates.lengths, predicted=predicted
    )
    return assemble_mesh(cloud, scored, config)
