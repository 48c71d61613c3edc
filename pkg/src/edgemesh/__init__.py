"""edgemesh: explicit mesh reconstruction from sparse point clouds via edge prediction.

The pipeline connects each point to its nearest neighbors, embeds every
candidate edge in a rigid-motion-invariant local frame, regresses the edge's
distance to the underlying surface with a small MLP, keeps the near-surface
edges, and assembles an edge-manifold triangle mesh from them.
"""

from .assembly import (
    AssemblyConfig,
    AssemblyDiagnostics,
    ScoredEdgeSet,
    assemble_mesh,
    enumerate_triangles,
    fill_holes,
    filter_edges,
    greedy_select,
    prune_long_edges,
    reconstruct,
)
from .candidates import CandidateEdgeSet, generate_candidates
from .config import PipelineConfig
from .distance import MeshDistanceIndex, point_to_mesh_distance, point_triangle_distance
from .embedding import (
    CanonicalFrames,
    EdgeNeighborhoods,
    canonical_frame,
    canonical_frames,
    edge_embeddings,
    edge_neighborhoods,
    embed_edges,
    symmetric_embedding,
)
from .estimator import EdgeDistanceRegressor, MeshReconstructor
from .geometry import (
    NormalizationRecord,
    PointCloud,
    SpatialIndex,
    SurfaceSamples,
    TriMesh,
    build_spatial_index,
    normalization_from_points,
    normalize_cloud,
    sample_surface,
)
from .labels import (
    TrainingSet,
    build_training_set,
    edge_to_surface_distance,
    edge_surface_distances,
    load_training_set,
    merge_training_sets,
    sample_edge_points,
    save_training_set,
)
from .meshio import MeshParseError, load_cloud, load_mesh, save_cloud, save_mesh
from .metrics import MetricReport, chamfer, evaluate, f_score, normal_consistency
from .network import (
    AdamState,
    Architecture,
    RegressorParams,
    TrainConfig,
    adam_step,
    backward,
    forward,
    init_params,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
    train,
)
from .shapes import ShapeSpec, generate_shape

__version__ = "0.1.0"
