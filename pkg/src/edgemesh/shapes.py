"""Synthetic analytic shapes used for training data and evaluation.

Each generator returns a raw mesh in its natural coordinates;
:func:`generate_shape` normalizes mesh and sampled cloud jointly into the
origin-centered unit cube so thresholds are comparable across shapes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PointCloud, TriMesh, normalization_from_points, sample_surface
from .validation import check_count

SHAPE_KINDS = ("sphere", "torus", "box", "cylinder", "file")


def icosphere(radius: float = 1.0, subdivisions: int = 3) -> TriMesh:
    """Subdivided icosahedron projected to a sphere of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts / np.linalg.norm(verts[0]))

    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint_cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint_cache[key] = len(verts) - 1
            return midpoint_cache[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces

    return TriMesh(np.asarray(verts) * radius, np.asarray(faces, dtype=np.int64))


def torus_mesh(
    major_radius: float = 1.0,
    minor_radius: float = 0.4,
    major_segments: int = 96,
    minor_segments: int = 48,
) -> TriMesh:
    """Torus around the z axis: tube of radius ``minor_radius`` at distance ``major_radius``."""
    if not 0 < minor_radius < major_radius:
        raise ValueError("need 0 < minor_radius < major_radius")
    u = 2 * np.pi * np.arange(major_segments) / major_segments
    v = 2 * np.pi * np.arange(minor_segments) / minor_segments
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major_radius + minor_radius * np.cos(vv)
    verts = np.stack(
        [ring * np.cos(uu), ring * np.sin(uu), minor_radius * np.sin(vv)], axis=-1
    ).reshape(-1, 3)

    i = np.arange(major_segments)[:, None]
    j = np.arange(minor_segments)[None, :]
    v00 = (i * minor_segments + j).ravel()
    v10 = (((i + 1) % major_segments) * minor_segments + j).ravel()
    v01 = (i * minor_segments + (j + 1) % minor_segments).ravel()
    v11 = (((i + 1) % major_segments) * minor_segments + (j + 1) % minor_segments).ravel()
    faces = np.concatenate(
        [np.stack([v00, v10, v11], axis=1), np.stack([v00, v11, v01], axis=1)], axis=0
    )
    return TriMesh(verts, faces)


def _grid_face(origin, du, dv, segments):
    """Vertices and faces of one segments x segments quad patch."""
    s = np.linspace(0.0, 1.0, segments + 1)
    uu, vv = np.meshgrid(s, s, indexing="ij")
    verts = origin + uu[..., None] * du + vv[..., None] * dv
    idx = np.arange((segments + 1) ** 2).reshape(segments + 1, segments + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    faces = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)], axis=0)
    return verts.reshape(-1, 3), faces


def box_mesh(extents=(1.0, 1.0, 1.0), segments: int = 8) -> TriMesh:
    """Axis-aligned box centered at the origin, each face a segments^2 grid."""
    ex, ey, ez = (float(e) for e in extents)
    if min(ex, ey, ez) <= 0:
        raise ValueError("extents must be positive")
    hx, hy, hz = ex / 2, ey / 2, ez / 2
    patches = [
        ([-hx, -hy, -hz], [ex, 0, 0], [0, ey, 0]),   # bottom (z = -hz)
        ([-hx, -hy, +hz], [0, ey, 0], [ex, 0, 0]),   # top
        ([-hx, -hy, -hz], [0, ey, 0], [0, 0, ez]),   # x = -hx
        ([+hx, -hy, -hz], [0, 0, ez], [0, ey, 0]),   # x = +hx
        ([-hx, -hy, -hz], [0, 0, ez], [ex, 0, 0]),   # y = -hy
        ([-hx, +hy, -hz], [ex, 0, 0], [0, 0, ez]),   # y = +hy
    ]
    all_verts, all_faces = [], []
    offset = 0
    for origin, du, dv in patches:
        v, f = _grid_face(np.asarray(origin, float), np.asarray(du, float), np.asarray(dv, float), segments)
        all_verts.append(v)
        all_faces.append(f + offset)
        offset += len(v)
    verts = np.concatenate(all_verts)
    faces = np.concatenate(all_faces)
    # merge seam vertices shared between patches (grid endpoints coincide exactly)
    uniq, inverse = np.unique(verts, axis=0, return_inverse=True)
    return TriMesh(uniq, inverse[faces])


def cylinder_mesh(
    radius: float = 0.5,
    height: float = 1.5,
    radial_segments: int = 64,
    height_segments: int = 8,
) -> TriMesh:
    """Closed cylinder along z with fan-capped ends."""
    if radius <= 0 or height <= 0:
        raise ValueError("radius and height must be positive")
    theta = 2 * np.pi * np.arange(radial_segments) / radial_segments
    rim = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    z = np.linspace(-height / 2, height / 2, height_segments + 1)

    verts = [np.column_stack([np.tile(rim, (len(z), 1)),
                              np.repeat(z, radial_segments)])]
    verts.append(np.array([[0.0, 0.0, -height / 2], [0.0, 0.0, height / 2]]))
    verts = np.concatenate(verts)
    bottom_center = len(verts) - 2
    top_center = len(verts) - 1

    faces = []
    for level in range(height_segments):
        base = level * radial_segments
        nxt = (level + 1) * radial_segments
        for s in range(radial_segments):
            s1 = (s + 1) % radial_segments
            faces.append((base + s, nxt + s1, nxt + s))
            faces.append((base + s, base + s1, nxt + s1))
    top_base = height_segments * radial_segments
    for s in range(radial_segments):
        s1 = (s + 1) % radial_segments
        faces.append((bottom_center, s1, s))
        faces.append((top_center, top_base + s, top_base + s1))
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


@dataclass(frozen=True)
class ShapeSpec:
    """Recipe for a ground-truth mesh plus a sparse cloud sampled from it."""

    kind: str
    sample_count: int = 500
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}; expected one of {SHAPE_KINDS}")
        check_count(self.sample_count, name="sample_count", minimum=4)


def build_mesh(spec: ShapeSpec) -> TriMesh:
    """The raw (un-normalized) analytic mesh for a spec."""
    p = spec.params
    if spec.kind == "sphere":
        return icosphere(radius=p.get("radius", 1.0), subdivisions=p.get("subdivisions", 4))
    if spec.kind == "torus":
        return torus_mesh(
            major_radius=p.get("major_radius", 1.0),
            minor_radius=p.get("minor_radius", 0.4),
            major_segments=p.get("major_segments", 96),
            minor_segments=p.get("minor_segments", 48),
        )
    if spec.kind == "box":
        return box_mesh(extents=p.get("extents", (1.0, 1.0, 1.0)), segments=p.get("segments", 8))
    if spec.kind == "cylinder":
        return cylinder_mesh(
            radius=p.get("radius", 0.5),
            height=p.get("height", 1.5),
            radial_segments=p.get("radial_segments", 64),
            height_segments=p.get("height_segments", 8),
        )
    if spec.kind == "file":
        from .meshio import load_mesh

        if "path" not in p:
            raise ValueError("shape kind 'file' requires params['path']")
        return load_mesh(p["path"])
    raise AssertionError(spec.kind)


def generate_shape(spec: ShapeSpec) -> tuple[TriMesh, PointCloud]:
    """Ground-truth mesh and sampled cloud, jointly normalized to the unit cube.

    The normalization record (computed from the mesh bounding box) is attached
    to the returned cloud so coordinates can be mapped back.
    """
    raw = build_mesh(spec)
    record = normalization_from_points(raw.vertices)
    mesh = TriMesh(record.apply(raw.vertices), raw.faces)
    samples = sample_surface(mesh, spec.sample_count, seed=spec.seed)
    cloud = PointCloud(samples.positions, normalization=record).validate()
    return mesh, cloud
