"""Input validation helpers shared across the package.

These mirror the spirit of sklearn's ``check_array``: coerce to the
canonical dtype/shape, fail loudly with a message that names the offender.
"""
from __future__ import annotations

import numpy as np


def check_points(points, *, name: str = "points", min_points: int = 1) -> np.ndarray:
    """Coerce to a contiguous (N, 3) float64 array of finite coordinates."""
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.shape == (3,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {arr.shape}")
    if arr.shape[0] < min_points:
        raise ValueError(f"{name} needs at least {min_points} points, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def check_point(p, *, name: str = "point") -> np.ndarray:
    """Coerce to a single (3,) float64 point."""
    arr = np.asarray(p, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {np.asarray(p).shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def check_faces(faces, n_vertices: int, *, name: str = "faces") -> np.ndarray:
    """Coerce to (F, 3) int64 vertex triples, all indices valid and distinct."""
    arr = np.ascontiguousarray(faces, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (F, 3), got {arr.shape}")
    if arr.min() < 0 or arr.max() >= n_vertices:
        raise ValueError(f"{name} reference vertices outside [0, {n_vertices})")
    if ((arr[:, 0] == arr[:, 1]) | (arr[:, 1] == arr[:, 2]) | (arr[:, 0] == arr[:, 2])).any():
        raise ValueError(f"{name} contain a face with a repeated vertex")
    return arr


def check_edges(edges, n_vertices: int, *, name: str = "edges") -> np.ndarray:
    """Coerce to (E, 2) int64 index pairs with valid, distinct endpoints."""
    arr = np.ascontiguousarray(edges, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (E, 2), got {arr.shape}")
    if arr.min() < 0 or arr.max() >= n_vertices:
        raise ValueError(f"{name} reference vertices outside [0, {n_vertices})")
    if (arr[:, 0] == arr[:, 1]).any():
        raise ValueError(f"{name} contain a self-edge")
    return arr


def check_no_duplicate_points(points: np.ndarray, *, name: str = "points") -> None:
    """Raise if any two rows coincide exactly."""
    if points.shape[0] != np.unique(points, axis=0).shape[0]:
        raise ValueError(f"{name} contain duplicate points")


def check_count(value, *, name: str, minimum: int = 1) -> int:
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value
