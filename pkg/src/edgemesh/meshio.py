"""Mesh and point-cloud file I/O: OBJ, PLY (ascii + binary little-endian), XYZ.

Parsers reject malformed input with a located error instead of returning a
partial structure. Polygonal faces are fan-triangulated on load.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import PointCloud, TriMesh


class MeshParseError(ValueError):
    """Malformed mesh/cloud file; message carries file and location."""


def _fail(path, location, message) -> None:
    raise MeshParseError(f"{path}: {location}: {message}")


def _fan(indices: list[int]) -> list[tuple[int, int, int]]:
    return [(indices[0], indices[i], indices[i + 1]) for i in range(1, len(indices) - 1)]


# ---------------------------------------------------------------------------
# OBJ


def _parse_obj(path: Path, *, need_faces: bool) -> tuple[np.ndarray, np.ndarray]:
    vertices: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    _fail(path, f"line {lineno}", "vertex needs 3 coordinates")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    _fail(path, f"line {lineno}", f"non-numeric vertex coordinate in {line.strip()!r}")
            elif tag == "f":
                if len(tokens) < 4:
                    _fail(path, f"line {lineno}", "face needs at least 3 vertices")
                idx = []
                for token in tokens[1:]:
                    ref = token.split("/")[0]
                    try:
                        value = int(ref)
                    except ValueError:
                        _fail(path, f"line {lineno}", f"bad face index {token!r}")
                    if value < 0:
                        value = len(vertices) + 1 + value
                    if not 1 <= value <= len(vertices):
                        _fail(path, f"line {lineno}", f"face index {token!r} out of range")
                    idx.append(value - 1)
                faces.extend(_fan(idx))
            # other records (vn, vt, o, g, s, usemtl, mtllib, ...) are ignored
    if not vertices:
        _fail(path, "end of file", "no vertices found")
    if need_faces and not faces:
        _fail(path, "end of file", "no faces found")
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _write_obj(path: Path, vertices: np.ndarray, faces: np.ndarray | None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        if faces is not None:
            for a, b, c in faces:
                fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


# ---------------------------------------------------------------------------
# PLY

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _parse_ply_header(path: Path, fh):
    line = fh.readline()
    if line.strip() != b"ply":
        _fail(path, "line 1", "not a PLY file (missing 'ply' magic)")
    fmt = None
    elements = []  # (name, count, [(prop_name, dtype) or ('list', count_dtype, item_dtype, name)])
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            _fail(path, f"line {lineno}", "unterminated header")
        tokens = raw.decode("ascii", errors="replace").split()
        if not tokens:
            continue
        if tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                _fail(path, f"line {lineno}", f"unsupported PLY format {raw.strip()!r}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                _fail(path, f"line {lineno}", "malformed element declaration")
            try:
                elements.append({"name": tokens[1], "count": int(tokens[2]), "props": []})
            except ValueError:
                _fail(path, f"line {lineno}", "element count is not an integer")
        elif tokens[0] == "property":
            if not elements:
                _fail(path, f"line {lineno}", "property before any element")
            if tokens[1] == "list":
                if len(tokens) != 5 or tokens[2] not in _PLY_DTYPES or tokens[3] not in _PLY_DTYPES:
                    _fail(path, f"line {lineno}", "malformed list property")
                elements[-1]["props"].append(("list", _PLY_DTYPES[tokens[2]], _PLY_DTYPES[tokens[3]], tokens[4]))
            else:
                if len(tokens) != 3 or tokens[1] not in _PLY_DTYPES:
                    _fail(path, f"line {lineno}", f"unsupported property {raw.strip()!r}")
                elements[-1]["props"].append(("scalar", _PLY_DTYPES[tokens[1]], tokens[2]))
        elif tokens[0] == "end_header":
            break
        else:
            _fail(path, f"line {lineno}", f"unknown header record {tokens[0]!r}")
    if fmt is None:
        _fail(path, "header", "missing format declaration")
    return fmt, elements


def _parse_ply(path: Path, *, need_faces: bool) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(path, fh)
        vertices = None
        faces: list[tuple[int, int, int]] = []
        for element in elements:
            name, count, props = element["name"], element["count"], element["props"]
            if any(p[0] == "list" for p in props):
                rows = _read_ply_list_element(path, fh, fmt, count, props)
                if name == "face":
                    for row_no, idx in enumerate(rows):
                        if len(idx) < 3:
                            _fail(path, f"face {row_no}", "face lists fewer than 3 vertices")
                        faces.extend(_fan(list(idx)))
            else:
                names = [p[2] for p in props]
                table = _read_ply_scalar_element(path, fh, fmt, count, props)
                if name == "vertex":
                    if not all(axis in names for axis in "xyz"):
                        _fail(path, "header", "vertex element lacks x/y/z properties")
                    vertices = np.stack([table[axis] for axis in "xyz"], axis=1).astype(np.float64)
        if vertices is None or len(vertices) == 0:
            _fail(path, "end of file", "no vertex element found")
        faces_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces_arr.size and (faces_arr.min() < 0 or faces_arr.max() >= len(vertices)):
            _fail(path, "face data", "face index out of range")
        if need_faces and not faces_arr.size:
            _fail(path, "end of file", "no faces found")
        return vertices, faces_arr


def _read_ply_scalar_element(path, fh, fmt, count, props):
    names = [p[2] for p in props]
    if fmt == "ascii":
        table = {name: np.empty(count) for name in names}
        for row in range(count):
            tokens = fh.readline().split()
            if len(tokens) != len(props):
                _fail(path, f"element row {row}", f"expected {len(props)} values, got {len(tokens)}")
            for (kind, dtype, name), token in zip(props, tokens):
                try:
                    table[name][row] = float(token)
                except ValueError:
                    _fail(path, f"element row {row}", f"non-numeric value {token!r}")
        return table
    dtype = np.dtype([(p[2], "<" + p[1]) for p in props])
    buf = fh.read(dtype.itemsize * count)
    if len(buf) != dtype.itemsize * count:
        _fail(path, "binary body", "unexpected end of file")
    rows = np.frombuffer(buf, dtype=dtype)
    return {name: rows[name] for name in names}


def _read_ply_list_element(path, fh, fmt, count, props):
    if len(props) != 1:
        _fail(path, "header", "mixed list/scalar face element is unsupported")
    _, count_dtype, item_dtype, _ = props[0]
    rows = []
    if fmt == "ascii":
        for row in range(count):
            tokens = fh.readline().split()
            if not tokens:
                _fail(path, f"face {row}", "missing face row")
            try:
                n = int(tokens[0])
                idx = [int(t) for t in tokens[1 : 1 + n]]
            except ValueError:
                _fail(path, f"face {row}", "non-integer face entry")
            if len(idx) != n or len(tokens) != n + 1:
                _fail(path, f"face {row}", "face count does not match entries")
            rows.append(idx)
        return rows
    count_size = np.dtype(count_dtype).itemsize
    item_size = np.dtype(item_dtype).itemsize
    for row in range(count):
        head = fh.read(count_size)
        if len(head) != count_size:
            _fail(path, f"face {row}", "unexpected end of file")
        n = int(np.frombuffer(head, dtype="<" + count_dtype)[0])
        body = fh.read(item_size * n)
        if len(body) != item_size * n:
            _fail(path, f"face {row}", "unexpected end of file")
        rows.append(np.frombuffer(body, dtype="<" + item_dtype).tolist())
    return rows


def _write_ply(path: Path, vertices: np.ndarray, faces: np.ndarray | None, binary: bool) -> None:
    faces = np.empty((0, 3), dtype=np.int64) if faces is None else faces
    header = [
        "ply",
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
        f"element vertex {len(vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(np.ascontiguousarray(vertices, dtype="<f8").tobytes())
            for a, b, c in faces:
                fh.write(struct.pack("<Biii", 3, a, b, c))
        else:
            for x, y, z in vertices:
                fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n".encode("ascii"))
            for a, b, c in faces:
                fh.write(f"3 {a} {b} {c}\n".encode("ascii"))


# ---------------------------------------------------------------------------
# XYZ


def _parse_xyz(path: Path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if len(tokens) != 3:
                _fail(path, f"line {lineno}", f"expected 3 values per line, got {len(tokens)}")
            try:
                rows.append([float(t) for t in tokens])
            except ValueError:
                _fail(path, f"line {lineno}", f"non-numeric value in {line.strip()!r}")
    if not rows:
        _fail(path, "end of file", "no points found")
    return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# public API


def load_mesh(path) -> TriMesh:
    """Load a triangle mesh from .obj or .ply (polygons fan-triangulated)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        vertices, faces = _parse_obj(path, need_faces=True)
    elif suffix == ".ply":
        vertices, faces = _parse_ply(path, need_faces=True)
    else:
        raise MeshParseError(f"{path}: unsupported mesh format {suffix!r}")
    try:
        return TriMesh(vertices, faces)
    except ValueError as exc:
        raise MeshParseError(f"{path}: {exc}") from exc


def save_mesh(mesh: TriMesh, path, *, ply_binary: bool = True) -> None:
    """Write a mesh as .obj or .ply chosen by extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        _write_obj(path, mesh.vertices, mesh.faces)
    elif suffix == ".ply":
        _write_ply(path, mesh.vertices, mesh.faces, binary=ply_binary)
    else:
        raise ValueError(f"unsupported mesh format {suffix!r}")


def load_cloud(path) -> PointCloud:
    """Load a point cloud from .xyz, .obj (vertices only), or .ply."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lower()
    if suffix == ".xyz":
        points = _parse_xyz(path)
    elif suffix == ".obj":
        points, _ = _parse_obj(path, need_faces=False)
    elif suffix == ".ply":
        points, _ = _parse_ply(path, need_faces=False)
    else:
        raise MeshParseError(f"{path}: unsupported cloud format {suffix!r}")
    return PointCloud(points)


def save_cloud(cloud: PointCloud, path, *, ply_binary: bool = True) -> None:
    """Write a cloud as .xyz, .obj, or .ply chosen by extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".xyz":
        with open(path, "w", encoding="utf-8") as fh:
            for x, y, z in cloud.points:
                fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
    elif suffix == ".obj":
        _write_obj(path, cloud.points, None)
    elif suffix == ".ply":
        _write_ply(path, cloud.points, None, binary=ply_binary)
    else:
        raise ValueError(f"unsupported cloud format {suffix!r}")
