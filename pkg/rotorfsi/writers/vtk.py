"""Legacy ASCII VTK snapshots of the moving mesh.

Floats are printed with 17 significant digits, so reading a file back
reproduces every float64 value.
"""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import NamedTuple

import numpy as np

from rotorfsi.errors import IoError
from rotorfsi.mesh import Mesh
from rotorfsi.mesh import Subdomain

logger = logging.getLogger(__name__)

VTK_TRIANGLE = 5
HEADER = "# vtk DataFile Version 3.0"


class VtkSnapshot(NamedTuple):
    title: str
    points: np.ndarray
    triangles: np.ndarray
    point_data: dict[str, np.ndarray]
    cell_data: dict[str, np.ndarray]


def _number(value: float) -> str:
    return format(float(value), ".17g")


def _vectors(name: str, values: np.ndarray) -> list[str]:
    lines = [f"VECTORS {name} double"]
    lines.extend(
        f"{_number(x)} {_number(y)} 0" for x, y in np.asarray(values)
    )
    return lines


def _scalars(name: str, values: np.ndarray, kind: str = "double"):
    lines = [f"SCALARS {name} {kind} 1", "LOOKUP_TABLE default"]
    if kind == "int":
        lines.extend(str(int(v)) for v in values)
    else:
        lines.extend(_number(v) for v in values)
    return lines


def node_subdomains(mesh: Mesh) -> np.ndarray:
    """Lowest subdomain tag among the triangles around each node"""
    tags = np.full(mesh.n_nodes, int(max(Subdomain)) + 1, dtype=np.int64)
    for corner in range(3):
        np.minimum.at(tags, mesh.triangles[:, corner], mesh.subdomains)
    return tags


def write_vtk(
    path: str | os.PathLike,
    mesh: Mesh,
    point_vectors: dict[str, np.ndarray],
    point_scalars: dict[str, np.ndarray],
    title: str = "rotorfsi",
) -> Path:
    path = Path(path)
    n, t = mesh.n_nodes, mesh.n_triangles
    lines = [HEADER, title.replace("\n", " ")[:255], "ASCII"]
    lines.append("DATASET UNSTRUCTURED_GRID")
    lines.append(f"POINTS {n} double")
    lines.extend(f"{_number(x)} {_number(y)} 0" for x, y in mesh.coords)
    lines.append(f"CELLS {t} {4 * t}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    lines.append(f"CELL_TYPES {t}")
    lines.extend([str(VTK_TRIANGLE)] * t)
    lines.append(f"CELL_DATA {t}")
    lines.extend(_scalars("subdomain", mesh.subdomains, "int"))
    lines.append(f"POINT_DATA {n}")
    lines.extend(_scalars("node_subdomain", node_subdomains(mesh), "int"))
    for name, values in point_scalars.items():
        lines.extend(_scalars(name, values))
    for name, values in point_vectors.items():
        lines.extend(_vectors(name, values))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as error:
        raise IoError(f"cannot write {path}: {error}") from error
    logger.debug("wrote %s", path)
    return path


def write_vtk_snapshot(state, mesh: Mesh, path: str | os.PathLike) -> Path:
    """Velocity, pressure, displacement and subdomain on current coords"""
    velocity = np.array(state.fluid_velocity, copy=True)
    structure = mesh.nodes_of(Subdomain.STRUCTURE)
    velocity[structure] = state.structure_velocity[structure]
    return write_vtk(
        path,
        mesh,
        {"velocity": velocity, "displacement": state.ale.displacement},
        {"pressure": state.pressure},
        title=f"rotorfsi step {state.step} t={_number(state.time)}",
    )


def _take(tokens: list[str], start: int, count: int) -> list[str]:
    chunk = tokens[start:start + count]
    if len(chunk) != count:
        raise IoError("truncated VTK file")
    return chunk


def read_vtk(path: str | os.PathLike) -> VtkSnapshot:
    """Read back a file written by :func:`write_vtk`"""
    path = Path(path)
    try:
        lines = path.read_text(encoding="ascii").splitlines()
    except (OSError, UnicodeDecodeError) as error:
        raise IoError(f"cannot read {path}: {error}") from error
    if len(lines) < 4 or lines[0] != HEADER or lines[2] != "ASCII":
        raise IoError(f"{path} is not a legacy ASCII VTK file")
    title = lines[1]
    tokens = " ".join(lines[3:]).split()
    points = triangles = None
    point_data: dict[str, np.ndarray] = {}
    cell_data: dict[str, np.ndarray] = {}
    target = point_data
    size = 0
    i = 0
    try:
        while i < len(tokens):
            keyword = tokens[i]
            if keyword == "DATASET":
                i += 2
            elif keyword == "POINTS":
                n = int(tokens[i + 1])
                values = _take(tokens, i + 3, 3 * n)
                points = np.array(values, dtype=float).reshape(n, 3)
                i += 3 + 3 * n
            elif keyword == "CELLS":
                t = int(tokens[i + 1])
                values = np.array(_take(tokens, i + 3, 4 * t), dtype=int)
                triangles = values.reshape(t, 4)[:, 1:]
                i += 3 + 4 * t
            elif keyword == "CELL_TYPES":
                i += 2 + int(tokens[i + 1])
            elif keyword in ("CELL_DATA", "POINT_DATA"):
                target = cell_data if keyword == "CELL_DATA" else point_data
                size = int(tokens[i + 1])
                i += 2
            elif keyword == "SCALARS":
                name, kind = tokens[i + 1], tokens[i + 2]
                # SCALARS name type 1 LOOKUP_TABLE default
                values = _take(tokens, i + 6, size)
                dtype = int if kind == "int" else float
                target[name] = np.array(values, dtype=dtype)
                i += 6 + size
            elif keyword == "VECTORS":
                name = tokens[i + 1]
                values = _take(tokens, i + 3, 3 * size)
                target[name] = np.array(values, dtype=float).reshape(
                    size, 3
                )[:, :2]
                i += 3 + 3 * size
            else:
                raise IoError(f"unexpected VTK keyword {keyword!r}")
    except (IndexError, ValueError) as error:
        raise IoError(f"malformed VTK file {path}: {error}") from error
    if points is None or triangles is None:
        raise IoError(f"{path} has no points or cells")
    return VtkSnapshot(title, points, triangles, point_data, cell_data)
