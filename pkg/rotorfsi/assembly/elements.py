"""Linear triangle kernels vectorised over elements.

Arrays follow one layout everywhere: ``area`` is ``(T,)``, barycentric
gradients are ``(T, 3, 2)`` and local matrices are ``(T, 3, 3)`` for
scalar fields or ``(T, 6, 6)`` for vector fields with local dof order
``2 * vertex + component``.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse

from rotorfsi.errors import RotorFsiError

# barycentric coordinates of the edge midpoints, exact for quadratics
MIDPOINT_RULE = np.array(
    [
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]
)


class QuadratureOnInvertedElement(RotorFsiError):
    """Raised when an element has non-positive area"""


def triangle_geometry(
    coords: np.ndarray, triangles: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Areas and gradients of the three hat functions"""
    p = coords[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0):
        bad = np.flatnonzero(det <= 0)
        raise QuadratureOnInvertedElement(
            f"{len(bad)} elements have non-positive area",
            details=bad.tolist(),
        )
    grads = np.empty((len(triangles), 3, 2))
    grads[:, 1, 0] = d2[:, 1] / det
    grads[:, 1, 1] = -d2[:, 0] / det
    grads[:, 2, 0] = -d1[:, 1] / det
    grads[:, 2, 1] = d1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return 0.5 * det, grads


def longest_edge(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = coords[triangles]
    sides = p[:, [1, 2, 0]] - p
    return np.linalg.norm(sides, axis=2).max(axis=1)


def p1_mass(area: np.ndarray) -> np.ndarray:
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return area[:, None, None] * local


def p1_laplacian(area: np.ndarray, grads: np.ndarray) -> np.ndarray:
    return area[:, None, None] * np.einsum("tak,tbk->tab", grads, grads)


def vector_dofs(slots: np.ndarray) -> np.ndarray:
    """Local-to-global map of a vector field, ``(T, 6)``"""
    dofs = np.empty((len(slots), 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * slots
    dofs[:, 1::2] = 2 * slots + 1
    return dofs


def expand_identity(local: np.ndarray) -> np.ndarray:
    """``local[a, b] * I2`` as a vector-field block, ``(T, 6, 6)``"""
    return np.einsum("tab,ij->taibj", local, np.eye(2)).reshape(-1, 6, 6)


def scatter(
    local: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    shape: tuple[int, int],
) -> sparse.csr_matrix:
    """Sum local matrices into a global CSR matrix.

    Entries whose row or column is negative are dropped. Duplicates are
    summed in element order, so the result does not depend on anything
    but the inputs.
    """
    n_loc_r, n_loc_c = local.shape[1], local.shape[2]
    r = np.repeat(rows, n_loc_c, axis=1).reshape(-1)
    c = np.tile(cols, (1, n_loc_r)).reshape(-1)
    values = local.reshape(-1)
    keep = (r >= 0) & (c >= 0)
    matrix = sparse.coo_matrix(
        (values[keep], (r[keep], c[keep])), shape=shape
    ).tocsr()
    matrix.sum_duplicates()
    return matrix


def scatter_vector(
    local: np.ndarray, rows: np.ndarray, size: int
) -> np.ndarray:
    result = np.zeros(size)
    flat_rows = rows.reshape(-1)
    keep = flat_rows >= 0
    np.add.at(result, flat_rows[keep], local.reshape(-1)[keep])
    return result
