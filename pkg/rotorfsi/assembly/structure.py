"""Rotating linear elasticity on the reference structure mesh.

The stiffness acts on the deformation seen in the co-rotating frame:
with ``R = R(theta)`` the element blocks are ``R K0_ab R^T`` where
``K0`` is the plain linear elasticity stiffness. The rotation source is
``blockdiag(R) K0 (I - R^T)(x - x0)``, which equals the rotated stiffness
applied to the rigid rotational displacement.
"""
from __future__ import annotations

import numpy as np


def elasticity_matrix(
    area: np.ndarray, grads: np.ndarray, lame_lambda: float, lame_mu: float
) -> np.ndarray:
    """Plane strain stiffness, local dof ``2a + i``"""
    dot = np.einsum("tak,tbk->tab", grads, grads)
    # block (a, b) = lambda ga gb^T + mu (ga.gb I + gb ga^T)
    local = lame_lambda * np.einsum("tai,tbj->taibj", grads, grads)
    local = local + lame_mu * np.einsum("tab,ij->taibj", dot, np.eye(2))
    local = local + lame_mu * np.einsum("tbi,taj->taibj", grads, grads)
    return (area[:, None, None, None, None] * local).reshape(-1, 6, 6)


def rotate_blocks(local: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """``R K_ab R^T`` for every 2x2 block"""
    blocks = local.reshape(-1, 3, 2, 3, 2)
    rotated = np.einsum("ik,takbl,jl->taibj", rotation, blocks, rotation)
    return rotated.reshape(-1, 6, 6)


def rotation_source(
    stiffness: np.ndarray,
    reference: np.ndarray,
    center: np.ndarray,
    rotation: np.ndarray,
) -> np.ndarray:
    """Local ``blockdiag(R) K0 (I - R^T)(x - x0)``.

    :param stiffness: unrotated element stiffness ``(T, 6, 6)``.
    :param reference: reference vertex coordinates ``(T, 3, 2)``.
    """
    offset = reference - center
    # row-wise (I - R^T) y is y - y @ R
    relative = (offset - offset @ rotation).reshape(-1, 6)
    force = np.einsum("tab,tb->ta", stiffness, relative).reshape(-1, 3, 2)
    return (force @ rotation.T).reshape(-1, 6)
