"""Saint Venant-Kirchhoff stress against its rotating linearization.

Used to check that the linear rotating structure model is the first
order expansion of the full material law around zero deformation.
"""
from __future__ import annotations

import numpy as np

from rotorfsi.rotation import rotation_matrix


def piola_full(
    H: np.ndarray, lame_lambda: float, lame_mu: float, theta: float = 0.0
) -> np.ndarray:
    """First Piola-Kirchhoff stress ``R (I + H) S(E)``"""
    strain = H + H.T + H.T @ H
    second = (
        0.5 * lame_lambda * np.trace(strain) * np.eye(2) + lame_mu * strain
    )
    return rotation_matrix(theta) @ (np.eye(2) + H) @ second


def piola_linear(
    H: np.ndarray, lame_lambda: float, lame_mu: float, theta: float = 0.0
) -> np.ndarray:
    """``R (lambda tr(eps) I + 2 mu eps)`` with ``eps = (H + H^T) / 2``"""
    eps = 0.5 * (H + H.T)
    stress = lame_lambda * np.trace(eps) * np.eye(2) + 2.0 * lame_mu * eps
    return rotation_matrix(theta) @ stress


def linearization_consistency_check(
    H: np.ndarray,
    lame_lambda: float,
    lame_mu: float,
    theta: float = 0.0,
) -> tuple[float, float]:
    """Frobenius errors of the linear stress at ``H`` and ``H / 2``.

    The linearization is exact to first order, so halving ``H`` divides
    the error by about four.
    """
    H = np.asarray(H, dtype=float)
    if H.shape != (2, 2):
        raise ValueError(f"displacement gradient must be 2x2, got {H.shape}")
    if np.linalg.norm(H, 2) > 0.5:
        raise ValueError("displacement gradient norm must be at most 0.5")
    errors = []
    for scale in (1.0, 0.5):
        sample = scale * H
        difference = piola_full(
            sample, lame_lambda, lame_mu, theta
        ) - piola_linear(sample, lame_lambda, lame_mu, theta)
        errors.append(float(np.linalg.norm(difference)))
    return errors[0], errors[1]
