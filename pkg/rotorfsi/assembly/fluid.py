"""Stabilized P1-P1 fluid terms on the current (moving) mesh.

Every function returns element arrays in the layout of
:mod:`rotorfsi.assembly.elements`. Nodal input fields are ``(T, 3, 2)``
arrays already gathered at the element vertices.
"""
from __future__ import annotations

import numpy as np

from rotorfsi.assembly.elements import expand_identity
from rotorfsi.assembly.elements import p1_mass

SUPG_SPEED_FLOOR = 1e-12


def viscous_matrix(
    area: np.ndarray, grads: np.ndarray, coefficient: float
) -> np.ndarray:
    """``coefficient * (eps(u), eps(v))`` with local dof ``2a + i``"""
    dot = np.einsum("tak,tbk->tab", grads, grads)
    # (a, i, b, j) -> delta_ij ga.gb + ga_j gb_i
    local = np.einsum("tab,ij->taibj", dot, np.eye(2))
    local = local + np.einsum("taj,tbi->taibj", grads, grads)
    local = 0.5 * coefficient * area[:, None, None, None, None] * local
    return local.reshape(-1, 6, 6)


def mass_matrix(area: np.ndarray, density: float, dt: float) -> np.ndarray:
    return expand_identity(p1_mass(area) * (density / dt))


def advection_matrix(
    area: np.ndarray,
    grads: np.ndarray,
    advection: np.ndarray,
    density: float,
) -> np.ndarray:
    """``density * (a . grad u, v)`` for the frozen nodal field ``a``"""
    weighted = np.einsum("tac,tck->tak", p1_mass(area), advection)
    local = np.einsum("tak,tbk->tab", weighted, grads)
    return expand_identity(density * local)


def newton_matrix(
    area: np.ndarray,
    grads: np.ndarray,
    iterate: np.ndarray,
    density: float,
) -> np.ndarray:
    """``density * (u . grad z, v)``, the reaction part of the Newton
    linearization around ``z``"""
    gradient = np.einsum("tci,tcj->tij", iterate, grads)
    local = np.einsum("tab,tij->taibj", p1_mass(area), gradient)
    return density * local.reshape(-1, 6, 6)


def newton_rhs(
    area: np.ndarray,
    grads: np.ndarray,
    iterate: np.ndarray,
    density: float,
) -> np.ndarray:
    """``density * (z . grad z, v)``, local vectors ``(T, 6)``"""
    gradient = np.einsum("tci,tcj->tij", iterate, grads)
    weighted = np.einsum("tac,tcj->taj", p1_mass(area), iterate)
    local = np.einsum("tij,taj->tai", gradient, weighted)
    return density * local.reshape(-1, 6)


def supg_parameter(
    advection: np.ndarray,
    diameter: np.ndarray,
    density: float,
    viscosity: float,
    delta: float,
) -> np.ndarray:
    """Elementwise ``delta h / |a|``, zero where the element Peclet
    number ``density |a| h / (2 viscosity)`` is at most one"""
    speed = np.linalg.norm(advection, axis=2).max(axis=1)
    peclet = density * speed * diameter / (2.0 * viscosity)
    active = (peclet > 1.0) & (speed >= SUPG_SPEED_FLOOR)
    tau = np.zeros_like(speed)
    tau[active] = delta * diameter[active] / speed[active]
    return tau


def supg_matrix(
    area: np.ndarray,
    grads: np.ndarray,
    advection: np.ndarray,
    tau: np.ndarray,
    density: float,
) -> np.ndarray:
    """``density * tau * (a . grad u, a . grad v)``"""
    directional = np.einsum("tck,tak->tca", advection, grads)
    local = np.einsum(
        "tca,tcd,tdb->tab", directional, p1_mass(area), directional
    )
    return expand_identity(density * tau[:, None, None] * local)


def divergence_matrix(area: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """``(div u, q)``, shape ``(T, 3, 6)`` with pressure rows"""
    local = np.broadcast_to(
        (area[:, None, None] / 3.0 * grads.reshape(-1, 1, 6)),
        (len(area), 3, 6),
    )
    return np.array(local)


def pressure_stabilization(
    area: np.ndarray,
    grads: np.ndarray,
    diameter: np.ndarray,
    viscosity: float,
    delta: float,
) -> np.ndarray:
    """``delta h^2 / viscosity (grad p, grad q)`` per element"""
    dot = np.einsum("tak,tbk->tab", grads, grads)
    weight = delta * diameter**2 / viscosity * area
    return weight[:, None, None] * dot


def load_vector(area: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``(f, v)`` for nodal ``values``, local vectors ``(T, 6)``"""
    return np.einsum("tab,tbi->tai", p1_mass(area), values).reshape(-1, 6)
