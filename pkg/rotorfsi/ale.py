"""Moving fluid mesh around the rotor.

The mesh displacement inside the buffer zone splits into the rigid
rotation and a deformation part. The deformation is the discrete
harmonic extension of two boundary data sets:

* on the rotor outline, structure displacement minus rotation,
* on the sliding circle, the re-matching correction that moves every
  rotating ring node onto a stationary one.

Stationary fluid nodes never move.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from rotorfsi.assembly.elements import p1_laplacian
from rotorfsi.assembly.elements import scatter
from rotorfsi.assembly.elements import triangle_geometry
from rotorfsi.errors import RotorFsiError
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import extract_ring
from rotorfsi.mesh import InterfaceRing
from rotorfsi.mesh import Mesh
from rotorfsi.mesh import RingSide
from rotorfsi.mesh import Subdomain
from rotorfsi.rotation import rotation_matrix
from rotorfsi.rotation import rotational_displacement
from rotorfsi.rotation import RotationSpec

logger = logging.getLogger(__name__)

ALE_OPERATORS = ("harmonic", "elasticity")
MATCHING_RULES = ("forward", "backward")


class RingMismatch(RotorFsiError):
    """Raised when the two sliding rings have different node counts"""


class SolveFailure(RotorFsiError):
    """Raised when the harmonic extension cannot be solved accurately"""


class MeshInversion(RotorFsiError):
    """Raised when a mesh update produces non-positive areas"""


@dataclass(frozen=True, eq=False)
class AleState:
    """Mesh motion of one fixed-point sweep, nodal ``(n, 2)`` arrays.

    ``displacement`` is the total motion (rotation plus deformation on
    buffer-zone nodes, structure displacement on structure nodes).
    ``matching`` is indexed like the rotating ring.
    """

    displacement: np.ndarray
    deformation: np.ndarray
    rotation: np.ndarray
    velocity: np.ndarray
    shift: int
    matching: np.ndarray


def match_sliding_interface(
    ring_r: InterfaceRing,
    ring_st: InterfaceRing,
    theta: float,
    center,
    *,
    direction: int = 1,
    rule: str = "forward",
) -> tuple[int, np.ndarray]:
    """Cyclic re-matching of the rotating ring onto the stationary one.

    ``ring_r`` holds reference positions and angles. Node 0, rotated by
    ``theta``, maps to the first stationary node reached when moving in
    the rotation direction; node ``i`` then maps to ``(K + i) % m``. A
    node lying on a stationary node maps onto it.

    :returns: the unreduced shift K and the correction moving every
        rotated rotating node onto its partner.
    """
    if rule not in MATCHING_RULES:
        raise ValueError(f"unknown matching rule {rule!r}")
    if rule == "backward":
        raise NotImplementedError("only forward matching is implemented")
    m = len(ring_st)
    if len(ring_r) != m:
        raise RingMismatch(
            f"rotating ring has {len(ring_r)} nodes, stationary ring {m}",
            details=[len(ring_r), m],
        )

    two_pi = 2.0 * math.pi
    phi = np.asarray(ring_st.angles, dtype=float)
    angle = float(ring_r.angles[0]) + theta
    turns = math.floor((angle - phi[0]) / two_pi)
    remainder = angle - two_pi * turns
    tolerance = 1e-9 * two_pi / m
    if direction >= 0:
        k = int(np.searchsorted(phi, remainder - tolerance, side="left"))
        if k == m:
            k, turns = 0, turns + 1
    else:
        k = int(np.searchsorted(phi, remainder + tolerance, side="right")) - 1
    shift = turns * m + k

    origin = np.asarray(center, dtype=float)
    rotated = origin + (ring_r.points - origin) @ rotation_matrix(theta).T
    partners = ring_st.points[(shift + np.arange(m)) % m]
    return shift, partners - rotated


class HarmonicExtension:
    """P1 Laplace solver on the reference buffer-zone mesh.

    Nodes on the rotor outline and on the rotating ring are Dirichlet
    nodes; the interior block is factorized once.
    """

    def __init__(self, mesh: Mesh, operator: str = "harmonic"):
        if operator not in ALE_OPERATORS:
            raise ValueError(f"unknown ALE operator {operator!r}")
        if operator == "elasticity":
            raise NotImplementedError(
                "only the harmonic ALE operator is implemented"
            )
        self.n_nodes = mesh.n_nodes
        triangles = mesh.triangles_of(Subdomain.ROT_FLUID)
        self.nodes = np.unique(triangles)
        self.interface_nodes = np.intersect1d(
            mesh.tagged_nodes(BoundaryTag.INTERFACE), self.nodes
        )
        self.ring_nodes = np.asarray(mesh.rotating_ring)
        boundary = np.union1d(self.interface_nodes, self.ring_nodes)
        self.interior = np.setdiff1d(self.nodes, boundary)
        self.boundary = boundary

        area, grads = triangle_geometry(mesh.reference_coords, triangles)
        local = np.arange(self.n_nodes)
        stiffness = scatter(
            p1_laplacian(area, grads),
            local[triangles],
            local[triangles],
            (self.n_nodes, self.n_nodes),
        )
        self._coupling = stiffness[self.interior][:, boundary]
        self._interior_matrix = stiffness[self.interior][:, self.interior]
        self._factor = None
        if len(self.interior):
            try:
                self._factor = splu(self._interior_matrix.tocsc())
            except RuntimeError as error:
                raise SolveFailure(
                    f"harmonic extension matrix is singular: {error}"
                ) from error

    def solve(
        self, interface_values: np.ndarray, ring_values: np.ndarray
    ) -> np.ndarray:
        """Nodal extension, zero outside the buffer zone.

        :param interface_values: ``(n, 2)`` nodal data read on rotor
            outline nodes.
        :param ring_values: ``(n, 2)`` nodal data read on rotating ring
            nodes.
        """
        result = np.zeros((self.n_nodes, 2))
        result[self.interface_nodes] = interface_values[self.interface_nodes]
        result[self.ring_nodes] = ring_values[self.ring_nodes]
        if self._factor is None:
            return result

        rhs = -(self._coupling @ result[self.boundary])
        values = self._factor.solve(rhs)
        residual = self._interior_matrix @ values - rhs
        scale = max(np.abs(rhs).max(), np.finfo(float).tiny)
        if not np.all(np.isfinite(values)) or (
            np.abs(residual).max() > 1e-10 * scale
        ):
            raise SolveFailure(
                "harmonic extension residual too large",
                details=[float(np.abs(residual).max())],
            )
        result[self.interior] = values
        return result


def solve_ale_deformation(
    mesh: Mesh,
    interface_values: np.ndarray,
    sliding_values: np.ndarray,
    extension: HarmonicExtension | None = None,
) -> np.ndarray:
    """Harmonic deformation of the buffer zone from its boundary data"""
    if extension is None:
        extension = HarmonicExtension(mesh)
    return extension.solve(interface_values, sliding_values)


def update_fluid_mesh(
    mesh: Mesh,
    displacement: np.ndarray,
    previous_displacement: np.ndarray,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Current coordinates and mesh velocity from total displacements.

    Rotating ring nodes always sit on stationary positions, so their
    mesh velocity is zero; a change of shift only relabels them.
    """
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    coords = mesh.reference_coords + displacement
    areas = mesh.signed_areas(coords)
    if np.any(areas <= 0):
        inverted = np.flatnonzero(areas <= 0)
        raise MeshInversion(
            f"mesh update inverts {len(inverted)} triangles",
            details=inverted.tolist(),
        )
    velocity = (displacement - previous_displacement) / dt
    velocity[mesh.rotating_ring] = 0.0
    stationary = np.setdiff1d(
        mesh.nodes_of(Subdomain.STAT_FLUID),
        mesh.nodes_of(Subdomain.ROT_FLUID, Subdomain.STRUCTURE),
    )
    velocity[stationary] = 0.0
    return coords, velocity


class MeshMotion:
    """Moves the reference mesh with the rotor.

    :param mesh: the reference mesh, ``ring_shift`` 0.
    :param spec: prescribed rotation.
    """

    def __init__(
        self,
        mesh: Mesh,
        spec: RotationSpec,
        operator: str = "harmonic",
        matching: str = "forward",
    ):
        if matching not in MATCHING_RULES:
            raise ValueError(f"unknown matching rule {matching!r}")
        if matching == "backward":
            raise NotImplementedError("only forward matching is implemented")
        self.reference = mesh
        self.spec = spec
        self.matching = matching
        self.extension = HarmonicExtension(mesh, operator)
        self.ring_r = extract_ring(
            mesh, BoundaryTag.SLIDING, RingSide.ROTATING, reference=True
        )
        self.ring_st = extract_ring(
            mesh, BoundaryTag.SLIDING, RingSide.STATIONARY, reference=True
        )
        self.buffer_nodes = mesh.nodes_of(Subdomain.ROT_FLUID)
        self.structure_nodes = mesh.nodes_of(Subdomain.STRUCTURE)

    def move(
        self,
        t: float,
        structure_displacement: np.ndarray,
        previous_displacement: np.ndarray,
        dt: float,
    ) -> tuple[Mesh, AleState]:
        """Mesh following the rotor at time ``t``.

        :param structure_displacement: nodal ``(n, 2)`` array, read on
            structure nodes.
        :param previous_displacement: total mesh displacement at the
            previous time level.
        """
        theta = self.spec.angle(t)
        reference = self.reference.reference_coords
        u_theta = np.asarray(
            rotational_displacement(reference, self.spec, t)
        ).reshape(-1, 2)
        shift, correction = match_sliding_interface(
            self.ring_r,
            self.ring_st,
            theta,
            self.reference.center,
            direction=self.spec.direction(t),
            rule=self.matching,
        )
        ring_values = np.zeros_like(u_theta)
        ring_values[self.ring_r.nodes] = correction

        deformation = self.extension.solve(
            structure_displacement - u_theta, ring_values
        )
        displacement = np.zeros_like(u_theta)
        displacement[self.buffer_nodes] = (
            u_theta[self.buffer_nodes] + deformation[self.buffer_nodes]
        )
        displacement[self.structure_nodes] = structure_displacement[
            self.structure_nodes
        ]
        coords, velocity = update_fluid_mesh(
            self.reference, displacement, previous_displacement, dt
        )
        logger.debug(
            "mesh motion t=%.6e theta=%.6e shift=%d max|u_m|=%.3e",
            t,
            theta,
            shift,
            float(np.abs(correction).max()),
        )
        state = AleState(
            displacement=displacement,
            deformation=deformation,
            rotation=u_theta,
            velocity=velocity,
            shift=shift,
            matching=correction,
        )
        return self.reference.moved(coords, ring_shift=shift), state
