"""Degrees of freedom and Dirichlet constraints.

Velocity unknowns live on "slots": one slot per merged node. A node on
the fluid-structure interface owns one slot used by fluid and structure
elements alike, and every rotating ring node shares the slot of its
current stationary partner. Velocity dof ``2 * slot + component``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable
from typing import NamedTuple

import numpy as np

from rotorfsi.errors import RotorFsiError
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import FLUID_SUBDOMAINS
from rotorfsi.mesh import Mesh
from rotorfsi.mesh import Subdomain

logger = logging.getLogger(__name__)

CORNER_POLICIES = ("priority", "strict")
CONFLICT_TOLERANCE = 1e-12

DEFAULT_PRIORITY = {
    BoundaryTag.WALL: 3,
    BoundaryTag.INLET: 2,
    BoundaryTag.AXIS: 1,
}


class InconsistentConstraint(RotorFsiError):
    """Raised when one node receives different Dirichlet values"""


def _frozen(array, dtype=None) -> np.ndarray:
    value = np.array(array, dtype=dtype, copy=True)
    value.setflags(write=False)
    return value


@dataclass(frozen=True, eq=False)
class DofMap:
    canonical: np.ndarray
    velocity_slot: np.ndarray
    pressure_slot: np.ndarray
    n_velocity: int
    n_pressure: int
    n_unmerged_velocity: int
    interface_nodes: np.ndarray
    fluid_nodes: np.ndarray
    structure_nodes: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.n_velocity // 2

    @property
    def size(self) -> int:
        return self.n_velocity + self.n_pressure

    def velocity_dofs(self, nodes) -> np.ndarray:
        """``(k, 2)`` dof ids of the given nodes"""
        slots = self.velocity_slot[np.asarray(nodes, dtype=np.int64)]
        if np.any(slots < 0):
            raise KeyError("some nodes carry no velocity unknowns")
        return np.column_stack([2 * slots, 2 * slots + 1])

    def velocity_vector(self, nodal: np.ndarray) -> np.ndarray:
        """Dof vector from nodal ``(n, 2)`` values of the merged nodes"""
        vector = np.zeros(self.n_velocity)
        nodes = np.flatnonzero(self.velocity_slot >= 0)
        owners = nodes[self.canonical[nodes] == nodes]
        dofs = self.velocity_dofs(owners)
        vector[dofs[:, 0]] = nodal[owners, 0]
        vector[dofs[:, 1]] = nodal[owners, 1]
        return vector

    def nodal_velocity(self, vector: np.ndarray) -> np.ndarray:
        """Nodal ``(n, 2)`` values, zero on nodes without unknowns"""
        nodal = np.zeros((len(self.velocity_slot), 2))
        nodes = np.flatnonzero(self.velocity_slot >= 0)
        pairs = np.asarray(vector).reshape(-1, 2)
        nodal[nodes] = pairs[self.velocity_slot[nodes]]
        return nodal

    def pressure_vector(self, nodal: np.ndarray) -> np.ndarray:
        vector = np.zeros(self.n_pressure)
        nodes = np.flatnonzero(self.pressure_slot >= 0)
        owners = nodes[self.canonical[nodes] == nodes]
        vector[self.pressure_slot[owners]] = nodal[owners]
        return vector

    def nodal_pressure(self, vector: np.ndarray) -> np.ndarray:
        nodal = np.zeros(len(self.pressure_slot))
        nodes = np.flatnonzero(self.pressure_slot >= 0)
        nodal[nodes] = np.asarray(vector)[self.pressure_slot[nodes]]
        return nodal


def build_dofmap(
    mesh: Mesh, *, fluid: bool = True, structure: bool = True
) -> DofMap:
    """Number the unknowns of the current mesh.

    :param fluid: include fluid velocity and pressure unknowns.
    :param structure: include structure velocity unknowns.
    """
    canonical = mesh.canonical_nodes()
    n = mesh.n_nodes
    fluid_nodes = np.empty(0, dtype=np.int64)
    structure_nodes = np.empty(0, dtype=np.int64)
    if fluid:
        fluid_nodes = np.unique(
            canonical[mesh.triangles_of(*FLUID_SUBDOMAINS)]
        )
    if structure:
        structure_nodes = mesh.nodes_of(Subdomain.STRUCTURE)

    owners = np.union1d(fluid_nodes, structure_nodes)
    slot_of_owner = np.full(n, -1, dtype=np.int64)
    slot_of_owner[owners] = np.arange(len(owners))
    velocity_slot = slot_of_owner[canonical]

    pressure_of_owner = np.full(n, -1, dtype=np.int64)
    pressure_of_owner[fluid_nodes] = np.arange(len(fluid_nodes))
    pressure_slot = pressure_of_owner[canonical]

    interface = np.intersect1d(fluid_nodes, structure_nodes)
    return DofMap(
        canonical=_frozen(canonical),
        velocity_slot=_frozen(velocity_slot),
        pressure_slot=_frozen(pressure_slot),
        n_velocity=2 * len(owners),
        n_pressure=len(fluid_nodes),
        n_unmerged_velocity=2 * (len(fluid_nodes) + len(structure_nodes)),
        interface_nodes=_frozen(interface),
        fluid_nodes=_frozen(fluid_nodes),
        structure_nodes=_frozen(structure_nodes),
    )


class BoundaryCondition(NamedTuple):
    """Velocity Dirichlet data on tagged boundary nodes.

    ``value(points, t)`` receives reference coordinates ``(k, 2)`` and
    returns ``(k, 2)`` velocities. Higher ``priority`` wins at nodes
    shared by two conditions.
    """

    tag: BoundaryTag
    value: Callable[[np.ndarray, float], np.ndarray]
    priority: int | None = None

    @property
    def rank(self) -> int:
        if self.priority is not None:
            return self.priority
        return DEFAULT_PRIORITY.get(self.tag, 0)


class DirichletSet(NamedTuple):
    velocity_dofs: np.ndarray
    velocity_values: np.ndarray
    pressure_dofs: np.ndarray
    pressure_values: np.ndarray


def build_constraints(
    mesh: Mesh,
    dofmap: DofMap,
    conditions,
    t: float,
    policy: str = "priority",
    pressure_pins=None,
) -> DirichletSet:
    """Collect Dirichlet values per dof.

    With ``policy="priority"`` disagreeing values at shared nodes are
    resolved by rank and logged; ``"strict"`` raises instead.

    :param pressure_pins: ``(node, value)`` pairs fixing the pressure.
    """
    if policy not in CORNER_POLICIES:
        raise ValueError(f"unknown corner policy {policy!r}")
    chosen: dict[int, tuple[np.ndarray, int, BoundaryTag]] = {}
    conflicts = []
    for condition in sorted(conditions, key=lambda c: -c.rank):
        nodes = mesh.tagged_nodes(condition.tag)
        nodes = nodes[dofmap.velocity_slot[nodes] >= 0]
        if len(nodes) == 0:
            continue
        values = np.asarray(
            condition.value(mesh.reference_coords[nodes], t), dtype=float
        ).reshape(len(nodes), 2)
        for node, value in zip(nodes.tolist(), values):
            slot = int(dofmap.velocity_slot[node])
            if slot not in chosen:
                chosen[slot] = (value, condition.rank, condition.tag)
                continue
            kept, rank, tag = chosen[slot]
            if np.max(np.abs(kept - value)) <= CONFLICT_TOLERANCE:
                continue
            conflict = (node, tag.name, condition.tag.name)
            if policy == "strict" or rank == condition.rank:
                raise InconsistentConstraint(
                    f"node {node} gets different values from "
                    f"{tag.name} and {condition.tag.name}",
                    details=[conflict],
                )
            conflicts.append(conflict)

    if conflicts:
        logger.warning(
            "%d Dirichlet conflicts resolved by priority, first: node %d "
            "keeps %s over %s",
            len(conflicts),
            *conflicts[0],
        )

    slots = np.array(sorted(chosen), dtype=np.int64)
    values = np.array([chosen[s][0] for s in slots.tolist()]).reshape(-1, 2)
    velocity_dofs = np.column_stack([2 * slots, 2 * slots + 1]).reshape(-1)

    pins = list(pressure_pins or [])
    pressure_dofs = np.array(
        [dofmap.pressure_slot[node] for node, _ in pins], dtype=np.int64
    )
    if np.any(pressure_dofs < 0):
        raise InconsistentConstraint("pressure pinned on a non-fluid node")
    pressure_values = np.array([value for _, value in pins], dtype=float)
    return DirichletSet(
        velocity_dofs=velocity_dofs,
        velocity_values=values.reshape(-1),
        pressure_dofs=pressure_dofs,
        pressure_values=pressure_values,
    )
