"""Monolithic fluid-structure system.

The full system couples all velocity slots and fluid pressures::

    [ A  -B^T ] [v]   [f]
    [ B   C   ] [p] = [g]

``A`` holds fluid mass, viscous, convective and SUPG terms together with
structure mass and stiffness, ``B`` is the divergence and ``C`` the
pressure stabilization. Dirichlet values are then lifted to the right
hand side and the constrained rows and columns removed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from rotorfsi.assembly import fluid as fluid_terms
from rotorfsi.assembly import structure as structure_terms
from rotorfsi.assembly.dofs import DirichletSet
from rotorfsi.assembly.dofs import DofMap
from rotorfsi.assembly.elements import expand_identity
from rotorfsi.assembly.elements import longest_edge
from rotorfsi.assembly.elements import p1_mass
from rotorfsi.assembly.elements import scatter
from rotorfsi.assembly.elements import scatter_vector
from rotorfsi.assembly.elements import triangle_geometry
from rotorfsi.assembly.elements import vector_dofs
from rotorfsi.errors import RotorFsiError
from rotorfsi.mesh import FLUID_SUBDOMAINS
from rotorfsi.mesh import Mesh
from rotorfsi.mesh import Subdomain
from rotorfsi.rotation import rotation_matrix

logger = logging.getLogger(__name__)

LINEARIZATIONS = ("newton", "picard")
COUPLINGS = ("fsi", "structure")


class DegenerateSystem(RotorFsiError):
    """Raised when a reduced system has an empty row"""


@dataclass(frozen=True)
class MaterialParams:
    """Fluid and solid material constants in SI units"""

    fluid_density: float = 1000.0
    fluid_viscosity: float = 1.0
    solid_density: float = 1280.0
    young_modulus: float = 2.5e6
    poisson_ratio: float = 0.384

    def __post_init__(self):
        for name in (
            "fluid_density",
            "fluid_viscosity",
            "solid_density",
            "young_modulus",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if not 0.0 < self.poisson_ratio < 0.5:
            raise ValueError("ν must satisfy 0 < ν < 0.5")

    @property
    def lame_lambda(self) -> float:
        nu = self.poisson_ratio
        return self.young_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def lame_mu(self) -> float:
        return self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))

    def scaling(self, dt: float) -> float:
        """Weight ``r`` of the velocity norm used for well-posedness"""
        return max(
            1.0,
            self.fluid_viscosity,
            self.fluid_density / dt,
            self.solid_density / dt,
            dt * self.lame_mu,
            dt * self.lame_lambda,
        )


@dataclass(frozen=True)
class AssemblyOptions:
    pressure_stabilization: float = 0.1
    supg: float = 1.0
    viscous_factor: float = 2.0
    linearization: str = "newton"
    convection: bool = True
    steady: bool = False
    coupling: str = "fsi"

    def __post_init__(self):
        if self.linearization not in LINEARIZATIONS:
            raise ValueError(
                f"unknown linearization {self.linearization!r}"
            )
        if self.coupling not in COUPLINGS:
            raise ValueError(f"unknown coupling {self.coupling!r}")


@dataclass(frozen=True, eq=False)
class FullSystem:
    A: sparse.csr_matrix
    B: sparse.csr_matrix
    C: sparse.csr_matrix
    f: np.ndarray
    g: np.ndarray
    dofmap: DofMap
    scaling: float


@dataclass(frozen=True, eq=False)
class FieldSet:
    """Nodal ``(n, 2)`` fields an assembly needs.

    ``iterate`` is the current Newton iterate (velocity on every node);
    ``previous_velocity`` and ``previous_displacement`` belong to the
    previous time level. ``stabilization`` is the velocity the SUPG
    streamline direction and its element weights are taken from; it
    stays fixed over a Newton loop. Without it the iterate is used.
    """

    iterate: np.ndarray
    mesh_velocity: np.ndarray
    previous_velocity: np.ndarray
    previous_displacement: np.ndarray
    body_force: np.ndarray | None = None
    stabilization: np.ndarray | None = None


def _canonical(field: np.ndarray, dofmap: DofMap) -> np.ndarray:
    """Values of each node read from the node it is merged into"""
    return np.asarray(field)[dofmap.canonical]


def assemble_fluid_blocks(
    mesh: Mesh,
    dofmap: DofMap,
    params: MaterialParams,
    options: AssemblyOptions,
    fields: FieldSet,
    dt: float,
):
    """Fluid contributions ``(A, B, C, f)`` on the current coordinates"""
    n_v, n_p = dofmap.n_velocity, dofmap.n_pressure
    triangles = mesh.triangles_of(*FLUID_SUBDOMAINS)
    area, grads = triangle_geometry(mesh.coords, triangles)
    diameter = longest_edge(mesh.coords, triangles)
    rows = vector_dofs(dofmap.velocity_slot[triangles])
    pressure_rows = dofmap.pressure_slot[triangles]
    rho, mu = params.fluid_density, params.fluid_viscosity

    iterate = _canonical(fields.iterate, dofmap)[triangles]
    previous = _canonical(fields.previous_velocity, dofmap)[triangles]
    mesh_velocity = np.asarray(fields.mesh_velocity)[triangles]

    local = fluid_terms.viscous_matrix(
        area, grads, options.viscous_factor * mu
    )
    local_rhs = np.zeros((len(triangles), 6))
    if not options.steady:
        mass = fluid_terms.mass_matrix(area, rho, dt)
        local = local + mass
        local_rhs += np.einsum(
            "tab,tb->ta", mass, previous.reshape(-1, 6)
        )
    if options.convection:
        advection = iterate - mesh_velocity
        local = local + fluid_terms.advection_matrix(
            area, grads, advection, rho
        )
        if options.linearization == "newton":
            local = local + fluid_terms.newton_matrix(
                area, grads, iterate, rho
            )
            local_rhs += fluid_terms.newton_rhs(area, grads, iterate, rho)
        if options.supg > 0:
            stream = advection
            if fields.stabilization is not None:
                frozen = _canonical(fields.stabilization, dofmap)
                stream = frozen[triangles] - mesh_velocity
            tau = fluid_terms.supg_parameter(
                stream, diameter, rho, mu, options.supg
            )
            if np.any(tau > 0):
                local = local + fluid_terms.supg_matrix(
                    area, grads, stream, tau, rho
                )
                logger.debug(
                    "SUPG active on %d of %d elements",
                    int(np.sum(tau > 0)),
                    len(tau),
                )
    if fields.body_force is not None:
        force = np.asarray(fields.body_force)[triangles]
        local_rhs += fluid_terms.load_vector(area, force)

    A = scatter(local, rows, rows, (n_v, n_v))
    B = scatter(
        fluid_terms.divergence_matrix(area, grads),
        pressure_rows,
        rows,
        (n_p, n_v),
    )
    C = scatter(
        fluid_terms.pressure_stabilization(
            area, grads, diameter, mu, options.pressure_stabilization
        ),
        pressure_rows,
        pressure_rows,
        (n_p, n_p),
    )
    f = scatter_vector(local_rhs, rows, n_v)
    return A, B, C, f


def assemble_structure_blocks(
    mesh: Mesh,
    dofmap: DofMap,
    params: MaterialParams,
    options: AssemblyOptions,
    fields: FieldSet,
    dt: float,
    theta: float,
):
    """Structure contributions ``(A, f)`` on the reference mesh.

    The unknown is the velocity, except in steady mode where the
    stiffness acts on the displacement directly.
    """
    n_v = dofmap.n_velocity
    triangles = mesh.triangles_of(Subdomain.STRUCTURE)
    reference = mesh.reference_coords
    area, grads = triangle_geometry(reference, triangles)
    rows = vector_dofs(dofmap.velocity_slot[triangles])
    rotation = rotation_matrix(theta)

    stiffness = structure_terms.elasticity_matrix(
        area, grads, params.lame_lambda, params.lame_mu
    )
    rotated = structure_terms.rotate_blocks(stiffness, rotation)
    source = structure_terms.rotation_source(
        stiffness, reference[triangles], np.asarray(mesh.center), rotation
    )
    if options.steady:
        local, local_rhs = rotated, source
    else:
        mass = expand_identity(p1_mass(area) * (params.solid_density / dt))
        velocity = np.asarray(fields.previous_velocity)[triangles]
        velocity = velocity.reshape(-1, 6)
        displacement = np.asarray(fields.previous_displacement)[triangles]
        displacement = displacement.reshape(-1, 6)
        local = mass + 0.5 * dt * rotated
        local_rhs = (
            np.einsum("tab,tb->ta", mass - 0.5 * dt * rotated, velocity)
            - np.einsum("tab,tb->ta", rotated, displacement)
            + source
        )
    A = scatter(local, rows, rows, (n_v, n_v))
    f = scatter_vector(local_rhs, rows, n_v)
    return A, f


def assemble_system(
    mesh: Mesh,
    dofmap: DofMap,
    params: MaterialParams,
    options: AssemblyOptions,
    fields: FieldSet,
    dt: float,
    theta: float = 0.0,
) -> FullSystem:
    n_v, n_p = dofmap.n_velocity, dofmap.n_pressure
    A = sparse.csr_matrix((n_v, n_v))
    B = sparse.csr_matrix((n_p, n_v))
    C = sparse.csr_matrix((n_p, n_p))
    f = np.zeros(n_v)
    if n_p:
        A_f, B, C, f_f = assemble_fluid_blocks(
            mesh, dofmap, params, options, fields, dt
        )
        A, f = A + A_f, f + f_f
    if len(dofmap.structure_nodes):
        A_s, f_s = assemble_structure_blocks(
            mesh, dofmap, params, options, fields, dt, theta
        )
        A, f = A + A_s, f + f_s
    return FullSystem(
        A=sparse.csr_matrix(A),
        B=sparse.csr_matrix(B),
        C=sparse.csr_matrix(C),
        f=f,
        g=np.zeros(n_p),
        dofmap=dofmap,
        scaling=params.scaling(dt),
    )


@dataclass(frozen=True, eq=False)
class MonolithicSystem:
    """Reduced system without constrained rows and columns"""

    A: sparse.csr_matrix
    B: sparse.csr_matrix
    C: sparse.csr_matrix
    f: np.ndarray
    g: np.ndarray
    free_velocity: np.ndarray
    free_pressure: np.ndarray
    constraints: DirichletSet
    n_velocity: int
    n_pressure: int
    scaling: float

    @property
    def size(self) -> int:
        return self.A.shape[0] + self.B.shape[0]

    def matrix(self) -> sparse.csr_matrix:
        if self.B.shape[0] == 0:
            return sparse.csr_matrix(self.A)
        return sparse.bmat(
            [[self.A, -self.B.T], [self.B, self.C]], format="csr"
        )

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.f, self.g])

    def reduce(
        self, velocity: np.ndarray, pressure: np.ndarray
    ) -> np.ndarray:
        """Free part of full dof vectors, in ``matrix()`` order"""
        return np.concatenate(
            [
                np.asarray(velocity)[self.free_velocity],
                np.asarray(pressure)[self.free_pressure],
            ]
        )

    def expand(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full velocity and pressure dof vectors with Dirichlet values"""
        velocity = np.zeros(self.n_velocity)
        velocity[self.constraints.velocity_dofs] = (
            self.constraints.velocity_values
        )
        n_free = len(self.free_velocity)
        velocity[self.free_velocity] = x[:n_free]
        pressure = np.zeros(self.n_pressure)
        pressure[self.constraints.pressure_dofs] = (
            self.constraints.pressure_values
        )
        pressure[self.free_pressure] = x[n_free:]
        return velocity, pressure

    def residual(self, velocity: np.ndarray, pressure: np.ndarray) -> float:
        """Relative residual of full dof vectors"""
        rhs = self.rhs()
        scale = float(np.linalg.norm(rhs)) or 1.0
        value = self.matrix() @ self.reduce(velocity, pressure) - rhs
        return float(np.linalg.norm(value)) / scale


def apply_master_slave_and_dirichlet(
    full: FullSystem, constraints: DirichletSet
) -> MonolithicSystem:
    """Drop Dirichlet rows and columns, lifting their values.

    Interface dofs are already shared through the dof map, so no
    constraint rows or multipliers appear.
    """
    n_v, n_p = full.A.shape[0], full.B.shape[0]
    fixed_v = np.zeros(n_v, dtype=bool)
    fixed_v[constraints.velocity_dofs] = True
    fixed_p = np.zeros(n_p, dtype=bool)
    fixed_p[constraints.pressure_dofs] = True
    free_v = np.flatnonzero(~fixed_v)
    free_p = np.flatnonzero(~fixed_p)

    known_v = np.zeros(n_v)
    known_v[constraints.velocity_dofs] = constraints.velocity_values
    known_p = np.zeros(n_p)
    known_p[constraints.pressure_dofs] = constraints.pressure_values

    f = full.f - full.A @ known_v + full.B.T @ known_p
    g = full.g - full.B @ known_v - full.C @ known_p

    A = full.A[free_v][:, free_v]
    B = full.B[free_p][:, free_v]
    C = full.C[free_p][:, free_p]
    system = MonolithicSystem(
        A=sparse.csr_matrix(A),
        B=sparse.csr_matrix(B),
        C=sparse.csr_matrix(C),
        f=f[free_v],
        g=g[free_p],
        free_velocity=free_v,
        free_pressure=free_p,
        constraints=constraints,
        n_velocity=n_v,
        n_pressure=n_p,
        scaling=full.scaling,
    )
    matrix = system.matrix()
    empty = np.flatnonzero(np.diff(matrix.indptr) == 0)
    if len(empty):
        raise DegenerateSystem(
            f"{len(empty)} reduced rows are empty, first {empty[0]}",
            details=empty.tolist(),
        )
    return system
