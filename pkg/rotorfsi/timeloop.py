"""Relaxed fixed-point time stepping of the coupled problem.

Each time step alternates, until the rotor outline stops moving, between

1. a Newton solve of the monolithic system on the current fluid mesh,
2. the trapezoidal update of the structure displacement,
3. relaxation of that displacement and the ALE move of the fluid mesh.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable
from typing import Sequence

import numpy as np

from rotorfsi.ale import AleState
from rotorfsi.ale import MeshMotion
from rotorfsi.assembly import apply_master_slave_and_dirichlet
from rotorfsi.assembly import assemble_system
from rotorfsi.assembly import AssemblyOptions
from rotorfsi.assembly import BoundaryCondition
from rotorfsi.assembly import build_constraints
from rotorfsi.assembly import build_dofmap
from rotorfsi.assembly import FieldSet
from rotorfsi.assembly import MaterialParams
from rotorfsi.assembly import MonolithicSystem
from rotorfsi.errors import RotorFsiError
from rotorfsi.linsolve import solve_monolithic
from rotorfsi.linsolve import SolverConfig
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import Mesh
from rotorfsi.mesh import mesh_quality
from rotorfsi.mesh import Subdomain
from rotorfsi.rotation import dirichlet_velocity_on_axis
from rotorfsi.rotation import rotational_displacement
from rotorfsi.rotation import RotationSpec

logger = logging.getLogger(__name__)


class FixedPointDivergence(RotorFsiError):
    """Raised when the fixed-point sweeps of a step do not converge"""


class NewtonDivergence(RotorFsiError):
    """Raised when the Newton iteration diverges or runs out of steps"""


@dataclass(frozen=True)
class LoopConfig:
    """Time grid and iteration controls.

    :param relaxation: weight of the new interface displacement in the
        fixed-point relaxation, in (0, 1].
    :param tolerance: relative interface displacement change that ends
        the fixed-point sweeps.
    """

    dt: float
    t_end: float
    relaxation: float = 0.7
    tolerance: float = 1e-6
    newton_tolerance: float = 1e-8
    max_sweeps: int = 50
    max_newton: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError("end time cannot be negative")
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError("relaxation must lie in (0, 1]")
        if not (self.tolerance > 0 and self.newton_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1 or self.max_newton < 1:
            raise ValueError("iteration limits must be at least 1")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))


@dataclass(frozen=True, eq=False)
class State:
    """Fields at an accepted time level, nodal arrays over all nodes"""

    step: int
    time: float
    fluid_velocity: np.ndarray
    structure_velocity: np.ndarray
    pressure: np.ndarray
    displacement: np.ndarray
    ale: AleState
    mesh: Mesh


@dataclass(frozen=True)
class NewtonResult:
    velocity: np.ndarray
    pressure: np.ndarray
    iterations: int
    residuals: tuple[float, ...]
    krylov_iterations: int


@dataclass(frozen=True)
class StepReport:
    step: int
    time: float
    sweeps: int
    newton_iterations: tuple[int, ...]
    krylov_iterations: int
    changes: tuple[float, ...]
    min_angle: float


def trapezoid_update(
    displacement: np.ndarray,
    velocity: np.ndarray,
    previous_velocity: np.ndarray,
    dt: float,
) -> np.ndarray:
    return displacement + 0.5 * dt * (velocity + previous_velocity)


def relax_interface(
    previous: np.ndarray, new: np.ndarray, relaxation: float
) -> np.ndarray:
    if not 0.0 < relaxation <= 1.0:
        raise ValueError("relaxation must lie in (0, 1]")
    if relaxation == 1.0:
        return np.array(new, copy=True)
    return (1.0 - relaxation) * previous + relaxation * new


def newton_loop(
    assemble: Callable[[np.ndarray], MonolithicSystem],
    velocity: np.ndarray,
    pressure: np.ndarray,
    solve: Callable[[MonolithicSystem, np.ndarray], tuple],
    tolerance: float = 1e-8,
    max_iterations: int = 10,
) -> NewtonResult:
    """Newton iteration on full velocity and pressure dof vectors.

    ``assemble(v)`` returns the system linearized around ``v``; its
    residual at ``(v, p)`` is the nonlinear residual. ``solve`` returns
    the reduced solution and a Krylov result.

    :raises NewtonDivergence: the residual grew twice in a row, or
        ``max_iterations`` solves did not converge.
    """
    residuals: list[float] = []
    krylov = 0
    iterations = 0
    while True:
        system = assemble(velocity)
        residual = system.residual(velocity, pressure)
        residuals.append(residual)
        logger.debug("newton it %d: residual %.3e", iterations, residual)
        if residual <= tolerance:
            break
        if (
            len(residuals) >= 3
            and residuals[-1] > residuals[-2] > residuals[-3]
        ):
            raise NewtonDivergence(
                f"Newton residual grew twice in a row to {residual:.3e}",
                details=residuals,
            )
        if iterations >= max_iterations:
            raise NewtonDivergence(
                f"Newton did not converge in {max_iterations} iterations, "
                f"residual {residual:.3e}",
                details=residuals,
            )
        x, result = solve(system, system.reduce(velocity, pressure))
        krylov += result.iterations
        new_velocity, new_pressure = system.expand(x)
        update = float(np.max(np.abs(new_velocity - velocity), initial=0.0))
        scale = max(1.0, float(np.max(np.abs(new_velocity), initial=0.0)))
        velocity, pressure = new_velocity, new_pressure
        iterations += 1
        if update <= tolerance * scale:
            break
    return NewtonResult(
        velocity=velocity,
        pressure=pressure,
        iterations=iterations,
        residuals=tuple(residuals),
        krylov_iterations=krylov,
    )


class Simulation:
    """Everything constant over a run.

    :param mesh: reference mesh.
    :param conditions: velocity Dirichlet data besides the axis, which
        always follows the prescribed rotation.
    """

    def __init__(
        self,
        mesh: Mesh,
        params: MaterialParams,
        spec: RotationSpec,
        loop: LoopConfig,
        options: AssemblyOptions | None = None,
        solver: SolverConfig | None = None,
        conditions: Sequence[BoundaryCondition] = (),
        corner_policy: str = "priority",
        ale_operator: str = "harmonic",
        matching: str = "forward",
    ):
        self.reference = mesh
        self.params = params
        self.spec = spec
        self.loop = loop
        self.options = options or AssemblyOptions()
        self.solver = solver or SolverConfig()
        self.corner_policy = corner_policy
        self.motion = MeshMotion(mesh, spec, ale_operator, matching)
        self.with_fluid = self.options.coupling == "fsi"
        self.structure_nodes = mesh.nodes_of(Subdomain.STRUCTURE)
        self.axis_nodes = mesh.tagged_nodes(BoundaryTag.AXIS)
        self.interface_nodes = mesh.tagged_nodes(BoundaryTag.INTERFACE)
        axis = BoundaryCondition(
            BoundaryTag.AXIS,
            lambda points, t: dirichlet_velocity_on_axis(spec, t, points),
        )
        extra = list(conditions) if self.with_fluid else []
        self.conditions = [axis] + extra
        # called with (system, krylov result) after every linear solve
        self.solve_hook: Callable | None = None

    def rotation_displacement(self, t: float) -> np.ndarray:
        points = self.reference.reference_coords
        return np.asarray(
            rotational_displacement(points, self.spec, t)
        ).reshape(-1, 2)

    def combined_velocity(self, state: State) -> np.ndarray:
        velocity = np.array(state.fluid_velocity, copy=True)
        velocity[self.structure_nodes] = state.structure_velocity[
            self.structure_nodes
        ]
        return velocity

    def initial_state(self) -> State:
        """Fluid at rest, rotor in rigid rotation at ``theta(0)``"""
        n = self.reference.n_nodes
        displacement = np.zeros((n, 2))
        nodes = self.structure_nodes
        displacement[nodes] = self.rotation_displacement(0.0)[nodes]
        structure_velocity = np.zeros((n, 2))
        structure_velocity[nodes] = dirichlet_velocity_on_axis(
            self.spec, 0.0, self.reference.reference_coords[nodes]
        )
        mesh, ale = self.motion.move(
            0.0, displacement, np.zeros((n, 2)), self.loop.dt
        )
        if np.any(displacement):
            mesh, ale = self.motion.move(
                0.0, displacement, ale.displacement, self.loop.dt
            )
        fluid_velocity = np.zeros((n, 2))
        if self.with_fluid:
            # interface nodes carry the structure velocity
            shared = np.intersect1d(nodes, mesh.nodes_of(Subdomain.ROT_FLUID))
            fluid_velocity[shared] = structure_velocity[shared]
        return State(
            step=0,
            time=0.0,
            fluid_velocity=fluid_velocity,
            structure_velocity=structure_velocity,
            pressure=np.zeros(n),
            displacement=displacement,
            ale=ale,
            mesh=mesh,
        )

    def restore_state(
        self,
        step: int,
        time: float,
        fluid_velocity: np.ndarray,
        structure_velocity: np.ndarray,
        pressure: np.ndarray,
        displacement: np.ndarray,
        mesh_displacement: np.ndarray,
        mesh_velocity: np.ndarray,
    ) -> State:
        """Rebuild a state saved by a checkpoint"""
        previous = mesh_displacement - self.loop.dt * mesh_velocity
        mesh, ale = self.motion.move(
            time, displacement, previous, self.loop.dt
        )
        return State(
            step=step,
            time=time,
            fluid_velocity=np.asarray(fluid_velocity, dtype=float),
            structure_velocity=np.asarray(structure_velocity, dtype=float),
            pressure=np.asarray(pressure, dtype=float),
            displacement=np.asarray(displacement, dtype=float),
            ale=ale,
            mesh=mesh,
        )

    def _solve(self, system, x0):
        x, result = solve_monolithic(system, self.solver, x0)
        if self.solve_hook is not None:
            self.solve_hook(system, result)
        return x, result

    def assembler(
        self,
        mesh: Mesh,
        mesh_velocity: np.ndarray,
        state: State,
        t: float,
        stabilization: np.ndarray | None = None,
    ):
        """Dof map and a callable assembling the system around an iterate.

        :param stabilization: nodal velocity that fixes the SUPG terms,
            by default the previous time level.
        """
        dofmap = build_dofmap(mesh, fluid=self.with_fluid)
        constraints = build_constraints(
            mesh, dofmap, self.conditions, t, self.corner_policy
        )
        previous = self.combined_velocity(state)
        if stabilization is None:
            stabilization = previous
        theta = self.spec.angle(t)

        def assemble(velocity_dofs: np.ndarray) -> MonolithicSystem:
            fields = FieldSet(
                iterate=dofmap.nodal_velocity(velocity_dofs),
                mesh_velocity=mesh_velocity,
                previous_velocity=previous,
                previous_displacement=state.displacement,
                stabilization=stabilization,
            )
            full = assemble_system(
                mesh,
                dofmap,
                self.params,
                self.options,
                fields,
                self.loop.dt,
                theta,
            )
            return apply_master_slave_and_dirichlet(full, constraints)

        return dofmap, assemble

    def first_system(self, state: State) -> MonolithicSystem:
        """System of the first Newton iteration of the next step"""
        t = state.time + self.loop.dt
        dofmap, assemble = self.assembler(
            state.mesh, state.ale.velocity, state, t
        )
        return assemble(dofmap.velocity_vector(self.combined_velocity(state)))

    def solve_on_mesh(
        self,
        mesh: Mesh,
        mesh_velocity: np.ndarray,
        state: State,
        t: float,
        start: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        """Newton solve of one sweep; returns dof map and the result.

        :param start: nodal velocity and pressure the Newton iteration
            starts from, by default the previous time level. The SUPG
            terms stay fixed at the start velocity.
        """
        if start is None:
            start = (self.combined_velocity(state), state.pressure)
        velocity, pressure = start
        dofmap, assemble = self.assembler(
            mesh, mesh_velocity, state, t, velocity
        )
        result = newton_loop(
            assemble,
            dofmap.velocity_vector(velocity),
            dofmap.pressure_vector(pressure),
            self._solve,
            self.loop.newton_tolerance,
            self.loop.max_newton,
        )
        return dofmap, result

    def advance(self, state: State) -> tuple[State, StepReport]:
        """One time step of the relaxed fixed-point iteration"""
        dt = self.loop.dt
        t = state.time + dt
        step = state.step + 1
        nodes = self.structure_nodes
        exact_axis = self.rotation_displacement(t)[self.axis_nodes]
        previous_structure = state.structure_velocity

        mesh, ale = state.mesh, state.ale
        relaxed = np.array(state.displacement, copy=True)
        changes: list[float] = []
        newton_counts: list[int] = []
        krylov = 0
        start = None
        for sweep in range(1, self.loop.max_sweeps + 1):
            dofmap, result = self.solve_on_mesh(
                mesh, ale.velocity, state, t, start
            )
            newton_counts.append(result.iterations)
            krylov += result.krylov_iterations
            velocity = dofmap.nodal_velocity(result.velocity)
            # the next sweep starts from this iterate
            start = (velocity, dofmap.nodal_pressure(result.pressure))

            displacement = np.array(state.displacement, copy=True)
            displacement[nodes] = trapezoid_update(
                state.displacement[nodes],
                velocity[nodes],
                previous_structure[nodes],
                dt,
            )
            displacement[self.axis_nodes] = exact_axis

            watched = self.interface_nodes
            change = float(
                np.max(np.abs(displacement[watched] - relaxed[watched]))
            )
            scale = max(1.0, float(np.max(np.abs(displacement[watched]))))
            changes.append(change / scale)

            relaxed = relax_interface(
                relaxed, displacement, self.loop.relaxation
            )
            mesh, ale = self.motion.move(
                t, relaxed, state.ale.displacement, dt
            )
            logger.debug(
                "step %d sweep %d: change %.3e, newton %d",
                step,
                sweep,
                changes[-1],
                result.iterations,
            )
            if changes[-1] <= self.loop.tolerance:
                break
        else:
            raise FixedPointDivergence(
                f"step {step}: no fixed point after "
                f"{self.loop.max_sweeps} sweeps",
                details=changes,
            )

        fluid_velocity = np.zeros_like(velocity)
        if self.with_fluid:
            fluid_nodes = np.flatnonzero(dofmap.pressure_slot >= 0)
            fluid_velocity[fluid_nodes] = velocity[fluid_nodes]
        structure_velocity = np.zeros_like(velocity)
        structure_velocity[nodes] = velocity[nodes]
        new_state = State(
            step=step,
            time=t,
            fluid_velocity=fluid_velocity,
            structure_velocity=structure_velocity,
            pressure=dofmap.nodal_pressure(result.pressure),
            displacement=displacement,
            ale=ale,
            mesh=mesh,
        )
        report = StepReport(
            step=step,
            time=t,
            sweeps=len(changes),
            newton_iterations=tuple(newton_counts),
            krylov_iterations=krylov,
            changes=tuple(changes),
            min_angle=mesh_quality(mesh).min_angle,
        )
        logger.info(
            "step %d t=%.6f: %d sweeps, newton %s, krylov %d",
            step,
            t,
            report.sweeps,
            list(newton_counts),
            krylov,
        )
        return new_state, report


def advance_time_step(
    state: State, simulation: Simulation
) -> tuple[State, StepReport]:
    return simulation.advance(state)
