"""Reproducible numerical studies.

Each harness returns plain data (named tuples, dicts and arrays) so the
``check`` command and the tests can assert on it.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import replace
from pathlib import Path
from typing import NamedTuple
from typing import Sequence

import numpy as np
from scipy import linalg

from rotorfsi.ale import MeshMotion
from rotorfsi.assembly import apply_master_slave_and_dirichlet
from rotorfsi.assembly import assemble_structure_blocks
from rotorfsi.assembly import assemble_system
from rotorfsi.assembly import AssemblyOptions
from rotorfsi.assembly import BoundaryCondition
from rotorfsi.assembly import build_constraints
from rotorfsi.assembly import build_dofmap
from rotorfsi.assembly import FieldSet
from rotorfsi.assembly import MaterialParams
from rotorfsi.assembly import MonolithicSystem
from rotorfsi.assembly.elements import p1_laplacian
from rotorfsi.assembly.elements import p1_mass
from rotorfsi.assembly.elements import scatter
from rotorfsi.assembly.elements import triangle_geometry
from rotorfsi.assembly.elements import vector_dofs
from rotorfsi.config import RunConfig
from rotorfsi.errors import RotorFsiError
from rotorfsi.linsolve import fgmres
from rotorfsi.linsolve import KrylovFailure
from rotorfsi.linsolve import solve_monolithic
from rotorfsi.linsolve import SolverConfig
from rotorfsi.linsolve import sparse_lu_fallback
from rotorfsi.linsolve.preconditioner import BlockPreconditioner
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import build_rectangle_mesh
from rotorfsi.mesh import build_rotor_channel_mesh
from rotorfsi.mesh import ChannelRotorGeometry
from rotorfsi.mesh import Mesh
from rotorfsi.mesh import mesh_quality
from rotorfsi.mesh import Subdomain
from rotorfsi.mesh import validate_conformity
from rotorfsi.rotation import rotational_displacement
from rotorfsi.rotation import rotation_matrix
from rotorfsi.rotation import RotationSpec
from rotorfsi.runner import build_mesh
from rotorfsi.runner import build_simulation
from rotorfsi.runner import run_simulation
from rotorfsi.timeloop import newton_loop
from rotorfsi.writers import ProbeSeries
from rotorfsi.writers import write_sweep_csv

logger = logging.getLogger(__name__)

DIRECT = SolverConfig(method="direct")


# stiffness sweep


class SweepResult(NamedTuple):
    series: dict[float, ProbeSeries]
    failures: dict[float, str]
    csv: Path


def run_stiffness_sweep(
    config: RunConfig,
    moduli: Sequence[float] | None = None,
    out_dir: str | os.PathLike | None = None,
    *,
    steps: int | None = None,
    seed: int = 0,
) -> SweepResult:
    """One run per Young's modulus on the same mesh and time grid.

    A failing run is logged and recorded; the sweep goes on.
    """
    moduli = [float(e) for e in (moduli or config["sweep"]["moduli"])]
    if not moduli or any(e <= 0 for e in moduli):
        raise ValueError("moduli must be positive")
    if any(b <= a for a, b in zip(moduli, moduli[1:])):
        raise ValueError("moduli must be ascending")
    directory = Path(out_dir or config["output"]["directory"])
    series: dict[float, ProbeSeries] = {}
    failures: dict[float, str] = {}
    for modulus in moduli:
        run_dir = directory / f"E_{modulus:.3e}"
        try:
            result = run_simulation(
                config.replace(materials__young_modulus=modulus),
                run_dir,
                steps=steps,
                seed=seed,
            )
        except RotorFsiError as error:
            logger.warning("sweep run E=%.3e failed: %s", modulus, error)
            failures[modulus] = error.message
            continue
        series[modulus] = result.probe
    csv = write_sweep_csv(directory / "stiffness_sweep.csv", series)
    return SweepResult(series, failures, csv)


def tip_magnitudes(series: dict[float, ProbeSeries], t: float):
    """``|u_d|`` of each run at the sample closest to ``t``"""
    values = {}
    for modulus, probe in series.items():
        times = np.asarray(probe.times)
        index = int(np.argmin(np.abs(times - t)))
        values[modulus] = float(np.linalg.norm(probe.values[index]))
    return values


def sweep_is_monotone(
    series: dict[float, ProbeSeries], t_min: float = 1.0
) -> bool:
    """Tip deformation strictly decreases with stiffness after ``t_min``"""
    moduli = sorted(series)
    reference = series[moduli[0]]
    for t in reference.times:
        if t < t_min:
            continue
        magnitudes = tip_magnitudes(series, t)
        ordered = [magnitudes[e] for e in moduli]
        if any(b >= a for a, b in zip(ordered, ordered[1:])):
            return False
    return True


def stiffness_ratio(series: dict[float, ProbeSeries], t: float) -> float:
    """Tip deformation of the stiffest run over the softest one at ``t``"""
    magnitudes = tip_magnitudes(series, t)
    softest = magnitudes[min(magnitudes)]
    stiffest = magnitudes[max(magnitudes)]
    if softest == 0.0:
        return 0.0 if stiffest == 0.0 else math.inf
    return stiffest / softest


# steady problems on the unit square


def _steady_fields(mesh: Mesh, body_force=None) -> FieldSet:
    zeros = np.zeros((mesh.n_nodes, 2))
    return FieldSet(zeros, zeros, zeros, zeros, body_force)


def _steady_system(
    mesh, params, options, conditions, pins, body_force=None
):
    dofmap = build_dofmap(mesh)
    constraints = build_constraints(
        mesh, dofmap, conditions, 0.0, pressure_pins=pins
    )
    fields = _steady_fields(mesh, body_force)
    full = assemble_system(mesh, dofmap, params, options, fields, 1.0)
    return apply_master_slave_and_dirichlet(full, constraints), dofmap


def _vortex_velocity(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    pi = math.pi
    return np.column_stack(
        [
            np.sin(pi * x) ** 2 * np.sin(2 * pi * y),
            -np.sin(2 * pi * x) * np.sin(pi * y) ** 2,
        ]
    )


def _vortex_gradient(points: np.ndarray) -> np.ndarray:
    """``(n, 2, 2)`` with ``[i, j] = d u_i / d x_j``"""
    x, y = points[:, 0], points[:, 1]
    pi = math.pi
    gradient = np.empty((len(points), 2, 2))
    gradient[:, 0, 0] = pi * np.sin(2 * pi * x) * np.sin(2 * pi * y)
    gradient[:, 0, 1] = 2 * pi * np.sin(pi * x) ** 2 * np.cos(2 * pi * y)
    gradient[:, 1, 0] = -2 * pi * np.cos(2 * pi * x) * np.sin(pi * y) ** 2
    gradient[:, 1, 1] = -pi * np.sin(2 * pi * x) * np.sin(2 * pi * y)
    return gradient


def _vortex_pressure(points: np.ndarray) -> np.ndarray:
    return np.cos(math.pi * points[:, 0]) * np.cos(math.pi * points[:, 1])


def _vortex_force(points: np.ndarray, viscosity: float) -> np.ndarray:
    """``-viscosity * laplace(u) + grad(p)`` of the vortex"""
    x, y = points[:, 0], points[:, 1]
    pi = math.pi
    laplace_x = 2 * pi**2 * np.cos(2 * pi * x) * np.sin(
        2 * pi * y
    ) - 4 * pi**2 * np.sin(pi * x) ** 2 * np.sin(2 * pi * y)
    laplace_y = 4 * pi**2 * np.sin(2 * pi * x) * np.sin(
        pi * y
    ) ** 2 - 2 * pi**2 * np.sin(2 * pi * x) * np.cos(2 * pi * y)
    grad_p = np.column_stack(
        [
            -pi * np.sin(pi * x) * np.cos(pi * y),
            -pi * np.cos(pi * x) * np.sin(pi * y),
        ]
    )
    return -viscosity * np.column_stack([laplace_x, laplace_y]) + grad_p


def _all_walls() -> dict[str, BoundaryTag]:
    sides = ("bottom", "right", "top", "left")
    return {side: BoundaryTag.WALL for side in sides}


class ConvergenceLevel(NamedTuple):
    h: float
    velocity_h1: float
    pressure_l2: float


def convergence_rates(levels: Sequence[ConvergenceLevel]):
    """Observed orders between consecutive levels, velocity and pressure"""
    rates = []
    for coarse, fine in zip(levels, levels[1:]):
        ratio = math.log(coarse.h / fine.h)
        rates.append(
            (
                math.log(coarse.velocity_h1 / fine.velocity_h1) / ratio,
                math.log(coarse.pressure_l2 / fine.pressure_l2) / ratio,
            )
        )
    return rates


def manufactured_stokes_study(
    levels: Sequence[int] = (8, 16, 32, 64),
    viscosity: float = 1.0,
    stabilization: float = 0.1,
) -> list[ConvergenceLevel]:
    """Errors of stabilized Stokes against a divergence-free vortex.

    Velocity error is the broken H1 seminorm, pressure error the L2 norm
    after removing the mean difference.
    """
    params = MaterialParams(fluid_viscosity=viscosity)
    options = AssemblyOptions(
        pressure_stabilization=stabilization,
        convection=False,
        steady=True,
        supg=0.0,
    )
    condition = BoundaryCondition(
        BoundaryTag.WALL, lambda points, t: _vortex_velocity(points)
    )
    results = []
    for n in levels:
        mesh = build_rectangle_mesh(n, n, tags=_all_walls())
        coords = mesh.coords
        pins = [(0, float(_vortex_pressure(coords[:1])[0]))]
        system, dofmap = _steady_system(
            mesh,
            params,
            options,
            [condition],
            pins,
            body_force=_vortex_force(coords, viscosity),
        )
        x, _ = solve_monolithic(system, DIRECT)
        velocity, pressure = system.expand(x)
        u = dofmap.nodal_velocity(velocity)
        p = dofmap.nodal_pressure(pressure)

        tris = mesh.triangles
        area, grads = triangle_geometry(coords, tris)
        centroids = coords[tris].mean(axis=1)
        discrete = np.einsum("tai,taj->tij", u[tris], grads)
        error = discrete - _vortex_gradient(centroids)
        velocity_h1 = math.sqrt(float(np.sum(area * np.sum(error**2, (1, 2)))))

        difference = p[tris].mean(axis=1) - _vortex_pressure(centroids)
        difference -= np.sum(area * difference) / np.sum(area)
        pressure_l2 = math.sqrt(float(np.sum(area * difference**2)))
        results.append(ConvergenceLevel(1.0 / n, velocity_h1, pressure_l2))
        logger.info(
            "stokes n=%d: |u|_1 error %.3e, p error %.3e",
            n,
            velocity_h1,
            pressure_l2,
        )
    return results


def inf_sup_witness(
    levels: Sequence[int] = (4, 8, 16),
    stabilization: float = 0.1,
    viscosity: float = 1.0,
) -> list[tuple[float, float]]:
    """Smallest nonzero generalized singular value per level.

    Square root of the smallest positive eigenvalue of
    ``(B K^-1 B^T + C) q = lambda M q``, with ``K`` the vector Laplacian
    on interior velocities and ``M`` the pressure mass matrix. The
    constant pressure is the zero mode and is skipped.
    """
    params = MaterialParams(fluid_viscosity=viscosity)
    options = AssemblyOptions(
        pressure_stabilization=stabilization,
        convection=False,
        steady=True,
        supg=0.0,
    )
    zero = BoundaryCondition(
        BoundaryTag.WALL, lambda points, t: np.zeros_like(points)
    )
    results = []
    for n in levels:
        mesh = build_rectangle_mesh(n, n, tags=_all_walls())
        system, dofmap = _steady_system(mesh, params, options, [zero], [])
        area, grads = triangle_geometry(mesh.coords, mesh.triangles)
        rows = vector_dofs(dofmap.velocity_slot[mesh.triangles])
        laplacian = np.zeros((len(area), 6, 6))
        scalar = p1_laplacian(area, grads)
        laplacian[:, 0::2, 0::2] = scalar
        laplacian[:, 1::2, 1::2] = scalar
        K = scatter(laplacian, rows, rows, (dofmap.n_velocity,) * 2)
        K = K[system.free_velocity][:, system.free_velocity].toarray()
        pressure_rows = dofmap.pressure_slot[mesh.triangles]
        M = scatter(
            p1_mass(area), pressure_rows, pressure_rows,
            (dofmap.n_pressure,) * 2,
        ).toarray()
        B = system.B.toarray()
        S = B @ linalg.solve(K, B.T, assume_a="pos") + system.C.toarray()
        eigenvalues = linalg.eigh(S, M, eigvals_only=True)
        positive = eigenvalues[eigenvalues > 1e-10 * eigenvalues.max()]
        beta = math.sqrt(float(positive.min()))
        results.append((1.0 / n, beta))
        logger.info("inf-sup n=%d: beta %.4e", n, beta)
    return results


class CavityResult(NamedTuple):
    velocity: np.ndarray
    pressure: np.ndarray
    residuals: tuple[float, ...]
    iterations: int


def lid_driven_cavity(
    n: int = 16,
    reynolds: float = 100.0,
    linearization: str = "newton",
    tolerance: float = 1e-8,
    max_iterations: int = 20,
) -> CavityResult:
    """Steady Navier-Stokes in the unit square with a unit lid speed.

    Corners take the wall value.
    """
    params = MaterialParams(fluid_density=1.0, fluid_viscosity=1 / reynolds)
    options = AssemblyOptions(
        steady=True, convection=True, linearization=linearization, supg=0.0
    )
    tags = _all_walls()
    tags["top"] = BoundaryTag.INLET
    mesh = build_rectangle_mesh(n, n, tags=tags)

    def lid(points, t):
        values = np.zeros_like(points)
        values[:, 0] = 1.0
        return values

    conditions = [
        BoundaryCondition(BoundaryTag.INLET, lid),
        BoundaryCondition(
            BoundaryTag.WALL, lambda points, t: np.zeros_like(points)
        ),
    ]
    dofmap = build_dofmap(mesh)
    constraints = build_constraints(
        mesh, dofmap, conditions, 0.0, pressure_pins=[(0, 0.0)]
    )
    base = _steady_fields(mesh)

    def assemble(velocity: np.ndarray) -> MonolithicSystem:
        fields = FieldSet(
            dofmap.nodal_velocity(velocity),
            base.mesh_velocity,
            base.previous_velocity,
            base.previous_displacement,
        )
        full = assemble_system(mesh, dofmap, params, options, fields, 1.0)
        return apply_master_slave_and_dirichlet(full, constraints)

    result = newton_loop(
        assemble,
        np.zeros(dofmap.n_velocity),
        np.zeros(dofmap.n_pressure),
        lambda system, x0: solve_monolithic(system, DIRECT, x0),
        tolerance,
        max_iterations,
    )
    return CavityResult(
        dofmap.nodal_velocity(result.velocity),
        dofmap.nodal_pressure(result.pressure),
        result.residuals,
        result.iterations,
    )


# rotor scenarios


def static_rotation_check(
    mesh: Mesh,
    params: MaterialParams,
    angles: Sequence[float] = (
        math.radians(10),
        math.radians(90),
        math.radians(250),
    ),
) -> list[float]:
    """Relative error of a steady structure solve against pure rotation.

    The axis is displaced by the rotation at each angle; the stiffness
    and rotation source must then reproduce the rigid rotation
    everywhere.
    """
    options = AssemblyOptions(steady=True, coupling="structure")
    dofmap = build_dofmap(mesh, fluid=False)
    nodes = dofmap.structure_nodes
    errors = []
    for angle in angles:
        spec = RotationSpec.constant(mesh.center, 0.0, initial_angle=angle)
        condition = BoundaryCondition(
            BoundaryTag.AXIS,
            lambda points, t, spec=spec: rotational_displacement(
                points, spec, t
            ),
        )
        constraints = build_constraints(mesh, dofmap, [condition], 0.0)
        full = assemble_system(
            mesh, dofmap, params, options, _steady_fields(mesh), 1.0, angle
        )
        system = apply_master_slave_and_dirichlet(full, constraints)
        x, _ = solve_monolithic(system, DIRECT)
        velocity, _ = system.expand(x)
        displacement = dofmap.nodal_velocity(velocity)[nodes]
        exact = rotational_displacement(
            mesh.reference_coords[nodes], spec, 0.0
        )
        error = np.max(np.abs(displacement - exact)) / np.max(np.abs(exact))
        errors.append(float(error))
        logger.info(
            "static rotation %.1f deg: error %.3e", math.degrees(angle), error
        )
    return errors


class RevolutionReport(NamedTuple):
    steps: int
    defects: list[int]
    min_angles: np.ndarray
    initial_min_angle: float

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.min_angles - self.initial_min_angle)))


def mesh_motion_revolution(
    geometry: ChannelRotorGeometry | None = None,
    h: float = 0.02,
    ring_nodes: int = 64,
    omega: float = 1.0,
    dt: float = 0.01,
    steps: int | None = None,
    seed: int = 0,
) -> RevolutionReport:
    """Move the mesh with a rigid rotor and check it at every step"""
    geometry = geometry or ChannelRotorGeometry()
    mesh = build_rotor_channel_mesh(
        geometry, h, ring_nodes=ring_nodes, seed=seed
    )
    spec = RotationSpec.constant(geometry.center, omega)
    motion = MeshMotion(mesh, spec)
    if steps is None:
        steps = math.ceil(2 * math.pi / (abs(omega) * dt))
    structure = mesh.nodes_of(Subdomain.STRUCTURE)
    initial = mesh_quality(mesh).min_angle
    previous = np.zeros((mesh.n_nodes, 2))
    defects, angles = [], []
    for step in range(1, steps + 1):
        t = step * dt
        displacement = np.zeros((mesh.n_nodes, 2))
        displacement[structure] = rotational_displacement(
            mesh.reference_coords[structure], spec, t
        )
        moved, ale = motion.move(t, displacement, previous, dt)
        previous = ale.displacement
        found = validate_conformity(moved)
        if found:
            logger.warning(
                "step %d: %d conformity defects, first %s",
                step,
                len(found),
                found[0].message,
            )
        defects.append(len(found))
        angles.append(mesh_quality(moved).min_angle)
    return RevolutionReport(steps, defects, np.array(angles), initial)


def first_step_system(
    config: RunConfig, young_modulus: float | None = None,
    dt: float | None = None, seed: int = 0,
) -> MonolithicSystem:
    """Monolithic system of the first Newton iteration of step one"""
    updates = {}
    if young_modulus is not None:
        updates["materials__young_modulus"] = young_modulus
    if dt is not None:
        updates["loop__dt"] = dt
    if updates:
        config = config.replace(**updates)
    mesh = build_mesh(config, seed)
    simulation = build_simulation(config, mesh)
    return simulation.first_system(simulation.initial_state())


class SolverComparison(NamedTuple):
    relative_difference: float
    preconditioned_iterations: int
    unpreconditioned_iterations: int
    unpreconditioned_converged: bool


def _fgmres_iterations(system, preconditioner, tol, max_iter):
    try:
        result = fgmres(
            system.matrix(),
            system.rhs(),
            preconditioner,
            tol=tol,
            max_iter=max_iter,
        )
    except KrylovFailure as error:
        return error.result, False
    return result, True


def compare_solvers(
    system: MonolithicSystem, tol: float = 1e-10, max_iter: int = 500
) -> SolverComparison:
    """Block preconditioned FGMRES and plain GMRES against sparse LU"""
    exact = sparse_lu_fallback(system.matrix(), system.rhs())
    preconditioner = BlockPreconditioner(system.A, system.B, system.C)
    result, _ = _fgmres_iterations(system, preconditioner, tol, max_iter)
    plain, converged = _fgmres_iterations(system, None, tol, max_iter)
    scale = float(np.linalg.norm(exact)) or 1.0
    difference = float(np.linalg.norm(result.x - exact)) / scale
    return SolverComparison(
        difference, result.iterations, plain.iterations, converged
    )


def preconditioner_robustness(
    config: RunConfig,
    moduli: Sequence[float] = (2.5e4, 2.5e6, 2.5e9),
    steps: Sequence[float] = (0.02, 0.01, 0.005),
    tol: float = 1e-8,
    seed: int = 0,
) -> dict[tuple[float, float], int]:
    """Outer FGMRES iterations on the first step system of each pair"""
    grid = {}
    for modulus in moduli:
        for dt in steps:
            system = first_step_system(config, modulus, dt, seed)
            preconditioner = BlockPreconditioner(system.A, system.B, system.C)
            result, converged = _fgmres_iterations(
                system, preconditioner, tol, 500
            )
            if not converged:
                logger.warning(
                    "E=%.1e dt=%.3f did not converge", modulus, dt
                )
            grid[(modulus, dt)] = result.iterations
            logger.info(
                "E=%.1e dt=%.3f: %d outer iterations",
                modulus,
                dt,
                result.iterations,
            )
    return grid


def within_factor(grid: dict, factor: float = 3.0) -> bool:
    values = list(grid.values())
    return max(values) <= factor * max(1, min(values))


def frame_equivalence_error(
    mesh: Mesh, params: MaterialParams, angle: float
) -> float:
    """Largest entry difference between the assembled rotated stiffness
    and plain elasticity assembled on the rigidly rotated structure mesh,
    relative to the largest stiffness entry"""
    options = AssemblyOptions(steady=True)
    dofmap = build_dofmap(mesh, fluid=False)
    zeros = np.zeros((mesh.n_nodes, 2))
    fields = FieldSet(zeros, zeros, zeros, zeros)
    rotated, _ = assemble_structure_blocks(
        mesh, dofmap, params, options, fields, 1.0, angle
    )
    center = np.asarray(mesh.center)
    coords = (
        mesh.reference_coords - center
    ) @ rotation_matrix(angle).T + center
    turned = replace(mesh, reference_coords=coords, coords=coords)
    direct, _ = assemble_structure_blocks(
        turned, dofmap, params, options, fields, 1.0, 0.0
    )
    scale = float(abs(rotated).max()) or 1.0
    return float(abs(rotated - direct).max()) / scale
