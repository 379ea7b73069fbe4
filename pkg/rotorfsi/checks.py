"""Headless invariant suites run by ``rotorfsi check``.

Every suite is a function returning ``(name, passed, detail)`` tuples.
Suites run on a desk mesh no finer than :data:`DESK_H` so the whole set
finishes in minutes.
"""
from __future__ import annotations

import logging
import math
import tempfile
from pathlib import Path
from typing import Callable
from typing import Iterator
from typing import NamedTuple

import numpy as np

from rotorfsi.ale import MeshMotion
from rotorfsi.assembly import linearization_consistency_check
from rotorfsi.config import load_config
from rotorfsi.config import RunConfig
from rotorfsi.config import serialize_config
from rotorfsi.experiments import compare_solvers
from rotorfsi.experiments import first_step_system
from rotorfsi.experiments import frame_equivalence_error
from rotorfsi.experiments import mesh_motion_revolution
from rotorfsi.experiments import run_stiffness_sweep
from rotorfsi.experiments import static_rotation_check
from rotorfsi.experiments import stiffness_ratio
from rotorfsi.experiments import sweep_is_monotone
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import extract_ring
from rotorfsi.mesh import mesh_quality
from rotorfsi.mesh import RingSide
from rotorfsi.mesh import Subdomain
from rotorfsi.mesh import validate_conformity
from rotorfsi.rotation import decompose_displacement
from rotorfsi.rotation import recompose_displacement
from rotorfsi.rotation import rotational_displacement
from rotorfsi.rotation import RotationSpec
from rotorfsi.runner import build_mesh
from rotorfsi.runner import build_simulation
from rotorfsi.timeloop import trapezoid_update
from rotorfsi.writers import checkpoint_from_state
from rotorfsi.writers import read_checkpoint
from rotorfsi.writers import read_vtk
from rotorfsi.writers import write_checkpoint
from rotorfsi.writers import write_vtk_snapshot

logger = logging.getLogger(__name__)

DESK_H = 0.02
Outcome = tuple[str, bool, str]


class SuiteResult(NamedTuple):
    suite: str
    outcomes: list[Outcome]
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(ok for _, ok, _ in self.outcomes)


def desk_config(config: RunConfig) -> RunConfig:
    h = max(config["discretization"]["h"], DESK_H)
    return config.replace(discretization__h=h)


def _check_rotation(config: RunConfig) -> Iterator[Outcome]:
    spec = RotationSpec(
        center=(0.0, 0.0), schedule=((0.0, 1.0), (1.0, -0.5), (2.0, 2.0))
    )
    expected = 1.0 - 0.5 + 2.0 * 0.5
    yield (
        "piecewise angle",
        abs(spec.angle(2.5) - expected) <= 1e-14,
        f"theta(2.5) = {spec.angle(2.5):.15g}",
    )
    rng = np.random.default_rng(0)
    points = rng.uniform(-1, 1, (50, 2))
    u_d = rng.uniform(-1e-3, 1e-3, (50, 2))
    u_s = recompose_displacement(u_d, points, spec, 0.7)
    back = decompose_displacement(u_s, points, spec, 0.7)
    error = np.max(np.abs(back - u_d))
    yield ("decompose inverts recompose", error <= 1e-15, f"{error:.2e}")
    increment = trapezoid_update(np.zeros(2), np.ones(2), np.ones(2), 0.1)
    yield (
        "trapezoid constant velocity",
        np.allclose(increment, 0.1, rtol=0, atol=1e-16),
        str(increment),
    )


def _check_mesh(config: RunConfig) -> Iterator[Outcome]:
    mesh = build_mesh(config)
    defects = validate_conformity(mesh)
    yield ("conforming", not defects, f"{len(defects)} defects")
    rotating = extract_ring(mesh, BoundaryTag.SLIDING, RingSide.ROTATING)
    stationary = extract_ring(mesh, BoundaryTag.SLIDING, RingSide.STATIONARY)
    yield (
        "ring sizes",
        len(rotating) == len(stationary) >= 3,
        f"{len(rotating)} / {len(stationary)}",
    )
    quality = mesh_quality(mesh)
    yield (
        "positive areas",
        quality.min_area > 0 and not quality.inverted,
        f"min area {quality.min_area:.3e}",
    )


def _check_ale(config: RunConfig) -> Iterator[Outcome]:
    mesh = build_mesh(config)
    spacing = 2 * math.pi / mesh.ring_size
    spec = RotationSpec.constant(mesh.center, spacing)
    motion = MeshMotion(mesh, spec)
    structure = mesh.nodes_of(Subdomain.STRUCTURE)
    displacement = np.zeros((mesh.n_nodes, 2))
    displacement[structure] = rotational_displacement(
        mesh.reference_coords[structure], spec, 1.0
    )
    moved, ale = motion.move(1.0, displacement, np.zeros_like(displacement), 1)
    yield ("shift after one spacing", ale.shift == 1, f"K = {ale.shift}")
    defects = validate_conformity(moved)
    yield ("conforming after move", not defects, f"{len(defects)} defects")
    before = mesh_quality(mesh).min_angle
    after = mesh_quality(moved).min_angle
    yield (
        "min angle kept",
        abs(after - before) <= 1e-9,
        f"{before:.12f} -> {after:.12f}",
    )


def _check_assembly(config: RunConfig) -> Iterator[Outcome]:
    mesh = build_mesh(config)
    params = config.materials()
    rng = np.random.default_rng(1)
    worst = max(
        frame_equivalence_error(mesh, params, angle)
        for angle in rng.uniform(0, 2 * math.pi, 5)
    )
    yield ("frame equivalence", worst <= 1e-12, f"{worst:.2e}")

    ratios = []
    for _ in range(20):
        H = rng.normal(size=(2, 2))
        H *= 1e-2 / np.linalg.norm(H, 2)
        full, half = linearization_consistency_check(
            H, params.lame_lambda, params.lame_mu, rng.uniform(0, 6)
        )
        ratios.append(full / half)
    yield (
        "linearization order",
        all(3.5 <= r <= 4.5 for r in ratios),
        f"ratios in [{min(ratios):.3f}, {max(ratios):.3f}]",
    )
    errors = static_rotation_check(mesh, params)
    yield (
        "static rotation exact",
        max(errors) <= 1e-8,
        ", ".join(f"{e:.1e}" for e in errors),
    )


def _check_linsolve(config: RunConfig) -> Iterator[Outcome]:
    system = first_step_system(config)
    comparison = compare_solvers(system)
    yield (
        "matches sparse LU",
        comparison.relative_difference <= 1e-8,
        f"{comparison.relative_difference:.2e}",
    )
    yield (
        "preconditioned iterations",
        comparison.preconditioned_iterations < 60
        and comparison.preconditioned_iterations
        < comparison.unpreconditioned_iterations,
        f"{comparison.preconditioned_iterations} vs "
        f"{comparison.unpreconditioned_iterations} unpreconditioned",
    )


def _check_timeloop(config: RunConfig) -> Iterator[Outcome]:
    rest = config.replace(
        rotation__angular_velocity=0.0,
        rotation__schedule=[],
        inflow__peak_velocity=0.0,
    )
    mesh = build_mesh(rest)
    simulation = build_simulation(rest, mesh)
    state = simulation.initial_state()
    new, report = simulation.advance(state)
    unchanged = (
        np.max(np.abs(new.fluid_velocity - state.fluid_velocity)) <= 1e-14
        and np.max(np.abs(new.displacement - state.displacement)) <= 1e-14
    )
    yield (
        "rest is a fixed point",
        unchanged and report.sweeps == 1,
        f"{report.sweeps} sweeps",
    )

    structure = config.replace(loop__coupling="structure")
    simulation = build_simulation(structure, mesh)
    state = simulation.initial_state()
    worst = 0.0
    for _ in range(3):
        state, _ = simulation.advance(state)
        exact = simulation.rotation_displacement(state.time)
        axis = simulation.axis_nodes
        drift = np.abs(state.displacement[axis] - exact[axis])
        worst = max(worst, float(np.max(drift)))
    r_in = config["geometry"]["axis_radius"]
    yield ("axis follows rotation", worst <= 1e-10 * r_in, f"{worst:.2e}")
    interface = np.intersect1d(
        simulation.structure_nodes, mesh.nodes_of(Subdomain.ROT_FLUID)
    )
    yield ("interface nodes found", len(interface) > 0, str(len(interface)))


def _check_io(config: RunConfig) -> Iterator[Outcome]:
    text = serialize_config(config)
    again = serialize_config(load_config(text))
    yield ("config round trip", text == again, f"{len(text)} bytes")

    mesh = build_mesh(config)
    simulation = build_simulation(config, mesh)
    state = simulation.initial_state()
    with tempfile.TemporaryDirectory() as workdir:
        path = write_vtk_snapshot(state, state.mesh, Path(workdir) / "s.vtk")
        snapshot = read_vtk(path)
        exact = np.array_equal(
            snapshot.point_data["displacement"], state.ale.displacement
        ) and np.array_equal(snapshot.points[:, :2], state.mesh.coords)
        yield ("vtk round trip", exact, str(path.name))
        saved = write_checkpoint(
            Path(workdir) / "c.rfsi", checkpoint_from_state(state)
        )
        loaded = read_checkpoint(saved)
        same = np.array_equal(
            loaded.arrays["displacement"], state.displacement
        )
        yield ("checkpoint round trip", same, str(saved.name))

    spec = config.rotation()
    structure = mesh.nodes_of(Subdomain.STRUCTURE)
    points = mesh.reference_coords[structure]
    rigid = rotational_displacement(points, spec, 1.3)
    probed = decompose_displacement(rigid, points, spec, 1.3)
    worst = float(np.max(np.abs(probed)))
    yield ("probe ignores rotation", worst <= 1e-12, f"{worst:.2e}")


def _check_revolution(config: RunConfig) -> Iterator[Outcome]:
    report = mesh_motion_revolution(
        config.geometry(), h=config["discretization"]["h"], ring_nodes=64
    )
    yield (
        "conforming every step",
        not any(report.defects),
        f"{sum(report.defects)} defects over {report.steps} steps",
    )
    lowest = float(report.min_angles.min())
    yield (
        "min angle preserved",
        report.initial_min_angle - lowest <= 1e-9,
        f"initial {report.initial_min_angle:.6f}, lowest {lowest:.6f}",
    )


def _check_sweep(config: RunConfig) -> Iterator[Outcome]:
    desk = config.replace(loop__dt=0.02)
    t_end = desk.loop().t_end
    with tempfile.TemporaryDirectory() as workdir:
        result = run_stiffness_sweep(desk, out_dir=workdir)
    yield ("no failed runs", not result.failures, str(result.failures))
    if result.failures:
        return
    yield (
        "tip decreases with stiffness",
        sweep_is_monotone(result.series, min(1.0, t_end)),
        f"{len(result.series)} runs",
    )
    ratio = stiffness_ratio(result.series, t_end)
    yield (
        "stiffest tip within 1e-2 of softest",
        ratio <= 1e-2,
        f"ratio {ratio:.3e} at t={t_end:g}",
    )


SUITES: dict[str, tuple[Callable[[RunConfig], Iterator[Outcome]], bool]] = {
    "rotation": (_check_rotation, False),
    "mesh": (_check_mesh, False),
    "ale": (_check_ale, False),
    "assembly": (_check_assembly, False),
    "linsolve": (_check_linsolve, False),
    "timeloop": (_check_timeloop, False),
    "io": (_check_io, False),
    "revolution": (_check_revolution, True),
    "sweep": (_check_sweep, True),
}


def run_checks(
    config: RunConfig, skip_slow: bool = False
) -> list[SuiteResult]:
    """Every suite in order; an exception fails only its own suite"""
    config = desk_config(config)
    results = []
    for name, (suite, slow) in SUITES.items():
        if slow and skip_slow:
            continue
        logger.info("running check suite %s", name)
        try:
            outcomes = list(suite(config))
        except Exception as error:  # noqa
            logger.exception("check suite %s raised", name)
            reason = f"{type(error).__name__}: {error}"
            results.append(SuiteResult(name, [], reason))
            continue
        results.append(SuiteResult(name, outcomes))
    return results
