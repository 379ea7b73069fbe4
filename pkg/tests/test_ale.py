from __future__ import annotations

import math

import numpy as np
import pytest

from rotorfsi.ale import HarmonicExtension
from rotorfsi.ale import match_sliding_interface
from rotorfsi.ale import MeshInversion
from rotorfsi.ale import MeshMotion
from rotorfsi.ale import RingMismatch
from rotorfsi.ale import solve_ale_deformation
from rotorfsi.ale import update_fluid_mesh
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import extract_ring
from rotorfsi.mesh import InterfaceRing
from rotorfsi.mesh import mesh_quality
from rotorfsi.mesh import RingSide
from rotorfsi.mesh import Subdomain
from rotorfsi.mesh import validate_conformity
from rotorfsi.rotation import rotational_displacement
from rotorfsi.rotation import RotationSpec


@pytest.fixture(scope="module")
def rings(desk_mesh):
    rotating = extract_ring(
        desk_mesh, BoundaryTag.SLIDING, RingSide.ROTATING, reference=True
    )
    stationary = extract_ring(
        desk_mesh, BoundaryTag.SLIDING, RingSide.STATIONARY, reference=True
    )
    return rotating, stationary


@pytest.fixture(scope="module")
def extension(desk_mesh):
    return HarmonicExtension(desk_mesh)


def spacing(mesh):
    return 2 * math.pi / mesh.ring_size


def rigid_structure(mesh, spec, t):
    displacement = np.zeros((mesh.n_nodes, 2))
    structure = mesh.nodes_of(Subdomain.STRUCTURE)
    displacement[structure] = rotational_displacement(
        mesh.reference_coords[structure], spec, t
    )
    return displacement


def test_no_rotation_matches_in_place(desk_mesh, rings):
    shift, correction = match_sliding_interface(
        *rings, 0.0, desk_mesh.center
    )
    assert shift == 0
    assert np.abs(correction).max() <= 1e-15


@pytest.mark.parametrize("spacings", [1, 2, 5])
def test_whole_spacings_need_no_correction(desk_mesh, rings, spacings):
    theta = spacings * spacing(desk_mesh)
    shift, correction = match_sliding_interface(
        *rings, theta, desk_mesh.center
    )
    assert shift == spacings
    assert np.abs(correction).max() <= 1e-12


def test_forward_match_picks_next_node(desk_mesh, rings):
    step = spacing(desk_mesh)
    shift, correction = match_sliding_interface(
        *rings, 0.3 * step, desk_mesh.center
    )
    assert shift == 1
    radius = 0.075
    chord = 2 * radius * math.sin(0.35 * step)
    assert np.allclose(
        np.linalg.norm(correction, axis=1), chord, rtol=1e-9
    )


def test_clockwise_match(desk_mesh, rings):
    step = spacing(desk_mesh)
    shift, _ = match_sliding_interface(
        *rings, -0.3 * step, desk_mesh.center, direction=-1
    )
    assert shift == -1


def test_shift_counts_full_turns(desk_mesh, rings):
    m = desk_mesh.ring_size
    shift, correction = match_sliding_interface(
        *rings, 2 * math.pi + spacing(desk_mesh), desk_mesh.center
    )
    assert shift == m + 1
    assert np.abs(correction).max() <= 1e-12


def test_backward_matching_is_not_implemented(desk_mesh, rings):
    with pytest.raises(NotImplementedError):
        match_sliding_interface(
            *rings, 0.1, desk_mesh.center, rule="backward"
        )
    with pytest.raises(ValueError):
        match_sliding_interface(*rings, 0.1, desk_mesh.center, rule="nearest")


def test_ring_mismatch(desk_mesh, rings):
    rotating, stationary = rings
    short = InterfaceRing(
        nodes=rotating.nodes[:-1],
        side=RingSide.ROTATING,
        angles=rotating.angles[:-1],
        points=rotating.points[:-1],
    )
    with pytest.raises(RingMismatch):
        match_sliding_interface(short, stationary, 0.1, desk_mesh.center)


def test_extension_reproduces_linear_fields(desk_mesh, extension):
    x = desk_mesh.reference_coords
    field = np.column_stack([1e-4 + 2e-3 * x[:, 0], -3e-3 * x[:, 1]])
    result = solve_ale_deformation(desk_mesh, field, field, extension)
    nodes = extension.nodes
    assert np.abs(result[nodes] - field[nodes]).max() <= 1e-12


def test_extension_is_zero_outside_buffer(desk_mesh, extension):
    data = np.ones((desk_mesh.n_nodes, 2))
    result = extension.solve(data, data)
    outside = np.setdiff1d(np.arange(desk_mesh.n_nodes), extension.nodes)
    assert np.array_equal(result[outside], np.zeros((len(outside), 2)))


def test_elasticity_operator_is_not_implemented(desk_mesh):
    with pytest.raises(NotImplementedError):
        HarmonicExtension(desk_mesh, "elasticity")
    with pytest.raises(ValueError):
        HarmonicExtension(desk_mesh, "biharmonic")


def test_inversion_is_reported(square_mesh):
    displacement = np.zeros((square_mesh.n_nodes, 2))
    displacement[40] = [0.4, 0.4]
    with pytest.raises(MeshInversion) as excinfo:
        update_fluid_mesh(square_mesh, displacement, displacement, 0.1)
    assert excinfo.value.details


def test_nonpositive_time_step(square_mesh):
    zero = np.zeros((square_mesh.n_nodes, 2))
    with pytest.raises(ValueError):
        update_fluid_mesh(square_mesh, zero, zero, 0.0)


@pytest.mark.parametrize("fraction", [0.0, 0.25, 0.5, 0.9])
def test_moved_mesh_conforms(desk_mesh, fraction):
    theta = (3 + fraction) * spacing(desk_mesh)
    spec = RotationSpec.constant(desk_mesh.center, theta)
    motion = MeshMotion(desk_mesh, spec)
    displacement = rigid_structure(desk_mesh, spec, 1.0)
    moved, state = motion.move(
        1.0, displacement, np.zeros_like(displacement), 1.0
    )
    assert validate_conformity(moved) == []
    assert moved.ring_shift == state.shift
    assert mesh_quality(moved).min_area > 0


def test_stationary_nodes_do_not_move(desk_mesh):
    spec = RotationSpec.constant(desk_mesh.center, 0.4)
    motion = MeshMotion(desk_mesh, spec)
    displacement = rigid_structure(desk_mesh, spec, 1.0)
    moved, state = motion.move(
        1.0, displacement, np.zeros_like(displacement), 0.1
    )
    stationary = np.setdiff1d(
        desk_mesh.nodes_of(Subdomain.STAT_FLUID), desk_mesh.rotating_ring
    )
    assert np.array_equal(
        moved.coords[stationary], desk_mesh.reference_coords[stationary]
    )
    assert np.array_equal(
        state.velocity[desk_mesh.rotating_ring],
        np.zeros((desk_mesh.ring_size, 2)),
    )


def test_structure_follows_given_displacement(desk_mesh):
    spec = RotationSpec.constant(desk_mesh.center, 0.2)
    motion = MeshMotion(desk_mesh, spec)
    displacement = rigid_structure(desk_mesh, spec, 1.0)
    structure = desk_mesh.nodes_of(Subdomain.STRUCTURE)
    displacement[structure] += 1e-5
    _, state = motion.move(
        1.0, displacement, np.zeros_like(displacement), 1.0
    )
    assert np.array_equal(
        state.displacement[structure], displacement[structure]
    )


def test_whole_spacing_keeps_angles_exactly(desk_mesh):
    spec = RotationSpec.constant(desk_mesh.center, spacing(desk_mesh))
    motion = MeshMotion(desk_mesh, spec)
    before = mesh_quality(desk_mesh).min_angle
    for t in (1.0, 2.0, 7.0):
        displacement = rigid_structure(desk_mesh, spec, t)
        moved, _ = motion.move(
            t, displacement, np.zeros_like(displacement), 1.0
        )
        assert mesh_quality(moved).min_angle == pytest.approx(
            before, abs=1e-9
        )


def test_mesh_velocity_of_rigid_rotation(desk_mesh):
    omega, dt = 0.5, 1e-3
    spec = RotationSpec.constant(desk_mesh.center, omega)
    motion = MeshMotion(desk_mesh, spec)
    first = rigid_structure(desk_mesh, spec, 1.0)
    _, previous = motion.move(1.0, first, np.zeros_like(first), dt)
    second = rigid_structure(desk_mesh, spec, 1.0 + dt)
    _, state = motion.move(1.0 + dt, second, previous.displacement, dt)
    structure = desk_mesh.nodes_of(Subdomain.STRUCTURE)
    radius = np.linalg.norm(
        desk_mesh.reference_coords[structure] - desk_mesh.center, axis=1
    )
    speed = np.linalg.norm(state.velocity[structure], axis=1)
    assert np.allclose(speed, omega * radius, rtol=1e-3)


def test_backward_motion_is_not_implemented(desk_mesh):
    spec = RotationSpec.constant(desk_mesh.center, 1.0)
    with pytest.raises(NotImplementedError):
        MeshMotion(desk_mesh, spec, matching="backward")
