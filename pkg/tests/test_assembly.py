from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from rotorfsi.assembly import apply_master_slave_and_dirichlet
from rotorfsi.assembly import assemble_fluid_blocks
from rotorfsi.assembly import assemble_system
from rotorfsi.assembly import AssemblyOptions
from rotorfsi.assembly import BoundaryCondition
from rotorfsi.assembly import build_constraints
from rotorfsi.assembly import build_dofmap
from rotorfsi.assembly import FieldSet
from rotorfsi.assembly import InconsistentConstraint
from rotorfsi.assembly import linearization_consistency_check
from rotorfsi.assembly import MaterialParams
from rotorfsi.assembly import QuadratureOnInvertedElement
from rotorfsi.assembly.elements import p1_laplacian
from rotorfsi.assembly.elements import p1_mass
from rotorfsi.assembly.elements import triangle_geometry
from rotorfsi.assembly.fluid import divergence_matrix
from rotorfsi.assembly.fluid import supg_parameter
from rotorfsi.assembly.fluid import viscous_matrix
from rotorfsi.assembly.structure import elasticity_matrix
from rotorfsi.assembly.structure import rotate_blocks
from rotorfsi.experiments import frame_equivalence_error
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import build_rectangle_mesh
from rotorfsi.mesh import Subdomain
from rotorfsi.rotation import rotation_matrix

TRIANGLE = np.array([[0.1, 0.2], [0.6, 0.25], [0.3, 0.7]])


def zero_fields(mesh):
    zeros = np.zeros((mesh.n_nodes, 2))
    return FieldSet(zeros, zeros, zeros, zeros)


def no_slip(points, t):
    return np.zeros_like(points)


@pytest.fixture(scope="module")
def walled_square():
    sides = ("bottom", "right", "top", "left")
    return build_rectangle_mesh(
        6, 6, tags={side: BoundaryTag.WALL for side in sides}
    )


@pytest.fixture
def one_triangle():
    return triangle_geometry(TRIANGLE, np.array([[0, 1, 2]]))


def rigid_modes():
    x, y = TRIANGLE[:, 0], TRIANGLE[:, 1]
    return [
        np.column_stack([np.ones(3), np.zeros(3)]).reshape(-1),
        np.column_stack([np.zeros(3), np.ones(3)]).reshape(-1),
        np.column_stack([-y, x]).reshape(-1),
    ]


def test_triangle_geometry(one_triangle):
    area, grads = one_triangle
    assert area[0] == pytest.approx(0.5 * (0.5 * 0.5 - 0.05 * 0.2))
    assert np.allclose(grads[0].sum(axis=0), 0.0, atol=1e-14)
    # gradients of the hat functions reproduce x and y
    assert np.allclose(TRIANGLE.T @ grads[0], np.eye(2), atol=1e-14)


def test_inverted_triangle_is_rejected():
    with pytest.raises(QuadratureOnInvertedElement):
        triangle_geometry(TRIANGLE, np.array([[0, 2, 1]]))


def test_mass_and_laplacian(one_triangle):
    area, grads = one_triangle
    assert p1_mass(area).sum() == pytest.approx(area[0])
    laplacian = p1_laplacian(area, grads)[0]
    assert np.allclose(laplacian.sum(axis=1), 0.0, atol=1e-13)
    assert np.allclose(laplacian, laplacian.T)


def test_viscous_term_ignores_rigid_motion(one_triangle):
    area, grads = one_triangle
    local = viscous_matrix(area, grads, 2.0)[0]
    for mode in rigid_modes():
        assert np.abs(local @ mode).max() <= 1e-13


def test_elasticity_ignores_rigid_motion(one_triangle):
    area, grads = one_triangle
    params = MaterialParams()
    local = elasticity_matrix(area, grads, params.lame_lambda, params.lame_mu)
    scale = np.abs(local).max()
    assert np.allclose(local[0], local[0].T, rtol=0, atol=1e-12 * scale)
    for mode in rigid_modes():
        assert np.abs(local[0] @ mode).max() <= 1e-12 * scale


def test_rotate_blocks_matches_block_diagonal(one_triangle):
    area, grads = one_triangle
    local = elasticity_matrix(area, grads, 1.0, 1.0)
    R = rotation_matrix(0.8)
    blocks = np.kron(np.eye(3), R)
    expected = blocks @ local[0] @ blocks.T
    assert np.allclose(rotate_blocks(local, R)[0], expected, atol=1e-14)


def test_divergence_of_linear_field(one_triangle):
    area, grads = one_triangle
    # u = (2x, -y) has divergence 1
    values = np.column_stack([2 * TRIANGLE[:, 0], -TRIANGLE[:, 1]])
    local = divergence_matrix(area, grads)[0]
    assert np.allclose(local @ values.reshape(-1), area[0] / 3.0)


def test_supg_is_off_at_low_peclet():
    advection = np.full((2, 3, 2), 1e-3)
    tau = supg_parameter(advection, np.array([0.01, 0.01]), 1.0, 1.0, 1.0)
    assert np.array_equal(tau, [0.0, 0.0])


def test_supg_scales_with_element_size():
    advection = np.full((1, 3, 2), [3.0, 4.0])
    tau = supg_parameter(advection, np.array([0.1]), 1000.0, 1e-3, 0.5)
    assert tau[0] == pytest.approx(0.5 * 0.1 / 5.0)


@pytest.mark.parametrize("angle", [0.0, 0.4, 2.0, 5.5])
def test_rotated_stiffness_equals_rotated_mesh(desk_mesh, angle):
    error = frame_equivalence_error(desk_mesh, MaterialParams(), angle)
    assert error <= 1e-12


def test_linearization_is_first_order():
    rng = np.random.default_rng(5)
    params = MaterialParams()
    for _ in range(10):
        H = rng.normal(size=(2, 2))
        H *= 1e-2 / np.linalg.norm(H, 2)
        full, half = linearization_consistency_check(
            H, params.lame_lambda, params.lame_mu, rng.uniform(0, 6)
        )
        assert 3.5 <= full / half <= 4.5


def test_linearization_rejects_large_gradients():
    with pytest.raises(ValueError):
        linearization_consistency_check(np.eye(2), 1.0, 1.0)
    with pytest.raises(ValueError):
        linearization_consistency_check(np.zeros(3), 1.0, 1.0)


@pytest.mark.parametrize(
    "changes", [{"young_modulus": 0.0}, {"poisson_ratio": 0.5}]
)
def test_invalid_materials(changes):
    with pytest.raises(ValueError):
        MaterialParams(**changes)


def test_lame_constants():
    params = MaterialParams(young_modulus=1.0, poisson_ratio=0.25)
    assert params.lame_mu == pytest.approx(0.4)
    assert params.lame_lambda == pytest.approx(0.4)


def test_unknown_options():
    with pytest.raises(ValueError):
        AssemblyOptions(linearization="secant")
    with pytest.raises(ValueError):
        AssemblyOptions(coupling="fluid")


def test_interface_nodes_share_one_slot(desk_mesh):
    dofmap = build_dofmap(desk_mesh)
    interface = desk_mesh.tagged_nodes(BoundaryTag.INTERFACE)
    assert np.array_equal(np.sort(dofmap.interface_nodes), interface)
    assert np.all(dofmap.velocity_slot[interface] >= 0)
    assert np.all(dofmap.pressure_slot[interface] >= 0)
    assert dofmap.n_velocity < dofmap.n_unmerged_velocity


def test_ring_partners_share_slots(desk_mesh):
    dofmap = build_dofmap(desk_mesh)
    assert np.array_equal(
        dofmap.velocity_slot[desk_mesh.rotating_ring],
        dofmap.velocity_slot[desk_mesh.stationary_ring],
    )
    assert np.array_equal(
        dofmap.pressure_slot[desk_mesh.rotating_ring],
        dofmap.pressure_slot[desk_mesh.stationary_ring],
    )


def test_structure_only_dofmap(desk_mesh):
    dofmap = build_dofmap(desk_mesh, fluid=False)
    structure = desk_mesh.nodes_of(Subdomain.STRUCTURE)
    assert dofmap.n_pressure == 0
    assert dofmap.n_velocity == 2 * len(structure)
    stationary = desk_mesh.nodes_of(Subdomain.STAT_FLUID)
    assert np.all(dofmap.velocity_slot[stationary] < 0)


def test_nodal_values_round_trip(desk_mesh):
    dofmap = build_dofmap(desk_mesh)
    field = np.sin(desk_mesh.reference_coords * 20.0)
    vector = dofmap.velocity_vector(field)
    assert np.array_equal(dofmap.nodal_velocity(vector), field)
    pressure = desk_mesh.reference_coords[:, 0].copy()
    fluid = dofmap.pressure_slot >= 0
    back = dofmap.nodal_pressure(dofmap.pressure_vector(pressure))
    assert np.array_equal(back[fluid], pressure[fluid])


def inflow_conditions():
    def inflow(points, t):
        values = np.zeros_like(points)
        values[:, 0] = 1.0
        return values

    return [
        BoundaryCondition(BoundaryTag.INLET, inflow),
        BoundaryCondition(BoundaryTag.WALL, no_slip),
    ]


def test_corner_conflict_keeps_the_wall(square_mesh, caplog):
    dofmap = build_dofmap(square_mesh)
    with caplog.at_level(logging.WARNING):
        constraints = build_constraints(
            square_mesh, dofmap, inflow_conditions(), 0.0
        )
    assert "Dirichlet conflicts" in caplog.text
    corner = dofmap.velocity_dofs([0])[0]
    position = np.flatnonzero(constraints.velocity_dofs == corner[0])
    assert constraints.velocity_values[position] == [0.0]


def test_strict_corner_policy(square_mesh):
    dofmap = build_dofmap(square_mesh)
    with pytest.raises(InconsistentConstraint) as excinfo:
        build_constraints(
            square_mesh, dofmap, inflow_conditions(), 0.0, policy="strict"
        )
    assert excinfo.value.details


def test_equal_ranks_conflict(square_mesh):
    dofmap = build_dofmap(square_mesh)
    conditions = [
        BoundaryCondition(c.tag, c.value, priority=1)
        for c in inflow_conditions()
    ]
    with pytest.raises(InconsistentConstraint):
        build_constraints(square_mesh, dofmap, conditions, 0.0)


def test_pressure_pin_needs_a_fluid_node():
    mesh = build_rectangle_mesh(2, 2, subdomain=Subdomain.STRUCTURE)
    dofmap = build_dofmap(mesh)
    with pytest.raises(InconsistentConstraint):
        build_constraints(mesh, dofmap, [], 0.0, pressure_pins=[(0, 0.0)])


def stokes_full(mesh):
    dofmap = build_dofmap(mesh)
    options = AssemblyOptions(steady=True, convection=False)
    return assemble_system(
        mesh, dofmap, MaterialParams(), options, zero_fields(mesh), 1.0
    )


def test_divergence_of_interior_hats_integrates_to_zero(walled_square):
    full = stokes_full(walled_square)
    flux = full.B.T @ np.ones(full.B.shape[0])
    boundary = walled_square.tagged_nodes(BoundaryTag.WALL)
    interior = np.setdiff1d(np.arange(walled_square.n_nodes), boundary)
    dofs = full.dofmap.velocity_dofs(interior).reshape(-1)
    assert np.abs(flux[dofs]).max() <= 1e-14


def test_stokes_blocks_are_symmetric(walled_square):
    full = stokes_full(walled_square)
    assert abs(full.A - full.A.T).max() <= 1e-12 * abs(full.A).max()
    assert abs(full.C - full.C.T).max() <= 1e-15
    assert np.abs(full.C @ np.ones(full.C.shape[0])).max() <= 1e-15


def test_reduced_system_lifts_dirichlet_values(walled_square):
    full = stokes_full(walled_square)
    dofmap = full.dofmap
    constraints = build_constraints(
        walled_square, dofmap, [BoundaryCondition(BoundaryTag.WALL, no_slip)],
        0.0, pressure_pins=[(0, 0.0)],
    )
    system = apply_master_slave_and_dirichlet(full, constraints)
    boundary = walled_square.tagged_nodes(BoundaryTag.WALL)
    assert system.A.shape[0] == dofmap.n_velocity - 2 * len(boundary)
    assert system.B.shape[0] == dofmap.n_pressure - 1
    velocity, pressure = system.expand(np.zeros(system.size))
    assert np.array_equal(velocity, np.zeros(dofmap.n_velocity))
    assert system.residual(velocity, pressure) == 0.0


def test_structure_block_is_positive_definite(desk_mesh):
    dofmap = build_dofmap(desk_mesh, fluid=False)
    options = AssemblyOptions(steady=True, coupling="structure")
    full = assemble_system(
        desk_mesh, dofmap, MaterialParams(), options,
        zero_fields(desk_mesh), 1.0,
    )
    axis = BoundaryCondition(BoundaryTag.AXIS, no_slip)
    constraints = build_constraints(desk_mesh, dofmap, [axis], 0.0)
    system = apply_master_slave_and_dirichlet(full, constraints)
    A = system.A.toarray()
    scale = np.abs(A).max()
    assert np.abs(A - A.T).max() <= 1e-13 * scale
    assert np.linalg.eigvalsh(A).min() > 0


def test_time_dependent_structure_rows(desk_mesh):
    dofmap = build_dofmap(desk_mesh, fluid=False)
    params = MaterialParams()
    options = AssemblyOptions(coupling="structure")
    fields = zero_fields(desk_mesh)
    steady = assemble_system(
        desk_mesh, dofmap, params,
        AssemblyOptions(steady=True, coupling="structure"), fields, 0.01,
    )
    unsteady = assemble_system(
        desk_mesh, dofmap, params, options, fields, 0.01, math.pi / 3
    )
    assert unsteady.A.shape == steady.A.shape
    assert abs(unsteady.A - unsteady.A.T).max() <= 1e-9 * abs(
        unsteady.A
    ).max()
    # the rotation source loads the structure even at rest
    assert np.abs(unsteady.f).max() > 0
    assert np.abs(steady.f).max() == 0


def streamline_part(mesh, iterate, stabilization):
    dofmap = build_dofmap(mesh)
    params = MaterialParams(fluid_viscosity=1e-3)
    zeros = np.zeros((mesh.n_nodes, 2))
    fields = FieldSet(
        iterate, zeros, zeros, zeros, stabilization=stabilization
    )
    blocks = {}
    for supg in (1.0, 0.0):
        options = AssemblyOptions(
            steady=True, linearization="picard", supg=supg
        )
        blocks[supg], *_ = assemble_fluid_blocks(
            mesh, dofmap, params, options, fields, 1.0
        )
    return (blocks[1.0] - blocks[0.0]).toarray()


def test_supg_follows_the_newton_start_velocity(walled_square):
    frozen = np.tile([1.0, 0.5], (walled_square.n_nodes, 1))
    rng = np.random.default_rng(3)
    noise = rng.normal(size=(walled_square.n_nodes, 2))
    reference = streamline_part(walled_square, frozen, frozen)
    scale = np.abs(reference).max()
    assert scale > 0
    for factor in (0.0, 1.0, 3.0):
        part = streamline_part(walled_square, factor * noise, frozen)
        assert np.abs(part - reference).max() <= 1e-10 * scale


def test_supg_without_start_velocity_follows_the_iterate(walled_square):
    frozen = np.tile([1.0, 0.5], (walled_square.n_nodes, 1))
    assert np.allclose(
        streamline_part(walled_square, frozen, None),
        streamline_part(walled_square, frozen, frozen),
        rtol=0,
        atol=1e-10,
    )
    still = np.zeros_like(frozen)
    assert not np.any(streamline_part(walled_square, still, None))
