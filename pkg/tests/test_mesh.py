from __future__ import annotations

import math

import numpy as np
import pytest

from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import build_rectangle_mesh
from rotorfsi.mesh import build_rotor_channel_mesh
from rotorfsi.mesh import ChannelRotorGeometry
from rotorfsi.mesh import extract_ring
from rotorfsi.mesh import InvalidGeometry
from rotorfsi.mesh import is_delaunay
from rotorfsi.mesh import mesh_quality
from rotorfsi.mesh import MultipleLoops
from rotorfsi.mesh import OpenCurve
from rotorfsi.mesh import RingSide
from rotorfsi.mesh import Subdomain
from rotorfsi.mesh import validate_conformity


def edge_set(triangles):
    return {
        tuple(sorted((int(t[k]), int(t[(k + 1) % 3]))))
        for t in triangles
        for k in range(3)
    }


def test_desk_mesh_conforms(desk_mesh):
    assert validate_conformity(desk_mesh) == []


def test_every_subdomain_is_meshed(desk_mesh):
    for subdomain in Subdomain:
        assert len(desk_mesh.triangles_of(subdomain)) > 0


def test_positive_areas(desk_mesh):
    quality = mesh_quality(desk_mesh)
    assert quality.min_area > 0
    assert quality.inverted == ()
    assert quality.min_angle > 10.0


def test_generation_is_deterministic(geometry, desk_mesh):
    again = build_rotor_channel_mesh(geometry, 0.02)
    assert np.array_equal(again.reference_coords, desk_mesh.reference_coords)
    assert np.array_equal(again.triangles, desk_mesh.triangles)
    assert np.array_equal(again.edges, desk_mesh.edges)


def test_seed_changes_interior_nodes(geometry, desk_mesh):
    other = build_rotor_channel_mesh(geometry, 0.02, seed=7)
    assert validate_conformity(other) == []
    assert not (
        other.n_nodes == desk_mesh.n_nodes
        and np.array_equal(other.reference_coords, desk_mesh.reference_coords)
    )


def test_euler_characteristic_of_channel_with_axis_hole(desk_mesh):
    canonical = desk_mesh.canonical_nodes()[desk_mesh.triangles]
    vertices = len(np.unique(canonical))
    edges = len(edge_set(canonical))
    faces = len(canonical)
    # one hole: the axis disk
    assert vertices - edges + faces == 0


def test_interface_edges_separate_structure_and_fluid(desk_mesh):
    structure = edge_set(desk_mesh.triangles_of(Subdomain.STRUCTURE))
    fluid = edge_set(desk_mesh.triangles_of(Subdomain.ROT_FLUID))
    interface = {
        tuple(sorted(map(int, edge)))
        for edge in desk_mesh.tagged_edges(BoundaryTag.INTERFACE)
    }
    assert interface == structure & fluid


def test_stationary_fluid_never_touches_structure(desk_mesh):
    structure = set(desk_mesh.nodes_of(Subdomain.STRUCTURE).tolist())
    stationary = set(desk_mesh.nodes_of(Subdomain.STAT_FLUID).tolist())
    assert not structure & stationary


def test_sliding_rings(desk_mesh, geometry):
    rotating = extract_ring(desk_mesh, BoundaryTag.SLIDING, RingSide.ROTATING)
    stationary = extract_ring(
        desk_mesh, BoundaryTag.SLIDING, RingSide.STATIONARY
    )
    assert len(rotating) == len(stationary) == desk_mesh.ring_size
    assert np.array_equal(rotating.nodes, desk_mesh.rotating_ring)
    assert np.array_equal(stationary.nodes, desk_mesh.stationary_ring)
    assert np.allclose(rotating.points, stationary.points, atol=1e-15)
    radius = np.linalg.norm(
        rotating.points - np.asarray(geometry.center), axis=1
    )
    assert np.allclose(radius, geometry.buffer_radius, rtol=1e-12)
    assert np.all(np.diff(rotating.angles) > 0)


def test_ring_size_follows_mesh_size(geometry):
    mesh = build_rotor_channel_mesh(geometry, 0.02, ring_nodes=40)
    assert mesh.ring_size == 40
    assert validate_conformity(mesh) == []


def test_too_few_ring_nodes(geometry):
    with pytest.raises(InvalidGeometry):
        build_rotor_channel_mesh(geometry, 0.02, ring_nodes=8)


@pytest.mark.parametrize(
    "changes",
    [
        {"buffer_radius": 0.2},
        {"axis_radius": 0.01},
        {"arm_length": 0.2},
        {"center": (0.05, 0.1)},
        {"width": -1.0},
    ],
)
def test_invalid_geometry(changes):
    geometry = ChannelRotorGeometry(**changes)
    assert geometry.violations()
    with pytest.raises(InvalidGeometry) as excinfo:
        build_rotor_channel_mesh(geometry, 0.02)
    assert excinfo.value.details


def test_nonpositive_mesh_size(geometry):
    with pytest.raises(InvalidGeometry):
        build_rotor_channel_mesh(geometry, 0.0)


def test_interface_ring_is_one_loop(desk_mesh):
    ring = extract_ring(desk_mesh, BoundaryTag.INTERFACE)
    assert len(ring) == len(desk_mesh.tagged_nodes(BoundaryTag.INTERFACE))


def test_sliding_circle_without_side_is_two_loops(desk_mesh):
    with pytest.raises(MultipleLoops):
        extract_ring(desk_mesh, BoundaryTag.SLIDING)


def test_missing_tag_is_an_open_curve(square_mesh):
    with pytest.raises(OpenCurve):
        extract_ring(square_mesh, BoundaryTag.INTERFACE)


def test_open_wall_is_an_open_curve(square_mesh):
    with pytest.raises(OpenCurve):
        extract_ring(square_mesh, BoundaryTag.WALL)


def test_rectangle_mesh(square_mesh):
    assert square_mesh.n_nodes == 81
    assert square_mesh.n_triangles == 128
    assert validate_conformity(square_mesh) == []
    assert mesh_quality(square_mesh).min_angle == pytest.approx(45.0)
    assert is_delaunay(square_mesh)
    assert mesh_quality(square_mesh).area_ratio == pytest.approx(1.0)


def test_rectangle_mesh_options():
    mesh = build_rectangle_mesh(
        3,
        2,
        lx=3.0,
        ly=1.0,
        origin=(1.0, 0.0),
        tags={"left": BoundaryTag.WALL},
    )
    assert mesh.n_nodes == 12
    assert mesh.n_triangles == 12
    assert mesh.center == (2.5, 0.5)
    assert np.all(mesh.edge_tags[-2:] == int(BoundaryTag.WALL))
    assert not np.any(mesh.edge_tags == int(BoundaryTag.INLET))
    with pytest.raises(InvalidGeometry):
        build_rectangle_mesh(0, 4)


def test_rigid_rotation_keeps_quality(desk_mesh):
    angle = 0.37
    c, s = math.cos(angle), math.sin(angle)
    center = np.asarray(desk_mesh.center)
    rotated = (desk_mesh.coords - center) @ np.array([[c, s], [-s, c]])
    before = mesh_quality(desk_mesh)
    after = mesh_quality(desk_mesh, rotated + center)
    assert after.min_angle == pytest.approx(before.min_angle, abs=1e-9)


def test_shifted_ring_without_motion_is_a_mismatch(desk_mesh):
    pairing = np.roll(desk_mesh.stationary_ring, -1)
    defects = validate_conformity(desk_mesh, pairing=pairing)
    assert any(d.kind == "sliding node mismatch" for d in defects)


def test_duplicate_node_is_reported(square_mesh):
    coords = np.array(square_mesh.coords)
    coords[1] = coords[0]
    defects = validate_conformity(square_mesh, coords=coords)
    assert any(d.kind == "duplicate node" for d in defects)


def test_inverted_triangle_is_listed(square_mesh):
    coords = np.array(square_mesh.coords)
    coords[10] = coords[10] + [0.3, 0.3]
    assert mesh_quality(square_mesh, coords).inverted
