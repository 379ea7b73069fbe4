"""Channel-with-rotor mesh generation.

The domain is a rectangular channel holding a circular buffer zone
around a plus-shaped rotor. The rotor is cut by a small axis circle whose
interior is not meshed. Every interface is a polyline:

* the channel rectangle (inlet, outlet and walls),
* the axis circle,
* the cross outline, meshed by the structure on one side,
* the sliding circle, carrying two coincident node rings.

Interior nodes come from graded hexagonal lattices, and a single Delaunay
triangulation of all nodes is required to contain every polyline segment
as an edge. Generation is deterministic: the same arguments give a
bit-identical mesh.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial import Delaunay

from rotorfsi.errors import RotorFsiError
from rotorfsi.mesh.core import BoundaryTag
from rotorfsi.mesh.core import Mesh
from rotorfsi.mesh.core import mesh_quality
from rotorfsi.mesh.core import signed_areas
from rotorfsi.mesh.core import Subdomain
from rotorfsi.mesh.core import validate_conformity

logger = logging.getLogger(__name__)

MIN_RING_NODES = 16


class InvalidGeometry(RotorFsiError):
    """Raised when the channel, buffer and rotor do not nest"""


class MeshGenerationFailure(RotorFsiError):
    """Raised when the triangulation is degenerate or nonconforming"""


@dataclass(frozen=True)
class ChannelRotorGeometry:
    """Channel, buffer zone and rotor dimensions in meters.

    ``arm_length`` is the tip-to-tip length of the cross, so one arm
    reaches ``arm_length / 2`` from the center.
    """

    length: float = 0.5
    width: float = 0.2
    arm_length: float = 0.1
    arm_width: float = 0.015
    buffer_radius: float = 0.075
    center: tuple[float, float] = (0.15, 0.1)
    axis_radius: float = 0.004

    @property
    def arm_reach(self) -> float:
        return 0.5 * self.arm_length

    @property
    def half_width(self) -> float:
        return 0.5 * self.arm_width

    @property
    def tip_radius(self) -> float:
        return math.hypot(self.arm_reach, self.half_width)

    def violations(self) -> list[tuple[str, str]]:
        """Every nesting rule this geometry breaks, as (field, message)"""
        found = []
        for name in (
            "length",
            "width",
            "arm_length",
            "arm_width",
            "buffer_radius",
            "axis_radius",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                found.append((name, f"{name} must be positive, got {value}"))
        if found:
            return found

        if not self.axis_radius < self.half_width:
            found.append(
                (
                    "axis_radius",
                    "axis_radius must be smaller than arm_width / 2",
                )
            )
        if not self.half_width < self.arm_reach:
            found.append(
                ("arm_width", "arm_width must be smaller than arm_length")
            )
        if not self.tip_radius < self.buffer_radius:
            found.append(
                (
                    "buffer_radius",
                    "rotor tips must lie inside the buffer zone",
                )
            )
        if not self.buffer_radius < 0.5 * self.width:
            found.append(
                ("buffer_radius", "buffer_radius must be smaller than W/2")
            )
        x0, y0 = self.center
        if not (
            self.buffer_radius < x0 < self.length - self.buffer_radius
            and self.buffer_radius < y0 < self.width - self.buffer_radius
        ):
            found.append(
                ("center", "buffer zone must lie inside the channel")
            )
        return found

    def validate(self) -> None:
        found = self.violations()
        if found:
            raise InvalidGeometry(
                "; ".join(message for _, message in found), details=found
            )


def cross_corners(geom: ChannelRotorGeometry) -> np.ndarray:
    """The 12 outline corners of the cross, counterclockwise, centered"""
    a, b = geom.arm_reach, geom.half_width
    return np.array(
        [
            (a, -b),
            (a, b),
            (b, b),
            (b, a),
            (-b, a),
            (-b, b),
            (-a, b),
            (-a, -b),
            (-b, -b),
            (-b, -a),
            (b, -a),
            (b, -b),
        ]
    )


def inside_cross(local: np.ndarray, geom: ChannelRotorGeometry) -> np.ndarray:
    x, y = np.abs(local[:, 0]), np.abs(local[:, 1])
    a, b = geom.arm_reach, geom.half_width
    return ((x < a) & (y < b)) | ((x < b) & (y < a))


def inside_regular_polygon(
    local: np.ndarray, radius: float, count: int, phase: float
) -> np.ndarray:
    """Point-in-polygon for the regular polygon with vertices at
    ``phase + k * 2pi / count`` on a circle of ``radius``."""
    step = 2.0 * math.pi / count
    rho = np.hypot(local[:, 0], local[:, 1])
    phi = np.arctan2(local[:, 1], local[:, 0])
    k = np.mod(np.floor((phi - phase) / step), count)
    bisector = phase + (k + 0.5) * step
    return rho * np.cos(phi - bisector) < radius * math.cos(math.pi / count)


def _closed_polyline(vertices: np.ndarray, spacing: float):
    """Subdivide a closed polygon; returns points and per-segment side"""
    points, sides = [], []
    count = len(vertices)
    for side in range(count):
        start, stop = vertices[side], vertices[(side + 1) % count]
        pieces = max(1, math.ceil(np.linalg.norm(stop - start) / spacing))
        for piece in range(pieces):
            points.append(start + (stop - start) * piece / pieces)
            sides.append(side)
    return np.array(points), np.array(sides)


def _circle(center, radius: float, count: int, phase: float) -> np.ndarray:
    angles = phase + 2.0 * math.pi * np.arange(count) / count
    return np.asarray(center) + radius * np.column_stack(
        [np.cos(angles), np.sin(angles)]
    )


def _loop_segments(first: int, count: int) -> np.ndarray:
    ids = first + np.arange(count)
    return np.column_stack([ids, np.roll(ids, -1)])


def _segment_distance(points: np.ndarray, p0: np.ndarray, p1: np.ndarray):
    """Distance of every point to every segment, shape (N, S)"""
    d = p1 - p0
    rel = points[:, None, :] - p0[None, :, :]
    t = np.einsum("nsk,sk->ns", rel, d) / np.einsum("sk,sk->s", d, d)
    t = np.clip(t, 0.0, 1.0)
    foot = p0[None, :, :] + t[:, :, None] * d[None, :, :]
    return np.linalg.norm(points[:, None, :] - foot, axis=2)


def _hex_lattice(lower, upper, spacing: float) -> np.ndarray:
    rise = spacing * math.sqrt(3) / 2.0
    rows = np.arange(lower[1], upper[1] + rise, rise)
    columns = np.arange(lower[0], upper[0] + spacing, spacing)
    xs, ys = np.meshgrid(columns, rows)
    xs = xs + 0.5 * spacing * (np.arange(len(rows)) % 2)[:, None]
    return np.column_stack([xs.ravel(), ys.ravel()])


class _Builder:
    """Accumulates nodes and constrained segments"""

    def __init__(self):
        self.chunks: list[np.ndarray] = []
        self.count = 0
        self.segments: list[np.ndarray] = []
        self.segment_tags: list[np.ndarray] = []

    def add_nodes(self, points: np.ndarray) -> int:
        first = self.count
        self.chunks.append(np.asarray(points, dtype=float))
        self.count += len(points)
        return first

    def add_loop(self, points: np.ndarray, tags) -> tuple[int, np.ndarray]:
        first = self.add_nodes(points)
        segments = _loop_segments(first, len(points))
        self.segments.append(segments)
        self.segment_tags.append(np.broadcast_to(tags, len(points)).copy())
        return first, segments

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate(self.chunks)

    def constrained(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.concatenate(self.segments),
            np.concatenate(self.segment_tags),
        )


def _fill_points(
    geom: ChannelRotorGeometry,
    h: float,
    hs: float,
    chord: float,
    grading: float,
    constrained_points: np.ndarray,
    segment_points: tuple[np.ndarray, np.ndarray],
    layers: list[tuple[np.ndarray, float, float, float]],
    rng: np.random.Generator,
) -> np.ndarray:
    """Graded interior nodes kept clear of every constrained segment"""
    center = np.asarray(geom.center)
    corners = cross_corners(geom)
    cross_p0, cross_p1 = corners, np.roll(corners, -1, axis=0)
    seg_p0, seg_p1 = segment_points
    seg_length = np.linalg.norm(seg_p1 - seg_p0, axis=1)

    sizes = [hs]
    while sizes[-1] * 1.5 < h:
        sizes.append(sizes[-1] * 1.5)
    if sizes[-1] < h:
        sizes.append(h)

    accepted = [constrained_points]
    for level, spacing in enumerate(sizes):
        candidates = _hex_lattice(
            (0.0, 0.0), (geom.length, geom.width), spacing
        )
        candidates = candidates + rng.uniform(
            -1e-3 * spacing, 1e-3 * spacing, size=candidates.shape
        )
        inside = (
            (candidates[:, 0] > 0)
            & (candidates[:, 0] < geom.length)
            & (candidates[:, 1] > 0)
            & (candidates[:, 1] < geom.width)
        )
        candidates = candidates[inside]
        local = candidates - center
        rho = np.hypot(local[:, 0], local[:, 1])
        candidates, local, rho = (
            candidates[rho > geom.axis_radius],
            local[rho > geom.axis_radius],
            rho[rho > geom.axis_radius],
        )

        to_cross = _segment_distance(local, cross_p0, cross_p1).min(axis=1)
        size = np.minimum(
            h,
            np.minimum(
                hs + grading * to_cross,
                chord + grading * np.abs(rho - geom.buffer_radius),
            ),
        )
        band = np.digitize(size, sizes[1:])
        keep = band == level
        for _, _, inner, outer in layers:
            keep &= ~((rho > inner) & (rho < outer))
        candidates = candidates[keep]
        if len(candidates) == 0:
            continue

        ratio = _segment_distance(candidates, seg_p0, seg_p1) / seg_length
        candidates = candidates[ratio.min(axis=1) >= 0.65]
        for layer_points, gap, _, _ in layers:
            if len(candidates) == 0:
                break
            distance, _ = cKDTree(layer_points).query(candidates)
            candidates = candidates[distance >= 0.65 * gap]
        if len(candidates) == 0:
            continue

        distance, _ = cKDTree(np.concatenate(accepted)).query(candidates)
        candidates = candidates[distance >= 0.75 * spacing]
        accepted.append(candidates)
        logger.debug(
            "fill level %d: spacing %.3e, %d nodes",
            level,
            spacing,
            len(candidates),
        )

    if len(accepted) == 1:
        return np.empty((0, 2))
    return np.concatenate(accepted[1:])


def build_rotor_channel_mesh(
    geom: ChannelRotorGeometry,
    h: float,
    *,
    ring_nodes: int | None = None,
    seed: int = 0,
    grading: float = 0.3,
) -> Mesh:
    """Triangulate the channel around the rotor.

    :param geom: domain dimensions.
    :param h: target edge length away from the rotor.
    :param ring_nodes: node count m on the sliding circle, defaults to
        the count giving spacing h (at least 16).
    :param seed: seed of the lattice jitter.
    :param grading: growth rate of the element size with distance from
        the rotor and the sliding circle.
    """
    geom.validate()
    if not (math.isfinite(h) and h > 0):
        raise InvalidGeometry(
            f"mesh size must be positive, got {h}",
            details=[("mesh_size", "must be positive")],
        )
    if ring_nodes is not None and ring_nodes < MIN_RING_NODES:
        raise InvalidGeometry(
            f"the sliding circle needs at least {MIN_RING_NODES} nodes",
            details=[("ring_nodes", f"must be >= {MIN_RING_NODES}")],
        )

    center = np.asarray(geom.center, dtype=float)
    half = geom.half_width
    hs = min(h, geom.arm_width / 3.0, 1.2 * (half - geom.axis_radius))
    m = ring_nodes or max(
        MIN_RING_NODES, math.ceil(2 * math.pi * geom.buffer_radius / h)
    )
    step = 2.0 * math.pi / m
    chord = 2.0 * geom.buffer_radius * math.sin(math.pi / m)
    thickness = chord * math.sqrt(3) / 2.0
    m_axis = max(12, math.ceil(2 * math.pi * geom.axis_radius / hs))
    axis_step = 2.0 * math.pi / m_axis

    builder = _Builder()

    rectangle = np.array(
        [
            (0.0, 0.0),
            (geom.length, 0.0),
            (geom.length, geom.width),
            (0.0, geom.width),
        ]
    )
    side_tags = np.array(
        [
            BoundaryTag.WALL,
            BoundaryTag.OUTLET,
            BoundaryTag.WALL,
            BoundaryTag.INLET,
        ]
    )
    outline, sides = _closed_polyline(rectangle, h)
    builder.add_loop(outline, side_tags[sides])

    axis_points = _circle(center, geom.axis_radius, m_axis, 0.5 * axis_step)
    builder.add_loop(axis_points, BoundaryTag.AXIS)

    cross_points, _ = _closed_polyline(cross_corners(geom), hs)
    builder.add_loop(center + cross_points, BoundaryTag.INTERFACE)

    ring_points = _circle(center, geom.buffer_radius, m, 0.5 * step)
    ring_first, _ = builder.add_loop(ring_points, BoundaryTag.SLIDING)

    layers = []
    inner_radius = geom.buffer_radius - thickness
    if inner_radius >= geom.tip_radius + 0.35 * chord:
        points = _circle(center, inner_radius, m, 0.0)
        builder.add_nodes(points)
        gap = 2.0 * inner_radius * math.sin(math.pi / m)
        layers.append(
            (points, gap, inner_radius - 0.5 * gap, geom.buffer_radius)
        )
    outer_radius = geom.buffer_radius + thickness
    room = min(
        center[0],
        geom.length - center[0],
        center[1],
        geom.width - center[1],
    )
    if outer_radius + 0.65 * h <= room:
        points = _circle(center, outer_radius, m, 0.0)
        builder.add_nodes(points)
        gap = 2.0 * outer_radius * math.sin(math.pi / m)
        layers.append(
            (points, gap, geom.buffer_radius, outer_radius + 0.5 * gap)
        )

    segments, segment_tags = builder.constrained()
    constrained_points = builder.nodes
    fill = _fill_points(
        geom,
        h,
        hs,
        chord,
        grading,
        constrained_points,
        (
            constrained_points[segments[:, 0]],
            constrained_points[segments[:, 1]],
        ),
        layers,
        np.random.default_rng(seed),
    )
    builder.add_nodes(fill)
    nodes = builder.nodes

    triangulation = Delaunay(nodes)
    if len(triangulation.coplanar):
        raise MeshGenerationFailure(
            f"{len(triangulation.coplanar)} nodes were left out of the "
            "triangulation",
            details=triangulation.coplanar[:, 0].tolist(),
        )
    triangles = triangulation.simplices.astype(np.int64)
    areas = signed_areas(nodes, triangles)
    scale = (geom.length + geom.width) ** 2
    if np.any(np.abs(areas) <= 1e-14 * scale):
        degenerate = np.flatnonzero(np.abs(areas) <= 1e-14 * scale)
        raise MeshGenerationFailure(
            f"{len(degenerate)} degenerate triangles",
            details=degenerate.tolist(),
        )
    flip = areas < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    n = len(nodes)
    edge_keys = np.unique(
        np.concatenate(
            [
                np.minimum(triangles[:, k], triangles[:, (k + 1) % 3]) * n
                + np.maximum(triangles[:, k], triangles[:, (k + 1) % 3])
                for k in range(3)
            ]
        )
    )
    segment_keys = segments.min(axis=1) * n + segments.max(axis=1)
    missing = ~np.isin(segment_keys, edge_keys)
    if missing.any():
        raise MeshGenerationFailure(
            f"{int(missing.sum())} boundary segments are not mesh edges",
            details=segments[missing].tolist(),
        )

    local = nodes[triangles].mean(axis=1) - center
    in_axis = inside_regular_polygon(
        local, geom.axis_radius, m_axis, 0.5 * axis_step
    )
    in_cross = inside_cross(local, geom)
    in_ring = inside_regular_polygon(
        local, geom.buffer_radius, m, 0.5 * step
    )
    subdomains = np.full(len(triangles), int(Subdomain.STAT_FLUID), np.int8)
    subdomains[in_ring] = int(Subdomain.ROT_FLUID)
    subdomains[in_cross] = int(Subdomain.STRUCTURE)
    keep = ~in_axis
    triangles, subdomains = triangles[keep], subdomains[keep]

    # rotating copies of the ring nodes go after every other node
    stationary_ring = ring_first + np.arange(m)
    rotating_ring = n + np.arange(m)
    copy_of = np.arange(n + m)
    copy_of[stationary_ring] = rotating_ring
    rotating = subdomains == int(Subdomain.ROT_FLUID)
    triangles[rotating] = copy_of[triangles[rotating]]
    nodes = np.concatenate([nodes, nodes[stationary_ring]])

    sliding = segment_tags == BoundaryTag.SLIDING
    edges = np.concatenate([segments, copy_of[segments[sliding]]])
    edge_tags = np.concatenate(
        [segment_tags, segment_tags[sliding]]
    ).astype(np.int8)

    triangles, edges, stationary_ring, rotating_ring, nodes = _compact(
        triangles, edges, stationary_ring, rotating_ring, nodes
    )
    mesh = Mesh(
        reference_coords=nodes,
        coords=nodes,
        triangles=triangles,
        subdomains=subdomains,
        edges=edges,
        edge_tags=edge_tags,
        center=geom.center,
        rotating_ring=rotating_ring,
        stationary_ring=stationary_ring,
    )
    defects = validate_conformity(mesh)
    if defects:
        raise MeshGenerationFailure(
            f"{len(defects)} conformity defects, first: {defects[0].message}",
            details=defects,
        )
    quality = mesh_quality(mesh)
    logger.info(
        "mesh: %d nodes, %d triangles, %d sliding nodes, "
        "min angle %.2f deg",
        mesh.n_nodes,
        mesh.n_triangles,
        m,
        quality.min_angle,
    )
    return mesh


def _compact(triangles, edges, stationary_ring, rotating_ring, nodes):
    """Drop nodes no triangle references and renumber"""
    used = np.zeros(len(nodes), dtype=bool)
    used[triangles.ravel()] = True
    if used.all():
        return triangles, edges, stationary_ring, rotating_ring, nodes
    renumber = np.cumsum(used) - 1
    return (
        renumber[triangles],
        renumber[edges],
        renumber[stationary_ring],
        renumber[rotating_ring],
        nodes[used],
    )


def build_rectangle_mesh(
    nx: int,
    ny: int,
    lx: float = 1.0,
    ly: float = 1.0,
    *,
    origin: tuple[float, float] = (0.0, 0.0),
    subdomain: Subdomain = Subdomain.STAT_FLUID,
    tags: dict[str, BoundaryTag] | None = None,
) -> Mesh:
    """Structured rectangle, each cell split along its rising diagonal.

    :param tags: boundary tag per side (``bottom``, ``right``, ``top``,
        ``left``); by default walls at top and bottom, inlet on the left
        and outlet on the right.
    """
    if nx < 1 or ny < 1:
        raise InvalidGeometry(
            "a rectangle mesh needs at least one cell per direction",
            details=[("nx", nx), ("ny", ny)],
        )
    side_tags = {
        "bottom": BoundaryTag.WALL,
        "right": BoundaryTag.OUTLET,
        "top": BoundaryTag.WALL,
        "left": BoundaryTag.INLET,
    }
    side_tags.update(tags or {})

    xs = origin[0] + np.linspace(0.0, lx, nx + 1)
    ys = origin[1] + np.linspace(0.0, ly, ny + 1)
    grid_x, grid_y = np.meshgrid(xs, ys)
    coords = np.column_stack([grid_x.ravel(), grid_y.ravel()])

    def node(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    lower = np.column_stack(
        [node(i, j), node(i + 1, j), node(i + 1, j + 1)]
    )
    upper = np.column_stack(
        [node(i, j), node(i + 1, j + 1), node(i, j + 1)]
    )
    triangles = np.empty((2 * len(i), 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    along_x, along_y = np.arange(nx), np.arange(ny)
    sides = {
        "bottom": np.column_stack([node(along_x, 0), node(along_x + 1, 0)]),
        "right": np.column_stack([node(nx, along_y), node(nx, along_y + 1)]),
        "top": np.column_stack([node(along_x, ny), node(along_x + 1, ny)]),
        "left": np.column_stack([node(0, along_y), node(0, along_y + 1)]),
    }
    edges = np.concatenate(list(sides.values()))
    edge_tags = np.concatenate(
        [np.full(len(v), int(side_tags[k])) for k, v in sides.items()]
    )
    return Mesh(
        reference_coords=coords,
        coords=coords,
        triangles=triangles,
        subdomains=np.full(len(triangles), int(subdomain)),
        edges=edges,
        edge_tags=edge_tags,
        center=(origin[0] + 0.5 * lx, origin[1] + 0.5 * ly),
        rotating_ring=np.empty(0, dtype=np.int64),
        stationary_ring=np.empty(0, dtype=np.int64),
    )
